#include "fogmq/broker/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <utility>

namespace fogmq::broker {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
  throw NetError(what + ": " + std::strerror(errno));
}

int poll_one(int fd, short events, double timeout_s) {
  pollfd p{fd, events, 0};
  int timeout_ms = timeout_s < 0 ? -1 : static_cast<int>(timeout_s * 1000.0);
  int rc;
  do {
    rc = ::poll(&p, 1, timeout_ms);
  } while (rc < 0 && errno == EINTR);
  if (rc < 0) throw_errno("poll");
  return rc;
}

void set_nonblocking(int fd, bool on) {
  int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0) throw_errno("fcntl");
  if (on) {
    flags |= O_NONBLOCK;
  } else {
    flags &= ~O_NONBLOCK;
  }
  if (::fcntl(fd, F_SETFL, flags) < 0) throw_errno("fcntl");
}

sockaddr_in make_addr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw NetError("invalid IPv4 address: " + ep.host);
  }
  return addr;
}

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= text.size()) {
    throw NetError("endpoint must be host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  unsigned long port = 0;
  try {
    port = std::stoul(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw NetError("invalid port in endpoint '" + text + "'");
  }
  if (port > 65535) throw NetError("port out of range in '" + text + "'");
  ep.port = static_cast<std::uint16_t>(port);
  return ep;
}

std::string Endpoint::str() const {
  return host + ":" + std::to_string(port);
}

Connection::Connection(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Connection::Connection(Connection&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), reader_(std::move(other.reader_)) {}

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = std::exchange(other.fd_, -1);
    reader_ = std::move(other.reader_);
  }
  return *this;
}

Connection::~Connection() { close(); }

void Connection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Connection Connection::dial(const Endpoint& ep, double timeout_s) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_errno("socket");
  Connection conn(fd);
  set_nonblocking(fd, true);
  sockaddr_in addr = make_addr(ep);
  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc < 0 && errno != EINPROGRESS) throw_errno("connect to " + ep.str());
  if (rc < 0) {
    if (poll_one(fd, POLLOUT, timeout_s) == 0) {
      throw NetError("connect to " + ep.str() + ": timed out");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    if (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) < 0 || err != 0) {
      throw NetError("connect to " + ep.str() + ": " + std::strerror(err));
    }
  }
  set_nonblocking(fd, false);
  return conn;
}

void Connection::send(const Frame& frame) {
  if (fd_ < 0) throw NetError("send on closed connection");
  std::vector<std::uint8_t> bytes = encode(frame);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent,
                       MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("send");
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<Frame> Connection::receive(double timeout_s) {
  if (fd_ < 0) throw NetError("receive on closed connection");
  if (auto frame = reader_.next()) return frame;
  for (;;) {
    if (poll_one(fd_, POLLIN, timeout_s) == 0) return std::nullopt;
    std::uint8_t chunk[16384];
    ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw_errno("recv");
    }
    if (n == 0) throw NetError("connection closed by peer");
    reader_.feed(chunk, static_cast<std::size_t>(n));
    if (auto frame = reader_.next()) return frame;
  }
}

Listener::Listener(const Endpoint& bind_ep) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw_errno("socket");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = make_addr(bind_ep);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
    int e = errno;
    ::close(fd_);
    fd_ = -1;
    errno = e;
    throw_errno("bind " + bind_ep.str());
  }
  if (::listen(fd_, 64) < 0) {
    int e = errno;
    ::close(fd_);
    fd_ = -1;
    errno = e;
    throw_errno("listen");
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len) < 0) {
    throw_errno("getsockname");
  }
  char host[INET_ADDRSTRLEN] = {};
  ::inet_ntop(AF_INET, &bound.sin_addr, host, sizeof(host));
  endpoint_.host = host;
  endpoint_.port = ntohs(bound.sin_port);
}

Listener::Listener(Listener&& other) noexcept
    : fd_(std::exchange(other.fd_, -1)), endpoint_(std::move(other.endpoint_)) {}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::optional<Connection> Listener::accept(double timeout_s) {
  if (fd_ < 0) throw NetError("accept on closed listener");
  if (poll_one(fd_, POLLIN, timeout_s) == 0) return std::nullopt;
  int client;
  do {
    client = ::accept(fd_, nullptr, nullptr);
  } while (client < 0 && errno == EINTR);
  if (client < 0) {
    if (errno == EBADF || errno == EINVAL) return std::nullopt;  // closing
    throw_errno("accept");
  }
  return Connection(client);
}

}  // namespace fogmq::broker
