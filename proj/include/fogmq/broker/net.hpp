#pragma once

#include <optional>
#include <string>

#include "fogmq/broker/wire.hpp"

namespace fogmq::broker {

class NetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// "host:port" pair; parse throws NetError on malformed input.
struct Endpoint {
  std::string host;
  std::uint16_t port = 0;

  static Endpoint parse(const std::string& text);
  std::string str() const;
  bool operator==(const Endpoint&) const = default;
};

/// Owning TCP connection with frame-oriented send/receive. Receive carries
/// an incremental FrameReader, so frames split across TCP segments
/// reassemble transparently. Movable, not copyable.
class Connection {
public:
  Connection() = default;
  explicit Connection(int fd);
  Connection(Connection&& other) noexcept;
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;
  ~Connection();

  static Connection dial(const Endpoint& ep, double timeout_s = 5.0);

  bool valid() const { return fd_ >= 0; }
  void close();

  /// Blocking full-frame send; throws NetError on a broken connection.
  void send(const Frame& frame);

  /// Blocks up to timeout_s for the next complete frame. Returns nullopt on
  /// timeout; throws NetError when the peer closed or the stream is corrupt.
  std::optional<Frame> receive(double timeout_s);

private:
  int fd_ = -1;
  FrameReader reader_;
};

/// Listening socket bound to 127.0.0.1 (port 0 picks an ephemeral port; the
/// bound endpoint is queryable). accept() blocks with a timeout so shutdown
/// loops can poll a stop flag.
class Listener {
public:
  explicit Listener(const Endpoint& bind_ep);
  Listener(Listener&& other) noexcept;
  Listener& operator=(Listener&&) = delete;
  Listener(const Listener&) = delete;
  ~Listener();

  const Endpoint& endpoint() const { return endpoint_; }
  std::optional<Connection> accept(double timeout_s);
  void close();

private:
  int fd_ = -1;
  Endpoint endpoint_;
};

}  // namespace fogmq::broker
