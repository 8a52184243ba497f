#include "fogmq/broker/wire.hpp"

#include <cstring>

#include <nlohmann/json.hpp>

namespace fogmq::broker {

bool is_known_frame_type(std::uint8_t t) {
  return t >= 1 && t <= 12;
}

std::vector<std::uint8_t> encode(const Frame& frame) {
  if (frame.payload.size() > kMaxPayload) {
    throw WireError("frame payload exceeds maximum size");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderSize + frame.payload.size());
  out.push_back(kWireVersion);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  std::uint32_t len = static_cast<std::uint32_t>(frame.payload.size());
  out.push_back(static_cast<std::uint8_t>(len >> 24));
  out.push_back(static_cast<std::uint8_t>(len >> 16));
  out.push_back(static_cast<std::uint8_t>(len >> 8));
  out.push_back(static_cast<std::uint8_t>(len));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

void FrameReader::feed(const std::uint8_t* data, std::size_t size) {
  // Reclaim consumed prefix lazily so feed() stays amortized O(size).
  if (cursor_ > 0 && cursor_ >= buffer_.size() / 2) {
    buffer_.erase(buffer_.begin(),
                  buffer_.begin() + static_cast<std::ptrdiff_t>(cursor_));
    cursor_ = 0;
  }
  buffer_.insert(buffer_.end(), data, data + size);
}

std::optional<Frame> FrameReader::next() {
  if (buffer_.size() - cursor_ < kHeaderSize) return std::nullopt;
  const std::uint8_t* h = buffer_.data() + cursor_;
  if (h[0] != kWireVersion) {
    throw WireError("unsupported wire version " + std::to_string(h[0]));
  }
  if (!is_known_frame_type(h[1])) {
    throw WireError("unknown frame type " + std::to_string(h[1]));
  }
  std::uint32_t len = (std::uint32_t{h[2]} << 24) | (std::uint32_t{h[3]} << 16) |
                      (std::uint32_t{h[4]} << 8) | std::uint32_t{h[5]};
  if (len > kMaxPayload) {
    throw WireError("frame payload exceeds maximum size");
  }
  if (buffer_.size() - cursor_ < kHeaderSize + len) return std::nullopt;
  Frame frame;
  frame.type = static_cast<FrameType>(h[1]);
  frame.payload.assign(h + kHeaderSize, h + kHeaderSize + len);
  cursor_ += kHeaderSize + len;
  return frame;
}

Frame make_frame(FrameType type, const nlohmann::json& payload) {
  Frame frame;
  frame.type = type;
  std::string text = payload.dump();
  frame.payload.assign(text.begin(), text.end());
  return frame;
}

nlohmann::json payload_json(const Frame& frame) {
  try {
    return nlohmann::json::parse(frame.payload.begin(), frame.payload.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw WireError(std::string("malformed JSON payload: ") + e.what());
  }
}

}  // namespace fogmq::broker
