#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fogmq::broker {

inline constexpr std::uint8_t kWireVersion = 1;

enum class FrameType : std::uint8_t {
  kRegister = 1,
  kRegisterAck = 2,
  kPublish = 3,
  kSubscribe = 4,
  kPush = 5,
  kGossip = 6,
  kProbe = 7,
  kProbeAck = 8,
  kMigrateBegin = 9,
  kState = 10,
  kMigrateCommit = 11,
  kMigrateAbort = 12,
};

bool is_known_frame_type(std::uint8_t t);

class WireError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One protocol unit: {version:u8, type:u8, length:u32 big-endian, payload}.
/// Payloads are JSON documents except where noted; the codec itself is
/// payload-agnostic.
struct Frame {
  FrameType type = FrameType::kProbe;
  std::vector<std::uint8_t> payload;

  bool operator==(const Frame&) const = default;
};

inline constexpr std::size_t kHeaderSize = 6;
inline constexpr std::size_t kMaxPayload = 16 * 1024 * 1024;

std::vector<std::uint8_t> encode(const Frame& frame);

/// Incremental decoder for a byte stream. Feed arbitrary chunks; complete
/// frames come out in order. Throws WireError on a bad version, unknown type,
/// or oversized length (the stream is unrecoverable at that point).
class FrameReader {
public:
  void feed(const std::uint8_t* data, std::size_t size);
  std::optional<Frame> next();

private:
  std::vector<std::uint8_t> buffer_;
  std::size_t cursor_ = 0;
};

/// JSON payload helpers; encode_json produces compact UTF-8.
Frame make_frame(FrameType type, const nlohmann::json& payload);
nlohmann::json payload_json(const Frame& frame);

}  // namespace fogmq::broker
