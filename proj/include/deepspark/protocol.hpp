#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepspark/errors.hpp"

// Binary wire protocol between workers and the exchanger. All integers are
// little-endian; floats are IEEE-754 binary32 in little-endian byte order.
//
// Frame layout: magic u32, version u8, msg_type u8, payload_len u32, payload.
//
// Conversation:
//   HELLO        -> CONFIG (param_dim u32, alpha f32, model_fingerprint u64)
//   FETCH_INIT   -> INIT_PARAMS (dim u32, dim x f32)
//   EXCHANGE_REQ -> EXCHANGE_RESP (both: dim u32, dim x f32)
//   STATS_REQ    -> STATS_RESP (exchange_count u64, queue_depth u32, uptime_ms u64)
//   any request may instead get ERROR (code u16, utf-8 message).

namespace deepspark::wire {

constexpr uint32_t kMagic = 0x44535052;  // "DSPR"
constexpr uint8_t kVersion = 1;
constexpr size_t kHeaderSize = 10;

// Upper bound on payload_len we are willing to buffer (guards fuzzed or
// hostile headers; supports param vectors up to ~16M elements).
constexpr uint32_t kMaxPayload = 1u << 26;

enum MsgType : uint8_t {
  kHello = 0x01,
  kConfig = 0x02,
  kFetchInit = 0x03,
  kInitParams = 0x04,
  kExchangeReq = 0x05,
  kExchangeResp = 0x06,
  kStatsReq = 0x07,
  kStatsResp = 0x08,
  kError = 0x7F,
};

// Error frame codes. kErrBadFrame covers bad magic/version and any frame the
// receiver cannot parse (inconsistent lengths, unexpected type mid-dialogue).
enum ErrCode : uint16_t {
  kErrDimMismatch = 1,
  kErrNonFinite = 2,
  kErrBadFrame = 3,
  kErrShutdown = 4,
};

struct Header {
  uint32_t magic = 0;
  uint8_t version = 0;
  uint8_t msg_type = 0;
  uint32_t payload_len = 0;
};

struct Frame {
  uint8_t msg_type = 0;
  std::vector<uint8_t> payload;
};

struct ConfigMsg {
  uint32_t param_dim = 0;
  float alpha = 0.0f;
  uint64_t model_fingerprint = 0;
};

struct StatsMsg {
  uint64_t exchange_count = 0;
  uint32_t queue_depth = 0;
  uint64_t uptime_ms = 0;
};

struct ErrorMsg {
  uint16_t code = 0;
  std::string message;
};

// --- little-endian primitives ---------------------------------------------

void put_u16(std::vector<uint8_t>& out, uint16_t v);
void put_u32(std::vector<uint8_t>& out, uint32_t v);
void put_u64(std::vector<uint8_t>& out, uint64_t v);
void put_f32(std::vector<uint8_t>& out, float v);

// Bounds-checked sequential reader over a payload; any overrun throws
// ProtocolError(kErrBadFrame).
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> buf) : buf_(buf) {}

  uint16_t u16();
  uint32_t u32();
  uint64_t u64();
  float f32();
  std::string rest_as_string();
  size_t remaining() const { return buf_.size() - pos_; }

 private:
  const uint8_t* need(size_t n);

  std::span<const uint8_t> buf_;
  size_t pos_ = 0;
};

// --- framing ----------------------------------------------------------------

// Serializes header + payload into a single contiguous buffer.
std::vector<uint8_t> encode_frame(uint8_t msg_type, std::span<const uint8_t> payload);

// Reads the fixed-size header without validating it.
Header decode_header(const uint8_t* bytes10);

// Throws ProtocolError(kErrBadFrame) on wrong magic/version or an oversized
// payload length.
void check_header(const Header& h);

// --- payload codecs ---------------------------------------------------------

std::vector<uint8_t> build_config(const ConfigMsg& m);
ConfigMsg parse_config(std::span<const uint8_t> payload);

// dim u32 followed by dim f32 values; used by INIT_PARAMS / EXCHANGE_*.
std::vector<uint8_t> build_params(std::span<const float> values);
std::vector<float> parse_params(std::span<const uint8_t> payload);

std::vector<uint8_t> build_stats(const StatsMsg& m);
StatsMsg parse_stats(std::span<const uint8_t> payload);

std::vector<uint8_t> build_error(uint16_t code, const std::string& message);
ErrorMsg parse_error(std::span<const uint8_t> payload);

}  // namespace deepspark::wire
