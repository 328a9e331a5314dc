#include "deepspark/protocol.hpp"

#include <bit>
#include <cmath>
#include <cstring>

namespace deepspark::wire {

void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

const uint8_t* ByteReader::need(size_t n) {
  if (buf_.size() - pos_ < n) throw ProtocolError(kErrBadFrame, "payload truncated");
  const uint8_t* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

uint16_t ByteReader::u16() {
  const uint8_t* p = need(2);
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

uint32_t ByteReader::u32() {
  const uint8_t* p = need(4);
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint64_t ByteReader::u64() {
  uint64_t v = 0;
  const uint8_t* p = need(8);
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::rest_as_string() {
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), buf_.size() - pos_);
  pos_ = buf_.size();
  return s;
}

std::vector<uint8_t> encode_frame(uint8_t msg_type, std::span<const uint8_t> payload) {
  if (payload.size() > kMaxPayload) throw ProtocolError(kErrBadFrame, "payload too large");
  std::vector<uint8_t> out;
  out.reserve(kHeaderSize + payload.size());
  put_u32(out, kMagic);
  out.push_back(kVersion);
  out.push_back(msg_type);
  put_u32(out, static_cast<uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Header decode_header(const uint8_t* b) {
  Header h;
  h.magic = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
            (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  h.version = b[4];
  h.msg_type = b[5];
  h.payload_len = static_cast<uint32_t>(b[6]) | (static_cast<uint32_t>(b[7]) << 8) |
                  (static_cast<uint32_t>(b[8]) << 16) | (static_cast<uint32_t>(b[9]) << 24);
  return h;
}

void check_header(const Header& h) {
  if (h.magic != kMagic) throw ProtocolError(kErrBadFrame, "bad magic");
  if (h.version != kVersion) throw ProtocolError(kErrBadFrame, "unsupported version");
  if (h.payload_len > kMaxPayload) throw ProtocolError(kErrBadFrame, "payload too large");
}

std::vector<uint8_t> build_config(const ConfigMsg& m) {
  std::vector<uint8_t> p;
  p.reserve(16);
  put_u32(p, m.param_dim);
  put_f32(p, m.alpha);
  put_u64(p, m.model_fingerprint);
  return p;
}

ConfigMsg parse_config(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  ConfigMsg m;
  m.param_dim = r.u32();
  m.alpha = r.f32();
  m.model_fingerprint = r.u64();
  if (r.remaining() != 0) throw ProtocolError(kErrBadFrame, "trailing bytes in CONFIG");
  return m;
}

std::vector<uint8_t> build_params(std::span<const float> values) {
  std::vector<uint8_t> p;
  p.reserve(4 + 4 * values.size());
  put_u32(p, static_cast<uint32_t>(values.size()));
  for (float v : values) put_f32(p, v);
  return p;
}

std::vector<float> parse_params(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  const uint32_t dim = r.u32();
  if (r.remaining() != static_cast<size_t>(dim) * 4) {
    throw ProtocolError(kErrBadFrame, "params payload length disagrees with dim");
  }
  std::vector<float> out(dim);
  for (uint32_t i = 0; i < dim; ++i) out[i] = r.f32();
  return out;
}

std::vector<uint8_t> build_stats(const StatsMsg& m) {
  std::vector<uint8_t> p;
  p.reserve(20);
  put_u64(p, m.exchange_count);
  put_u32(p, m.queue_depth);
  put_u64(p, m.uptime_ms);
  return p;
}

StatsMsg parse_stats(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  StatsMsg m;
  m.exchange_count = r.u64();
  m.queue_depth = r.u32();
  m.uptime_ms = r.u64();
  if (r.remaining() != 0) throw ProtocolError(kErrBadFrame, "trailing bytes in STATS_RESP");
  return m;
}

std::vector<uint8_t> build_error(uint16_t code, const std::string& message) {
  std::vector<uint8_t> p;
  p.reserve(2 + message.size());
  put_u16(p, code);
  p.insert(p.end(), message.begin(), message.end());
  return p;
}

ErrorMsg parse_error(std::span<const uint8_t> payload) {
  ByteReader r(payload);
  ErrorMsg m;
  m.code = r.u16();
  m.message = r.rest_as_string();
  return m;
}

}  // namespace deepspark::wire
