#include "deepspark/client.hpp"

#include "deepspark/errors.hpp"

namespace deepspark {

ExchangerClient::ExchangerClient(const HostPort& addr, int timeout_ms)
    : sock_(tcp_connect(addr, timeout_ms)) {}

wire::Frame ExchangerClient::request(uint8_t type, std::span<const uint8_t> payload,
                                     uint8_t expected_reply) {
  write_frame(sock_, type, payload);
  std::optional<wire::Frame> reply = read_frame(sock_);
  if (!reply) throw NetError("exchanger closed the connection");
  if (reply->msg_type == wire::kError) {
    const wire::ErrorMsg e = wire::parse_error(reply->payload);
    throw ProtocolError(e.code, "exchanger error " + std::to_string(e.code) + ": " + e.message);
  }
  if (reply->msg_type != expected_reply) {
    throw ProtocolError(wire::kErrBadFrame,
                        "unexpected reply type " + std::to_string(reply->msg_type));
  }
  return std::move(*reply);
}

wire::ConfigMsg ExchangerClient::hello() {
  return wire::parse_config(request(wire::kHello, {}, wire::kConfig).payload);
}

ParamVector ExchangerClient::fetch_initial() {
  return wire::parse_params(request(wire::kFetchInit, {}, wire::kInitParams).payload);
}

ParamVector ExchangerClient::exchange(const ParamVector& worker) {
  const std::vector<uint8_t> payload = wire::build_params(worker);
  return wire::parse_params(request(wire::kExchangeReq, payload, wire::kExchangeResp).payload);
}

wire::StatsMsg ExchangerClient::stats() {
  return wire::parse_stats(request(wire::kStatsReq, {}, wire::kStatsResp).payload);
}

}  // namespace deepspark
