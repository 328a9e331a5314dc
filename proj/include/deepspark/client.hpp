#pragma once

#include "deepspark/net.hpp"
#include "deepspark/param_vector.hpp"

namespace deepspark {

// One persistent connection to the exchanger speaking the wire protocol.
// Server-sent ERROR frames surface as ProtocolError carrying the wire code;
// transport failures surface as NetError (callers may reconnect and retry).
class ExchangerClient {
 public:
  explicit ExchangerClient(const HostPort& addr, int timeout_ms = 10000);

  wire::ConfigMsg hello();
  ParamVector fetch_initial();
  ParamVector exchange(const ParamVector& worker);
  wire::StatsMsg stats();

  void close() { sock_.close(); }

 private:
  wire::Frame request(uint8_t type, std::span<const uint8_t> payload, uint8_t expected_reply);

  Socket sock_;
};

}  // namespace deepspark
