// The observation record shared by the live engine and the simulator:
// one probe against one endpoint, with everything the server sent back.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlsfp/certs.hpp"
#include "tlsfp/wire.hpp"

namespace tlsfp {

enum class Outcome { Completed, AlertedOnly, TransportError };

enum class TransportErrorKind { Refused, Reset, Timeout, Unreachable, Other };

std::string_view outcome_name(Outcome outcome);
std::string_view transport_error_name(TransportErrorKind kind);
std::optional<Outcome> outcome_from_name(std::string_view name);
std::optional<TransportErrorKind> transport_error_from_name(std::string_view name);

struct HandshakeObservation {
  std::string probe_id;
  std::string ip;
  uint16_t port = 0;
  std::optional<std::string> domain;

  Outcome outcome = Outcome::TransportError;
  TransportErrorKind transport_error = TransportErrorKind::Other;

  // outcome = TransportError ⇒ messages and alerts stay empty.
  std::vector<wire::ServerMessage> messages;
  std::vector<std::pair<uint8_t, uint8_t>> alerts;  // (level, description)

  std::optional<uint16_t> negotiated_version;
  std::optional<certs::CertValidity> cert_validity;
  std::optional<std::string> http_server_header;
  int64_t timestamp_ms = 0;
};

}  // namespace tlsfp
