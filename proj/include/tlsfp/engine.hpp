// Live probe execution: one TCP connection, one rendered Client Hello,
// server reaction collected into a HandshakeObservation. TLS 1.3 flights
// are decrypted with keys derived from the spec's ephemeral shares.
#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "tlsfp/certs.hpp"
#include "tlsfp/observation.hpp"
#include "tlsfp/wire.hpp"

namespace tlsfp::engine {

struct Endpoint {
  std::string ip;  // numeric IPv4/IPv6 literal
  uint16_t port = 443;
  std::optional<std::string> domain;
};

struct EngineConfig {
  std::chrono::milliseconds connect_timeout{3000};
  std::chrono::milliseconds read_timeout{5000};
  size_t max_transcript_bytes = 256 * 1024;
  bool complete_handshake = true;
  bool follow_hrr = false;
  bool fetch_http_header = false;
  const certs::TrustStore* trust_store = nullptr;
  std::string keylog_path;  // standard key-log lines appended when nonempty

  // Throws std::invalid_argument on nonpositive timeouts or a transcript
  // cap below 64 KiB.
  void validate() const;
};

// Never throws for network or protocol conditions: every failure mode is
// an outcome or an in-observation marker.
HandshakeObservation perform_handshake(const Endpoint& target,
                                       const wire::ClientHelloSpec& spec,
                                       const EngineConfig& config);

// Extracts the verbatim Server header value out of a raw HTTP response
// head, if present. Exposed for tests.
std::optional<std::string> parse_server_header(std::string_view response_head);

}  // namespace tlsfp::engine
