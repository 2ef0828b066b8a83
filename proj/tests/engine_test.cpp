#include <cstdio>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "testserver.hpp"
#include "tlsfp/engine.hpp"
#include "tlsfp/feature.hpp"
#include "tlsfp/util.hpp"

using namespace tlsfp;

namespace {

engine::EngineConfig quick_config() {
  engine::EngineConfig config;
  config.connect_timeout = std::chrono::milliseconds(2000);
  config.read_timeout = std::chrono::milliseconds(2000);
  return config;
}

const wire::ServerMessage* find_kind(const HandshakeObservation& obs,
                                     wire::MsgKind kind) {
  for (const auto& msg : obs.messages)
    if (msg.kind == kind) return &msg;
  return nullptr;
}

// Secret for a keylog label, independent of the client random formatting.
std::string keylog_secret(const std::vector<std::string>& lines,
                          const std::string& label) {
  for (const auto& line : lines) {
    if (line.rfind(label + " ", 0) != 0) continue;
    auto last = line.rfind(' ');
    if (last != std::string::npos) return line.substr(last + 1);
  }
  return {};
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("config validation") {
  engine::EngineConfig config;
  CHECK_NOTHROW(config.validate());
  config.connect_timeout = std::chrono::milliseconds(0);
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config = {};
  config.max_transcript_bytes = 1024;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("server header extraction") {
  CHECK(engine::parse_server_header(
            "HTTP/1.1 200 OK\r\nServer: nginx/1.2\r\nDate: x\r\n\r\n") == "nginx/1.2");
  CHECK(engine::parse_server_header("HTTP/1.1 200 OK\r\nSERVER:  padded \r\n\r\n") ==
        "padded");
  CHECK_FALSE(engine::parse_server_header("HTTP/1.1 200 OK\r\nDate: x\r\n\r\n")
                  .has_value());
  CHECK_FALSE(engine::parse_server_header("").has_value());
}

TEST_CASE("tls13 handshake against a live peer" * doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  opts.ciphersuites = "TLS_AES_256_GCM_SHA384:TLS_AES_128_GCM_SHA256";
  opts.alpn = {"h2", "http/1.1"};
  testsrv::TestServer server(opts);

  testutil::ProbeOptions po;
  po.alpn = {"h2"};
  po.status_request = true;
  auto spec = testutil::make_probe("live-13", po);

  engine::Endpoint target{"127.0.0.1", server.port(), "server.sim.test"};
  auto obs = engine::perform_handshake(target, spec, quick_config());

  CHECK(obs.outcome == Outcome::Completed);
  CHECK(obs.negotiated_version == 0x0304);

  const auto* sh = find_kind(obs, wire::MsgKind::ServerHello);
  REQUIRE(sh != nullptr);
  CHECK(sh->cipher == 0x1302);  // server-side preference wins

  const auto* ee = find_kind(obs, wire::MsgKind::EncryptedExtensions);
  REQUIRE(ee != nullptr);
  bool alpn_seen = false;
  for (const auto& [id, value] : ee->extensions)
    if (id == wire::kExtAlpn) alpn_seen = true;
  CHECK(alpn_seen);

  const auto* cert = find_kind(obs, wire::MsgKind::Certificate);
  REQUIRE(cert != nullptr);
  CHECK_FALSE(cert->cert_chain.empty());

  auto fs = feature::extract_features(obs, feature::ExtractionPolicy{});
  CHECK(fs.fields.version == 0x0303);  // legacy field on the wire
  CHECK(fs.fields.cipher == 0x1302);
}

TEST_CASE("certificate validity flows into the observation" * doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  opts.cert_name = "host.sim.test";
  testsrv::TestServer server(opts);

  certs::TrustStore trust;
  trust.add_der(certs::TestCa::builtin().ca_der());
  auto config = quick_config();
  config.trust_store = &trust;

  auto spec = testutil::make_probe("live-cert");
  engine::Endpoint target{"127.0.0.1", server.port(), "host.sim.test"};
  auto obs = engine::perform_handshake(target, spec, config);
  REQUIRE(obs.outcome == Outcome::Completed);
  REQUIRE(obs.cert_validity.has_value());
  CHECK(obs.cert_validity->valid);

  engine::Endpoint wrong{"127.0.0.1", server.port(), "wrong.sim.test"};
  auto obs2 = engine::perform_handshake(wrong, spec, config);
  REQUIRE(obs2.cert_validity.has_value());
  CHECK_FALSE(obs2.cert_validity->valid);
}

TEST_CASE("hello retry request is collected, not followed, by default" *
          doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  opts.groups = "P-256";  // client sends an x25519 share only
  testsrv::TestServer server(opts);

  testutil::ProbeOptions po;
  po.key_share_groups = {29};
  po.supported_groups = {29, 23};
  auto spec = testutil::make_probe("live-hrr", po);

  engine::Endpoint target{"127.0.0.1", server.port(), "server.sim.test"};
  auto obs = engine::perform_handshake(target, spec, quick_config());

  const auto* hrr = find_kind(obs, wire::MsgKind::HelloRetryRequest);
  REQUIRE(hrr != nullptr);
  CHECK_FALSE(obs.negotiated_version.has_value());
  CHECK(find_kind(obs, wire::MsgKind::EncryptedExtensions) == nullptr);

  auto fs = feature::extract_features(obs, feature::ExtractionPolicy{});
  CHECK_FALSE(fs.fields.sections[feature::kSecHelloRetryRequest].empty());
}

TEST_CASE("tls12 reactions are collected" * doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  opts.min_proto = TLS1_2_VERSION;
  opts.max_proto = TLS1_2_VERSION;
  opts.cipher_list = "ECDHE-RSA-AES128-GCM-SHA256";
  testsrv::TestServer server(opts);

  auto spec = testutil::make_probe("live-12");
  engine::Endpoint target{"127.0.0.1", server.port(), "server.sim.test"};
  auto obs = engine::perform_handshake(target, spec, quick_config());

  CHECK(obs.outcome == Outcome::Completed);
  CHECK(obs.negotiated_version == 0x0303);
  const auto* sh = find_kind(obs, wire::MsgKind::ServerHello);
  REQUIRE(sh != nullptr);
  CHECK(sh->cipher == 0xc02f);
  CHECK(find_kind(obs, wire::MsgKind::Certificate) != nullptr);
}

TEST_CASE("handshake secrets match the server's own key log" *
          doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  testsrv::TestServer server(opts);

  std::string keylog_path = "engine_test_keylog.txt";
  std::remove(keylog_path.c_str());
  auto config = quick_config();
  config.keylog_path = keylog_path;

  auto spec = testutil::make_probe("live-keylog");
  engine::Endpoint target{"127.0.0.1", server.port(), "server.sim.test"};
  auto obs = engine::perform_handshake(target, spec, config);
  REQUIRE(obs.outcome == Outcome::Completed);

  auto mine = util::split_lines(util::read_file(keylog_path));
  std::remove(keylog_path.c_str());
  auto theirs = server.keylog();
  REQUIRE_FALSE(mine.empty());
  REQUIRE_FALSE(theirs.empty());

  for (const char* label :
       {"SERVER_HANDSHAKE_TRAFFIC_SECRET", "CLIENT_HANDSHAKE_TRAFFIC_SECRET"}) {
    auto ours = keylog_secret(mine, label);
    auto independent = keylog_secret(theirs, label);
    CAPTURE(label);
    REQUIRE_FALSE(ours.empty());
    CHECK(ours == independent);
  }
}

TEST_CASE("http server header fetch" * doctest::timeout(30)) {
  testsrv::ServerOptions opts;
  opts.answer_http = true;
  opts.http_server = "unit-test/9";
  opts.alpn = {"http/1.1"};
  testsrv::TestServer server(opts);

  testutil::ProbeOptions po;
  po.alpn = {"http/1.1"};
  auto spec = testutil::make_probe("live-http", po);
  auto config = quick_config();
  config.fetch_http_header = true;

  engine::Endpoint target{"127.0.0.1", server.port(), "server.sim.test"};
  auto obs = engine::perform_handshake(target, spec, config);
  REQUIRE(obs.outcome == Outcome::Completed);
  CHECK(obs.http_server_header == "unit-test/9");
}

TEST_CASE("transport failures map to outcomes" * doctest::timeout(30)) {
  auto spec = testutil::make_probe("live-fail");

  // Nothing listens on this port: either an RST (refused) or, under
  // sandboxed network stacks, an unreachable/other classification.
  engine::Endpoint refused{"127.0.0.1", 1, std::nullopt};
  auto obs = engine::perform_handshake(refused, spec, quick_config());
  CHECK(obs.outcome == Outcome::TransportError);
  CHECK(obs.messages.empty());

  testsrv::ServerOptions opts;
  opts.accept_only = true;
  testsrv::TestServer server(opts);
  auto config = quick_config();
  config.read_timeout = std::chrono::milliseconds(300);
  engine::Endpoint silent{"127.0.0.1", server.port(), std::nullopt};
  auto obs2 = engine::perform_handshake(silent, spec, config);
  CHECK(obs2.outcome == Outcome::TransportError);
  CHECK(obs2.transport_error == TransportErrorKind::Timeout);
}

}  // TEST_SUITE
