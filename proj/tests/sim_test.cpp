#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "tlsfp/feature.hpp"
#include "tlsfp/pipeline.hpp"
#include "tlsfp/sim.hpp"
#include "tlsfp/util.hpp"

using namespace tlsfp;
using sim::BehaviorModel;
using sim::ExtGen;
using sim::StatusRequestPolicy;

namespace {

// Mainstream 1.3 server answering every probe from testutil::make_probe.
BehaviorModel base_model(const std::string& id) {
  BehaviorModel m;
  m.behavior_id = id;
  m.supported_versions = {0x0304, 0x0303};
  m.cipher_preference = {0x1301, 0x1302, 0xc02f};
  m.group_preference = {29, 23};
  m.extension_order = {
      {wire::kExtSupportedVersions, ExtGen::Kind::SelectedVersion, {}},
      {wire::kExtKeyShare, ExtGen::Kind::KeyShare, {}},
      {wire::kExtServerName, ExtGen::Kind::Empty, {}},
  };
  m.cert_name = "host.sim.test";
  return m;
}

std::string feature_of(const HandshakeObservation& obs,
                       feature::ExtractionPolicy policy = {}) {
  return feature::extract_features(obs, policy).text;
}

const wire::ServerMessage* find_kind(const HandshakeObservation& obs,
                                     wire::MsgKind kind) {
  for (const auto& msg : obs.messages)
    if (msg.kind == kind) return &msg;
  return nullptr;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("identical triples produce identical observations") {
  auto model = base_model("det");
  auto spec = testutil::make_probe("p1");
  auto a = sim::respond(model, spec, 7, "host.sim.test");
  auto b = sim::respond(model, spec, 7, "host.sim.test");
  CHECK(a.outcome == b.outcome);
  CHECK(feature_of(a) == feature_of(b));
  CHECK(a.negotiated_version == b.negotiated_version);

  auto c = sim::respond(model, spec, 8, "host.sim.test");
  CHECK(feature_of(a) == feature_of(c));  // randoms differ, the feature does not
}

TEST_CASE("tls13 negotiation shape") {
  auto model = base_model("shape");
  auto spec = testutil::make_probe("p1");
  auto obs = sim::respond(model, spec, 1, "host.sim.test");

  REQUIRE(obs.outcome == Outcome::Completed);
  CHECK(obs.negotiated_version == 0x0304);

  const auto* sh = find_kind(obs, wire::MsgKind::ServerHello);
  REQUIRE(sh != nullptr);
  CHECK(sh->legacy_version == 0x0303);
  CHECK(sh->cipher == 0x1301);
  // ServerHello carries exactly the 1.3 negotiation extensions.
  std::set<uint16_t> sh_ids;
  for (const auto& [id, v] : sh->extensions) sh_ids.insert(id);
  CHECK(sh_ids == std::set<uint16_t>{wire::kExtSupportedVersions, wire::kExtKeyShare});

  const auto* ee = find_kind(obs, wire::MsgKind::EncryptedExtensions);
  REQUIRE(ee != nullptr);
  REQUIRE(ee->extensions.size() == 1);
  CHECK(ee->extensions[0].first == wire::kExtServerName);

  const auto* cert = find_kind(obs, wire::MsgKind::Certificate);
  REQUIRE(cert != nullptr);
  CHECK(cert->cert_chain.size() == 2);
  CHECK(cert->cert_entry_extensions.size() == cert->cert_chain.size());

  REQUIRE(obs.cert_validity.has_value());
  CHECK(obs.cert_validity->valid);
}

TEST_CASE("tls12 flight for legacy-only servers") {
  auto model = base_model("legacy");
  model.supported_versions = {0x0303};
  model.cipher_preference = {0xc02f};
  auto spec = testutil::make_probe("p1");
  auto obs = sim::respond(model, spec, 1, "host.sim.test");

  REQUIRE(obs.outcome == Outcome::Completed);
  CHECK(obs.negotiated_version == 0x0303);
  const auto* sh = find_kind(obs, wire::MsgKind::ServerHello);
  REQUIRE(sh != nullptr);
  CHECK(sh->legacy_version == 0x0303);
  CHECK(find_kind(obs, wire::MsgKind::EncryptedExtensions) == nullptr);

  // Ephemeral suite: ServerKeyExchange then ServerHelloDone, as plain
  // collected messages.
  bool saw_ske = false, saw_done = false;
  for (const auto& msg : obs.messages) {
    if (msg.kind != wire::MsgKind::Other) continue;
    saw_ske |= msg.type_code == wire::kHsServerKeyExchange;
    saw_done |= msg.type_code == wire::kHsServerHelloDone;
  }
  CHECK(saw_ske);
  CHECK(saw_done);

  const auto* cert = find_kind(obs, wire::MsgKind::Certificate);
  REQUIRE(cert != nullptr);
  CHECK(cert->cert_entry_extensions.empty());
}

TEST_CASE("old stacks accept 1.2 from the legacy version field alone") {
  auto model = base_model("pre-ext43");
  model.supported_versions = {0x0303};
  testutil::ProbeOptions po;
  po.offer_tls13 = false;  // supported_versions lists only 1.2
  auto with_ext = sim::respond(model, testutil::make_probe("a", po), 1, "h");
  CHECK(with_ext.negotiated_version == 0x0303);

  // No supported_versions extension at all: legacy_version admits 1.2.
  wire::ClientHelloSpec bare;
  bare.id = "bare";
  bare.legacy_version = 0x0303;
  bare.cipher_suites = {0x1301, 0xc02f};
  bare.session_id_policy = wire::SessionIdPolicy::Empty;
  auto obs = sim::respond(model, bare, 1, "h");
  CHECK(obs.outcome == Outcome::Completed);
  CHECK(obs.negotiated_version == 0x0303);
}

TEST_CASE("1.3 requires the extension, not just the legacy field") {
  auto model = base_model("strict13");
  model.supported_versions = {0x0304};
  model.alerts.no_version_overlap = 70;

  wire::ClientHelloSpec bare;
  bare.id = "bare";
  bare.legacy_version = 0x0304;  // nonstandard, still not an offer of 1.3
  bare.cipher_suites = {0x1301};
  bare.session_id_policy = wire::SessionIdPolicy::Empty;
  auto obs = sim::respond(model, bare, 1, "h");
  CHECK(obs.outcome == Outcome::AlertedOnly);
  REQUIRE(obs.alerts.size() == 1);
  CHECK(obs.alerts[0].second == 70);
  CHECK(feature_of(obs) == "_______<70");
}

TEST_CASE("alert precedence: version, cipher, sni, group") {
  auto spec13 = testutil::make_probe("p");

  testutil::ProbeOptions legacy_only;
  legacy_only.offer_tls13 = false;
  auto spec12 = testutil::make_probe("p12", legacy_only);

  auto no_version = base_model("a1");
  no_version.supported_versions = {0x0304};  // 1.3-only against a 1.2 offer
  no_version.cipher_preference = {0x9999};   // would also fail, version wins
  auto obs1 = sim::respond(no_version, spec12, 1, "h");
  CHECK(obs1.alerts.at(0).second == 70);

  auto no_cipher = base_model("a2");
  no_cipher.cipher_preference = {0x9999};
  auto obs2 = sim::respond(no_cipher, spec13, 1, "h");
  CHECK(obs2.alerts.at(0).second == 40);

  auto needs_sni = base_model("a3");
  needs_sni.alerts.require_sni = true;
  auto obs3 = sim::respond(needs_sni, spec13, 1, std::nullopt);
  CHECK(obs3.alerts.at(0).second == 112);
  CHECK(sim::respond(needs_sni, spec13, 1, "present").outcome == Outcome::Completed);

  auto no_group = base_model("a4");
  no_group.group_preference = {30};  // probe offers 29/23/24
  no_group.hrr_when_no_key_share = false;
  auto obs4 = sim::respond(no_group, spec13, 1, "h");
  CHECK(obs4.alerts.at(0).second == 40);
}

TEST_CASE("hello retry request when only the key share is missing") {
  auto model = base_model("hrr");
  model.group_preference = {23};  // probe shares x25519 but announces 23

  testutil::ProbeOptions po;
  po.key_share_groups = {29};
  po.supported_groups = {29, 23};
  auto obs = sim::respond(model, testutil::make_probe("p", po), 1, "h");

  REQUIRE(obs.outcome == Outcome::Completed);
  CHECK_FALSE(obs.negotiated_version.has_value());
  const auto* hrr = find_kind(obs, wire::MsgKind::HelloRetryRequest);
  REQUIRE(hrr != nullptr);
  bool group_named = false;
  for (const auto& [id, value] : hrr->extensions)
    if (id == wire::kExtKeyShare) {
      CHECK(value == Bytes{0x00, 0x17});
      group_named = true;
    }
  CHECK(group_named);

  // Feature lands in the HRR section.
  auto fs = feature::extract_features(obs, feature::ExtractionPolicy{});
  CHECK_FALSE(fs.fields.sections[feature::kSecHelloRetryRequest].empty());
  CHECK(fs.fields.sections[feature::kSecServerHello].empty());

  // Same model with hrr disabled alerts instead.
  model.hrr_when_no_key_share = false;
  auto alerted = sim::respond(model, testutil::make_probe("p", po), 1, "h");
  CHECK(alerted.outcome == Outcome::AlertedOnly);
}

TEST_CASE("status request policy gates extension emission") {
  auto model = base_model("status");
  model.extension_order.push_back({wire::kExtStatusRequest, ExtGen::Kind::Empty, {}});

  testutil::ProbeOptions with;
  with.status_request = true;
  auto offered = testutil::make_probe("with", with);
  auto not_offered = testutil::make_probe("without");

  auto has_ext5 = [](const HandshakeObservation& obs) {
    auto fs = feature::extract_features(obs, feature::ExtractionPolicy::raw());
    for (const auto& section : fs.fields.sections)
      for (const auto& item : section)
        if (item.kind != feature::FeatureItem::Kind::Marker && item.id == 5)
          return true;
    return false;
  };

  model.status_request = {StatusRequestPolicy::Mode::Never, 0.5};
  CHECK_FALSE(has_ext5(sim::respond(model, offered, 1, "h")));

  model.status_request = {StatusRequestPolicy::Mode::Always, 0.5};
  CHECK(has_ext5(sim::respond(model, offered, 1, "h")));
  CHECK_FALSE(has_ext5(sim::respond(model, not_offered, 1, "h")));

  model.status_request = {StatusRequestPolicy::Mode::Bernoulli, 0.5};
  std::set<bool> outcomes;
  for (uint64_t seed = 0; seed < 64; ++seed)
    outcomes.insert(has_ext5(sim::respond(model, offered, seed, "h")));
  CHECK(outcomes == std::set<bool>{false, true});

  // The default policy hides the difference entirely.
  auto on = sim::respond(model, offered, 3, "h");
  auto off = sim::respond(model, offered, 4, "h");
  if (has_ext5(on) != has_ext5(off))
    CHECK(feature_of(on) == feature_of(off));
}

TEST_CASE("alpn echo picks the first server protocol the client offers") {
  auto model = base_model("alpn");
  model.alpn_protocols = {"h2", "http/1.1"};
  model.extension_order.push_back({wire::kExtAlpn, ExtGen::Kind::AlpnEcho, {}});

  testutil::ProbeOptions po;
  po.alpn = {"http/1.1", "h2"};
  auto obs = sim::respond(model, testutil::make_probe("p", po), 1, "h");
  const auto* ee = find_kind(obs, wire::MsgKind::EncryptedExtensions);
  REQUIRE(ee != nullptr);
  bool found = false;
  for (const auto& [id, value] : ee->extensions) {
    if (id != wire::kExtAlpn) continue;
    found = true;
    // protocol list with the single name "h2": server preference decides.
    CHECK(value == Bytes{0x00, 0x03, 0x02, 'h', '2'});
  }
  CHECK(found);

  // No overlap: the extension is simply absent.
  testutil::ProbeOptions none;
  none.alpn = {"dot"};
  auto obs2 = sim::respond(model, testutil::make_probe("p", none), 1, "h");
  const auto* ee2 = find_kind(obs2, wire::MsgKind::EncryptedExtensions);
  REQUIRE(ee2 != nullptr);
  for (const auto& [id, value] : ee2->extensions) CHECK(id != wire::kExtAlpn);
}

TEST_CASE("silent models time out at the transport level") {
  auto model = base_model("dark");
  model.silent = true;
  auto obs = sim::respond(model, testutil::make_probe("p"), 1, "h");
  CHECK(obs.outcome == Outcome::TransportError);
  CHECK(obs.transport_error == TransportErrorKind::Timeout);
  CHECK(obs.messages.empty());
}

TEST_CASE("cert profiles map through to validity") {
  auto model = base_model("certs");
  auto spec = testutil::make_probe("p");

  model.cert_profile = certs::CertProfile::SelfSigned;
  auto obs = sim::respond(model, spec, 1, "host.sim.test");
  REQUIRE(obs.cert_validity.has_value());
  CHECK_FALSE(obs.cert_validity->valid);
  CHECK(obs.cert_validity->reason == certs::InvalidReason::UntrustedRoot);

  model.cert_profile = certs::CertProfile::Valid;
  auto wrong_name = sim::respond(model, spec, 1, "other.sim.test");
  REQUIRE(wrong_name.cert_validity.has_value());
  CHECK(wrong_name.cert_validity->reason == certs::InvalidReason::NameMismatch);
}

TEST_CASE("population generation respects the knobs") {
  sim::PopulationKnobs knobs;
  knobs.base_count = 10;
  knobs.alpn_only_pairs = 2;
  knobs.bernoulli_status = 3;
  knobs.c2_unique = 2;
  knobs.c2_cloned = 3;
  knobs.cdn_count = 2;
  knobs.cdn_size = 4;
  knobs.header_split = 2;
  knobs.silent_count = 1;

  auto population = sim::generate_population(knobs, 42);
  CHECK(population.size() == 10 + 4 + 3 + 2 + 3 + 8 + 2 + 1);

  size_t c2 = 0, cdn = 0, silent = 0, bernoulli = 0;
  std::set<std::string> ids;
  for (const auto& m : population) {
    ids.insert(m.behavior_id);
    if (m.labels.count("c2")) ++c2;
    if (m.labels.count("cdn")) ++cdn;
    if (m.silent) ++silent;
    if (m.status_request.mode == StatusRequestPolicy::Mode::Bernoulli) ++bernoulli;
  }
  CHECK(ids.size() == population.size());
  CHECK(c2 == 5);
  CHECK(cdn == 8);
  CHECK(silent == 1);
  CHECK(bernoulli >= 3);

  // Header-split servers share one TLS config and differ in the header only.
  std::vector<BehaviorModel> split;
  for (const auto& m : population)
    if (m.behavior_id.rfind("hdr-", 0) == 0) split.push_back(m);
  REQUIRE(split.size() == 2);
  CHECK(split[0].http_server_header != split[1].http_server_header);
  split[0].http_server_header = split[1].http_server_header;
  split[0].behavior_id = split[1].behavior_id;
  split[0].cert_name = split[1].cert_name;
  CHECK(split[0] == split[1]);

  // Deterministic per seed.
  auto again = sim::generate_population(knobs, 42);
  CHECK(population == again);
  auto other = sim::generate_population(knobs, 43);
  CHECK_FALSE(population == other);
}

TEST_CASE("alpn pair members differ only in their protocol list") {
  sim::PopulationKnobs knobs;
  knobs.base_count = 0;
  knobs.alpn_only_pairs = 1;
  knobs.include_tls12 = false;
  auto population = sim::generate_population(knobs, 7);
  REQUIRE(population.size() == 2);
  auto a = population[0];
  auto b = population[1];
  CHECK(a.alpn_protocols != b.alpn_protocols);
  a.alpn_protocols = b.alpn_protocols;
  a.behavior_id = b.behavior_id;
  a.cert_name = b.cert_name;
  CHECK(a == b);
}

TEST_CASE("population json round trip") {
  sim::PopulationKnobs knobs;
  knobs.base_count = 6;
  knobs.c2_unique = 1;
  knobs.cdn_count = 1;
  knobs.cdn_size = 2;
  knobs.bernoulli_status = 1;
  knobs.silent_count = 1;
  auto population = sim::generate_population(knobs, 9);

  auto text = sim::save_population(population);
  auto back = sim::load_population(text);
  CHECK(back == population);

  CHECK_THROWS_AS(sim::load_population("{}"), sim::PopulationFormatError);
  CHECK_THROWS_AS(sim::load_population("not json"), sim::PopulationFormatError);
}

TEST_CASE("network addressing and target list") {
  CHECK(sim::ip_for_index(0) == "10.0.0.0");
  CHECK(sim::ip_for_index(258) == "10.0.1.2");

  sim::PopulationKnobs knobs;
  knobs.base_count = 3;
  knobs.c2_unique = 1;
  auto population = sim::generate_population(knobs, 5);
  sim::SimNetwork network(population, 11);

  auto spec = testutil::make_probe("p");
  auto obs = network.probe("10.0.0.0", 443, population[0].cert_name, spec);
  CHECK(obs.outcome != Outcome::TransportError);

  auto missing = network.probe("192.0.2.99", 443, std::nullopt, spec);
  CHECK(missing.outcome == Outcome::TransportError);
  CHECK(missing.transport_error == TransportErrorKind::Refused);

  REQUIRE(network.model_for_ip("10.0.0.1") != nullptr);
  CHECK(network.model_for_ip("10.0.0.1")->behavior_id == population[1].behavior_id);
  CHECK(network.model_for_ip("nope") == nullptr);

  auto targets = pipeline::parse_targets_csv(network.targets_csv());
  REQUIRE(targets.size() == population.size());
  size_t blocklist = 0;
  for (const auto& t : targets) {
    CHECK_FALSE(t.ip.empty());
    if (t.source == "blocklist") {
      ++blocklist;
      CHECK(t.labels.count("c2") == 1);
    } else {
      CHECK(t.source == "toplist");
    }
  }
  CHECK(blocklist == 1);
}

TEST_CASE("network probes differ across run seeds only through coins") {
  auto model = base_model("coins");
  model.extension_order.push_back({wire::kExtStatusRequest, ExtGen::Kind::Empty, {}});
  model.status_request = {StatusRequestPolicy::Mode::Bernoulli, 0.5};

  testutil::ProbeOptions po;
  po.status_request = true;
  auto spec = testutil::make_probe("p", po);

  sim::SimNetwork net_a({model}, 1);
  sim::SimNetwork net_b({model}, 1);
  auto fa = feature_of(net_a.probe("10.0.0.0", 443, "h", spec),
                       feature::ExtractionPolicy::raw());
  auto fb = feature_of(net_b.probe("10.0.0.0", 443, "h", spec),
                       feature::ExtractionPolicy::raw());
  CHECK(fa == fb);  // same run seed, same coin
}

TEST_CASE("matrix construction marks silent cells absent") {
  auto live = base_model("live");
  auto dark = base_model("dark");
  dark.silent = true;
  std::vector<BehaviorModel> models{live, dark};
  std::vector<wire::ClientHelloSpec> probes{testutil::make_probe("p1"),
                                            testutil::make_probe("p2")};

  auto m = sim::build_matrix(models, probes, 3, feature::ExtractionPolicy{});
  REQUIRE(m.columns.size() == 2);
  REQUIRE(m.row_ids.size() == 2);
  CHECK(m.row_ids[0] == "live");
  CHECK(m.cells[0][0].has_value());
  CHECK_FALSE(m.cells[1][0].has_value());
  CHECK(m.row_complete(0));
  CHECK_FALSE(m.row_complete(1));

  auto again = sim::build_matrix(models, probes, 3, feature::ExtractionPolicy{});
  CHECK(m.cells == again.cells);
}

}  // TEST_SUITE
