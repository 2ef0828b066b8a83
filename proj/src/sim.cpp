#include "tlsfp/sim.hpp"

#include <algorithm>
#include <cstdio>

#include "json.hpp"

namespace tlsfp::sim {

using nlohmann::json;

namespace {

size_t group_public_len(uint16_t group) {
  switch (group) {
    case 23: return 65;
    case 24: return 97;
    case 25: return 133;
    case 29: return 32;
    case 30: return 56;
    case 256: return 256;
    case 257: return 384;
    case 258: return 512;
    case 259: return 768;
    case 260: return 1024;
    default: return 32;
  }
}

Bytes random_bytes(util::Rng& rng, size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<uint8_t>(rng.next());
  return out;
}

const wire::ExtensionList::value_type* find_ext(const wire::ExtensionList& exts,
                                                uint16_t id) {
  for (const auto& e : exts)
    if (e.first == id) return &e;
  return nullptr;
}

// supported_versions offer: u8 list length, then 2-byte versions.
std::vector<uint16_t> parse_version_list(const Bytes& value) {
  std::vector<uint16_t> out;
  if (value.empty()) return out;
  size_t len = value[0];
  if (len + 1 > value.size() || len % 2 != 0) return out;
  for (size_t i = 1; i + 1 < 1 + len; i += 2)
    out.push_back(static_cast<uint16_t>(value[i]) << 8 | value[i + 1]);
  return out;
}

std::vector<uint16_t> parse_u16_block(const Bytes& value) {
  std::vector<uint16_t> out;
  if (value.size() < 2) return out;
  size_t len = static_cast<size_t>(value[0]) << 8 | value[1];
  if (len + 2 > value.size() || len % 2 != 0) return out;
  for (size_t i = 2; i + 1 < 2 + len; i += 2)
    out.push_back(static_cast<uint16_t>(value[i]) << 8 | value[i + 1]);
  return out;
}

// key_share offer: u16 list length, then (group u16, len u16, bytes) entries.
std::vector<uint16_t> parse_key_share_groups(const Bytes& value) {
  std::vector<uint16_t> out;
  if (value.size() < 2) return out;
  size_t end = 2 + (static_cast<size_t>(value[0]) << 8 | value[1]);
  if (end > value.size()) return out;
  size_t i = 2;
  while (i + 4 <= end) {
    uint16_t group = static_cast<uint16_t>(value[i]) << 8 | value[i + 1];
    size_t len = static_cast<size_t>(value[i + 2]) << 8 | value[i + 3];
    if (i + 4 + len > end) break;
    out.push_back(group);
    i += 4 + len;
  }
  return out;
}

std::vector<std::string> parse_alpn_list(const Bytes& value) {
  std::vector<std::string> out;
  if (value.size() < 2) return out;
  size_t end = 2 + (static_cast<size_t>(value[0]) << 8 | value[1]);
  if (end > value.size()) return out;
  size_t i = 2;
  while (i < end) {
    size_t len = value[i];
    if (i + 1 + len > end) break;
    out.emplace_back(value.begin() + i + 1, value.begin() + i + 1 + len);
    i += 1 + len;
  }
  return out;
}

Bytes alpn_value(const std::string& protocol) {
  Bytes out;
  uint16_t total = static_cast<uint16_t>(1 + protocol.size());
  out.push_back(static_cast<uint8_t>(total >> 8));
  out.push_back(static_cast<uint8_t>(total));
  out.push_back(static_cast<uint8_t>(protocol.size()));
  out.insert(out.end(), protocol.begin(), protocol.end());
  return out;
}

bool is_tls13_suite(uint16_t cipher) { return (cipher >> 8) == 0x13; }

bool is_ephemeral_suite(uint16_t cipher) {
  uint8_t hi = static_cast<uint8_t>(cipher >> 8);
  if (hi == 0xc0 || hi == 0xcc) return true;
  switch (cipher) {
    case 0x0033: case 0x0039: case 0x0067: case 0x006b:
    case 0x009e: case 0x009f:
      return true;
    default:
      return false;
  }
}

const certs::TrustStore& builtin_store() {
  static certs::TrustStore store = [] {
    certs::TrustStore s;
    s.add_der(certs::TestCa::builtin().ca_der());
    return s;
  }();
  return store;
}

HandshakeObservation base_observation(const wire::ClientHelloSpec& spec,
                                      const std::optional<std::string>& sni) {
  HandshakeObservation obs;
  obs.probe_id = spec.id;
  obs.port = 443;
  obs.domain = sni;
  return obs;
}

HandshakeObservation alert_observation(const wire::ClientHelloSpec& spec,
                                       const std::optional<std::string>& sni,
                                       uint8_t description) {
  HandshakeObservation obs = base_observation(spec, sni);
  obs.outcome = Outcome::AlertedOnly;
  obs.messages.push_back(wire::ServerMessage::alert(2, description));
  obs.alerts.emplace_back(2, description);
  return obs;
}

std::optional<uint16_t> negotiate_version(const BehaviorModel& model,
                                          const wire::ParsedClientHello& ch) {
  std::vector<uint16_t> offered;
  bool has_ext43 = false;
  if (const auto* ext = find_ext(ch.extensions, wire::kExtSupportedVersions)) {
    has_ext43 = true;
    offered = parse_version_list(ext->second);
  }
  for (uint16_t v : model.supported_versions) {
    bool in_ext = std::find(offered.begin(), offered.end(), v) != offered.end();
    if (v >= 0x0304) {
      if (in_ext) return v;
    } else if (in_ext || (!has_ext43 && ch.legacy_version >= v) ||
               (has_ext43 && ch.legacy_version >= v)) {
      // Stacks predating the extension fall back to legacy_version even
      // when the client sent one.
      return v;
    }
  }
  return std::nullopt;
}

}  // namespace

HandshakeObservation respond(const BehaviorModel& model,
                             const wire::ClientHelloSpec& spec, uint64_t seed,
                             const std::optional<std::string>& sni) {
  if (model.silent) {
    HandshakeObservation obs = base_observation(spec, sni);
    obs.outcome = Outcome::TransportError;
    obs.transport_error = TransportErrorKind::Timeout;
    return obs;
  }

  util::Rng rng(util::derive_seed(seed, "sim-respond"));

  wire::RenderContext ctx;
  ctx.sni = sni;
  for (size_t i = 0; i < 32; ++i)
    ctx.client_random[i] = static_cast<uint8_t>(rng.next());
  ctx.session_id = random_bytes(rng, 32);
  for (uint16_t group : spec.key_share_groups())
    ctx.key_share_publics[group] = random_bytes(rng, group_public_len(group));

  Bytes ch_bytes = wire::encode_client_hello(spec, ctx);
  auto parsed = wire::parse_client_hello(ch_bytes);
  if (!parsed) throw std::logic_error("client hello failed to round-trip");

  auto version = negotiate_version(model, *parsed);
  if (!version)
    return alert_observation(spec, sni, model.alerts.no_version_overlap);
  bool tls13 = *version >= 0x0304;

  uint16_t cipher = 0;
  bool have_cipher = false;
  for (uint16_t c : model.cipher_preference) {
    if (is_tls13_suite(c) != tls13) continue;
    if (std::find(parsed->cipher_suites.begin(), parsed->cipher_suites.end(), c) !=
        parsed->cipher_suites.end()) {
      cipher = c;
      have_cipher = true;
      break;
    }
  }
  if (!have_cipher)
    return alert_observation(spec, sni, model.alerts.no_cipher_overlap);

  if (model.alerts.require_sni && !find_ext(parsed->extensions, wire::kExtServerName))
    return alert_observation(spec, sni, model.alerts.missing_sni);

  uint16_t selected_group = 0;
  if (tls13) {
    std::vector<uint16_t> shared_groups;
    if (const auto* ks = find_ext(parsed->extensions, wire::kExtKeyShare))
      shared_groups = parse_key_share_groups(ks->second);
    std::vector<uint16_t> announced;
    if (const auto* sg = find_ext(parsed->extensions, wire::kExtSupportedGroups))
      announced = parse_u16_block(sg->second);

    bool have_share = false;
    for (uint16_t g : model.group_preference) {
      if (std::find(shared_groups.begin(), shared_groups.end(), g) !=
          shared_groups.end()) {
        selected_group = g;
        have_share = true;
        break;
      }
    }
    if (!have_share) {
      uint16_t retry_group = 0;
      for (uint16_t g : model.group_preference) {
        if (std::find(announced.begin(), announced.end(), g) != announced.end()) {
          retry_group = g;
          break;
        }
      }
      if (model.hrr_when_no_key_share && retry_group != 0) {
        HandshakeObservation obs = base_observation(spec, sni);
        obs.outcome = Outcome::Completed;
        wire::ServerMessage hrr;
        hrr.kind = wire::MsgKind::HelloRetryRequest;
        hrr.type_code = wire::kHsServerHello;
        hrr.legacy_version = 0x0303;
        hrr.random = wire::kHelloRetryRequestRandom;
        hrr.cipher = cipher;
        hrr.extensions.emplace_back(wire::kExtSupportedVersions, Bytes{0x03, 0x04});
        hrr.extensions.emplace_back(
            wire::kExtKeyShare,
            Bytes{static_cast<uint8_t>(retry_group >> 8),
                  static_cast<uint8_t>(retry_group)});
        obs.messages.push_back(std::move(hrr));
        return obs;
      }
      return alert_observation(spec, sni, model.alerts.no_group_overlap);
    }
  }

  bool client_offered_status =
      find_ext(parsed->extensions, wire::kExtStatusRequest) != nullptr;
  bool send_status = false;
  switch (model.status_request.mode) {
    case StatusRequestPolicy::Mode::Never:
      break;
    case StatusRequestPolicy::Mode::Always:
      send_status = client_offered_status;
      break;
    case StatusRequestPolicy::Mode::Bernoulli:
      send_status = client_offered_status && rng.chance(model.status_request.p);
      break;
  }

  wire::ExtensionList sh_exts;
  wire::ExtensionList ee_exts;
  for (const auto& gen : model.extension_order) {
    switch (gen.kind) {
      case ExtGen::Kind::SelectedVersion:
        if (tls13) sh_exts.emplace_back(gen.ext_id, Bytes{0x03, 0x04});
        break;
      case ExtGen::Kind::KeyShare: {
        if (!tls13) break;
        Bytes pub = random_bytes(rng, group_public_len(selected_group));
        Bytes value{static_cast<uint8_t>(selected_group >> 8),
                    static_cast<uint8_t>(selected_group),
                    static_cast<uint8_t>(pub.size() >> 8),
                    static_cast<uint8_t>(pub.size())};
        value.insert(value.end(), pub.begin(), pub.end());
        sh_exts.emplace_back(gen.ext_id, std::move(value));
        break;
      }
      case ExtGen::Kind::AlpnEcho: {
        const auto* offer = find_ext(parsed->extensions, wire::kExtAlpn);
        if (!offer) break;
        auto offered = parse_alpn_list(offer->second);
        for (const auto& proto : model.alpn_protocols) {
          if (std::find(offered.begin(), offered.end(), proto) != offered.end()) {
            auto& list = tls13 ? ee_exts : sh_exts;
            list.emplace_back(gen.ext_id, alpn_value(proto));
            break;
          }
        }
        break;
      }
      case ExtGen::Kind::Empty:
      case ExtGen::Kind::Fixed: {
        if (gen.ext_id == wire::kExtStatusRequest && !send_status) break;
        Bytes value = gen.kind == ExtGen::Kind::Fixed ? gen.fixed : Bytes{};
        auto& list = tls13 ? ee_exts : sh_exts;
        list.emplace_back(gen.ext_id, std::move(value));
        break;
      }
    }
  }

  HandshakeObservation obs = base_observation(spec, sni);
  obs.outcome = Outcome::Completed;
  obs.negotiated_version = *version;

  wire::ServerMessage sh;
  sh.kind = wire::MsgKind::ServerHello;
  sh.type_code = wire::kHsServerHello;
  sh.legacy_version = tls13 ? 0x0303 : *version;
  for (size_t i = 0; i < 32; ++i)
    sh.random[i] = static_cast<uint8_t>(rng.next());
  sh.cipher = cipher;
  sh.extensions = std::move(sh_exts);
  obs.messages.push_back(std::move(sh));

  auto chain = certs::TestCa::builtin().issue_chain(model.cert_name, model.cert_profile);

  if (tls13) {
    wire::ServerMessage ee;
    ee.kind = wire::MsgKind::EncryptedExtensions;
    ee.type_code = wire::kHsEncryptedExtensions;
    ee.extensions = std::move(ee_exts);
    obs.messages.push_back(std::move(ee));

    if (model.request_client_cert) {
      wire::ServerMessage cr;
      cr.kind = wire::MsgKind::CertificateRequest;
      cr.type_code = wire::kHsCertificateRequest;
      cr.extensions.emplace_back(wire::kExtSignatureAlgorithms,
                                 Bytes{0x00, 0x06, 0x04, 0x03, 0x08, 0x04, 0x04, 0x01});
      obs.messages.push_back(std::move(cr));
    }

    wire::ServerMessage cert;
    cert.kind = wire::MsgKind::Certificate;
    cert.type_code = wire::kHsCertificate;
    cert.cert_chain = chain;
    cert.cert_entry_extensions.assign(chain.size(), {});
    obs.messages.push_back(std::move(cert));

    wire::ServerMessage cv;
    cv.kind = wire::MsgKind::Other;
    cv.type_code = wire::kHsCertificateVerify;
    obs.messages.push_back(std::move(cv));
  } else {
    wire::ServerMessage cert;
    cert.kind = wire::MsgKind::Certificate;
    cert.type_code = wire::kHsCertificate;
    cert.cert_chain = chain;
    obs.messages.push_back(std::move(cert));

    if (is_ephemeral_suite(cipher)) {
      wire::ServerMessage ske;
      ske.kind = wire::MsgKind::Other;
      ske.type_code = wire::kHsServerKeyExchange;
      obs.messages.push_back(std::move(ske));
    }
    if (model.request_client_cert) {
      wire::ServerMessage cr;
      cr.kind = wire::MsgKind::CertificateRequest;
      cr.type_code = wire::kHsCertificateRequest;
      obs.messages.push_back(std::move(cr));
    }
    wire::ServerMessage done;
    done.kind = wire::MsgKind::Other;
    done.type_code = wire::kHsServerHelloDone;
    obs.messages.push_back(std::move(done));
  }

  obs.cert_validity = certs::verify_certificate_chain(
      chain, sni.value_or(""), builtin_store());
  obs.http_server_header = model.http_server_header;
  return obs;
}

// --- population generation ----------------------------------------------

namespace {

std::vector<ExtGen> standard_extension_order(util::Rng& rng, bool with_alpn,
                                             bool with_status, bool with_reneg) {
  std::vector<ExtGen> order;
  order.push_back({wire::kExtSupportedVersions, ExtGen::Kind::SelectedVersion, {}});
  order.push_back({wire::kExtKeyShare, ExtGen::Kind::KeyShare, {}});
  if (with_alpn) order.push_back({wire::kExtAlpn, ExtGen::Kind::AlpnEcho, {}});
  if (with_status) order.push_back({wire::kExtStatusRequest, ExtGen::Kind::Empty, {}});
  if (with_reneg) order.push_back({65281, ExtGen::Kind::Fixed, Bytes{0x00}});
  if (rng.chance(0.3))
    order.push_back({wire::kExtEcPointFormats, ExtGen::Kind::Fixed, Bytes{0x01, 0x00}});
  rng.shuffle(order);
  return order;
}

std::string two_digit_name(const char* prefix, size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03zu", prefix, i);
  return buf;
}

BehaviorModel organic_model(util::Rng& rng, size_t index, bool include_tls12) {
  BehaviorModel m;
  m.behavior_id = two_digit_name("base-", index);
  m.cert_name = m.behavior_id + ".sim.test";

  uint32_t version_shape = rng.below(include_tls12 ? 4 : 2);
  switch (version_shape) {
    case 0: m.supported_versions = {0x0304, 0x0303, 0x0302, 0x0301}; break;
    case 1: m.supported_versions = {0x0304}; break;
    case 2: m.supported_versions = {0x0304, 0x0303}; break;
    default: m.supported_versions = {0x0303, 0x0302}; break;
  }

  std::vector<uint16_t> tls13_suites{0x1301, 0x1302, 0x1303};
  rng.shuffle(tls13_suites);
  tls13_suites.resize(1 + rng.below(3));
  std::vector<uint16_t> legacy_suites{0xc02b, 0xc02c, 0xc02f, 0xc030,
                                      0xcca8, 0x009c, 0x002f, 0x0035};
  rng.shuffle(legacy_suites);
  legacy_suites.resize(2 + rng.below(4));
  m.cipher_preference = tls13_suites;
  m.cipher_preference.insert(m.cipher_preference.end(), legacy_suites.begin(),
                             legacy_suites.end());

  std::vector<uint16_t> groups{29, 23, 24, 30};
  rng.shuffle(groups);
  groups.resize(1 + rng.below(3));
  m.group_preference = groups;

  uint32_t alpn_shape = rng.below(3);
  if (alpn_shape == 0) m.alpn_protocols = {"h2", "http/1.1"};
  if (alpn_shape == 1) m.alpn_protocols = {"http/1.1"};

  m.extension_order = standard_extension_order(
      rng, !m.alpn_protocols.empty(), rng.chance(0.4), rng.chance(0.5));
  if (rng.chance(0.4))
    m.status_request = {StatusRequestPolicy::Mode::Always, 0.5};

  m.alerts.no_version_overlap = rng.chance(0.7) ? 70 : 40;
  m.alerts.require_sni = rng.chance(0.15);
  m.hrr_when_no_key_share = rng.chance(0.7);
  m.request_client_cert = rng.chance(0.1);

  uint32_t cert_shape = rng.below(10);
  if (cert_shape == 0) m.cert_profile = certs::CertProfile::SelfSigned;
  else if (cert_shape == 1) m.cert_profile = certs::CertProfile::Expired;
  else m.cert_profile = certs::CertProfile::Valid;

  static const std::vector<std::optional<std::string>> headers{
      std::nullopt, "nginx", "Apache/2.4.54 (Ubuntu)",
      "Microsoft-IIS/10.0", "envoy", "openresty"};
  m.http_server_header = headers[rng.below(static_cast<uint32_t>(headers.size()))];
  return m;
}

BehaviorModel c2_model(util::Rng& rng, const std::string& id) {
  BehaviorModel m;
  m.behavior_id = id;
  m.cert_name = id + ".sim.test";
  m.labels["c2"] = "planted";
  m.supported_versions = rng.chance(0.5) ? std::vector<uint16_t>{0x0304, 0x0303}
                                         : std::vector<uint16_t>{0x0303};
  std::vector<uint16_t> suites{0x1301, 0x1303, 0xc02f, 0xc030, 0xcca8, 0x009c};
  rng.shuffle(suites);
  suites.resize(2 + rng.below(3));
  m.cipher_preference = suites;
  m.group_preference = {rng.chance(0.5) ? uint16_t{29} : uint16_t{23}};
  m.extension_order = standard_extension_order(rng, false, false, rng.chance(0.5));
  m.alerts.no_version_overlap = 40;
  m.hrr_when_no_key_share = false;
  m.cert_profile = rng.chance(0.7) ? certs::CertProfile::SelfSigned
                                   : certs::CertProfile::NameMismatch;
  m.http_server_header = std::nullopt;
  return m;
}

}  // namespace

std::vector<BehaviorModel> generate_population(const PopulationKnobs& knobs,
                                               uint64_t seed) {
  util::Rng rng(util::derive_seed(seed, "population"));
  std::vector<BehaviorModel> out;

  for (size_t i = 0; i < knobs.base_count; ++i)
    out.push_back(organic_model(rng, i, knobs.include_tls12));

  for (size_t i = 0; i < knobs.alpn_only_pairs; ++i) {
    BehaviorModel a = organic_model(rng, 1000 + i, false);
    a.behavior_id = two_digit_name("alpn-a", i);
    a.cert_name = a.behavior_id + ".sim.test";
    a.alpn_protocols = {"h2", "http/1.1"};
    bool has_alpn = false;
    for (const auto& gen : a.extension_order)
      has_alpn |= gen.kind == ExtGen::Kind::AlpnEcho;
    if (!has_alpn)
      a.extension_order.push_back({wire::kExtAlpn, ExtGen::Kind::AlpnEcho, {}});
    BehaviorModel b = a;
    b.behavior_id = two_digit_name("alpn-b", i);
    b.cert_name = b.behavior_id + ".sim.test";
    b.alpn_protocols = {"http/1.1"};
    out.push_back(std::move(a));
    out.push_back(std::move(b));
  }

  for (size_t i = 0; i < knobs.bernoulli_status; ++i) {
    BehaviorModel m = organic_model(rng, 2000 + i, false);
    m.behavior_id = two_digit_name("flip-", i);
    m.cert_name = m.behavior_id + ".sim.test";
    m.status_request = {StatusRequestPolicy::Mode::Bernoulli, knobs.bernoulli_p};
    bool has_status = false;
    for (const auto& gen : m.extension_order)
      has_status |= gen.ext_id == wire::kExtStatusRequest;
    if (!has_status)
      m.extension_order.push_back({wire::kExtStatusRequest, ExtGen::Kind::Empty, {}});
    out.push_back(std::move(m));
  }

  for (size_t i = 0; i < knobs.c2_unique; ++i)
    out.push_back(c2_model(rng, two_digit_name("c2u-", i)));

  if (knobs.c2_cloned > 0) {
    BehaviorModel proto = c2_model(rng, "c2c-000");
    for (size_t i = 0; i < knobs.c2_cloned; ++i) {
      BehaviorModel clone = proto;
      clone.behavior_id = two_digit_name("c2c-", i);
      clone.cert_name = clone.behavior_id + ".sim.test";
      out.push_back(std::move(clone));
    }
  }

  for (size_t g = 0; g < knobs.cdn_count; ++g) {
    BehaviorModel proto = organic_model(rng, 4000 + g, false);
    static const char* cdn_names[] = {"alpha-cdn", "beta-cdn", "gamma-cdn",
                                      "delta-cdn"};
    const char* cdn = cdn_names[g % 4];
    proto.cert_profile = certs::CertProfile::Valid;
    proto.http_server_header = cdn;
    proto.labels.clear();
    proto.labels["cdn"] = cdn;
    for (size_t i = 0; i < knobs.cdn_size; ++i) {
      BehaviorModel node = proto;
      node.behavior_id = two_digit_name((std::string(cdn) + "-").c_str(), i);
      node.cert_name = node.behavior_id + ".sim.test";
      out.push_back(std::move(node));
    }
  }

  if (knobs.header_split > 0) {
    BehaviorModel proto = organic_model(rng, 3000, false);  // one shared config
    proto.labels.clear();
    static const char* split_headers[] = {"nginx", "Apache/2.4.54 (Ubuntu)",
                                          "openresty", "Caddy"};
    for (size_t i = 0; i < knobs.header_split; ++i) {
      BehaviorModel m = proto;
      m.behavior_id = two_digit_name("hdr-", i);
      m.cert_name = m.behavior_id + ".sim.test";
      m.http_server_header = split_headers[i % 4];
      out.push_back(std::move(m));
    }
  }

  for (size_t i = 0; i < knobs.silent_count; ++i) {
    BehaviorModel m;
    m.behavior_id = two_digit_name("dark-", i);
    m.cert_name = m.behavior_id + ".sim.test";
    m.silent = true;
    out.push_back(std::move(m));
  }

  return out;
}

// --- serialization --------------------------------------------------------

namespace {

std::string ext_kind_name(ExtGen::Kind kind) {
  switch (kind) {
    case ExtGen::Kind::Empty: return "empty";
    case ExtGen::Kind::Fixed: return "fixed";
    case ExtGen::Kind::AlpnEcho: return "alpn_echo";
    case ExtGen::Kind::KeyShare: return "key_share";
    case ExtGen::Kind::SelectedVersion: return "selected_version";
  }
  return "empty";
}

ExtGen::Kind ext_kind_from(const std::string& name) {
  if (name == "empty") return ExtGen::Kind::Empty;
  if (name == "fixed") return ExtGen::Kind::Fixed;
  if (name == "alpn_echo") return ExtGen::Kind::AlpnEcho;
  if (name == "key_share") return ExtGen::Kind::KeyShare;
  if (name == "selected_version") return ExtGen::Kind::SelectedVersion;
  throw PopulationFormatError("unknown extension generator kind: " + name);
}

std::string status_mode_name(StatusRequestPolicy::Mode mode) {
  switch (mode) {
    case StatusRequestPolicy::Mode::Never: return "never";
    case StatusRequestPolicy::Mode::Always: return "always";
    case StatusRequestPolicy::Mode::Bernoulli: return "bernoulli";
  }
  return "never";
}

StatusRequestPolicy::Mode status_mode_from(const std::string& name) {
  if (name == "never") return StatusRequestPolicy::Mode::Never;
  if (name == "always") return StatusRequestPolicy::Mode::Always;
  if (name == "bernoulli") return StatusRequestPolicy::Mode::Bernoulli;
  throw PopulationFormatError("unknown status_request mode: " + name);
}

json model_to_json(const BehaviorModel& m) {
  json j;
  j["behavior_id"] = m.behavior_id;
  j["supported_versions"] = m.supported_versions;
  j["cipher_preference"] = m.cipher_preference;
  json exts = json::array();
  for (const auto& gen : m.extension_order) {
    json e;
    e["ext_id"] = gen.ext_id;
    e["kind"] = ext_kind_name(gen.kind);
    if (gen.kind == ExtGen::Kind::Fixed) e["value"] = util::to_hex(gen.fixed);
    exts.push_back(std::move(e));
  }
  j["extension_order"] = std::move(exts);
  j["group_preference"] = m.group_preference;
  j["alpn_protocols"] = m.alpn_protocols;
  j["alerts"] = {{"no_version_overlap", m.alerts.no_version_overlap},
                 {"no_cipher_overlap", m.alerts.no_cipher_overlap},
                 {"no_group_overlap", m.alerts.no_group_overlap},
                 {"missing_sni", m.alerts.missing_sni},
                 {"require_sni", m.alerts.require_sni}};
  j["status_request"] = {{"mode", status_mode_name(m.status_request.mode)},
                         {"p", m.status_request.p}};
  j["hrr_when_no_key_share"] = m.hrr_when_no_key_share;
  j["request_client_cert"] = m.request_client_cert;
  j["cert_profile"] = certs::cert_profile_name(m.cert_profile);
  j["cert_name"] = m.cert_name;
  if (m.http_server_header) j["http_server_header"] = *m.http_server_header;
  j["silent"] = m.silent;
  j["labels"] = json::object();
  for (const auto& [key, value] : m.labels) j["labels"][key] = value;
  return j;
}

BehaviorModel model_from_json(const json& j) {
  try {
    BehaviorModel m;
    m.behavior_id = j.at("behavior_id").get<std::string>();
    m.supported_versions = j.at("supported_versions").get<std::vector<uint16_t>>();
    m.cipher_preference = j.at("cipher_preference").get<std::vector<uint16_t>>();
    m.extension_order.clear();
    for (const auto& e : j.at("extension_order")) {
      ExtGen gen;
      gen.ext_id = e.at("ext_id").get<uint16_t>();
      gen.kind = ext_kind_from(e.at("kind").get<std::string>());
      if (e.contains("value")) {
        auto bytes = util::from_hex(e["value"].get<std::string>());
        if (!bytes) throw PopulationFormatError("bad hex in extension value");
        gen.fixed = std::move(*bytes);
      }
      m.extension_order.push_back(std::move(gen));
    }
    m.group_preference = j.at("group_preference").get<std::vector<uint16_t>>();
    m.alpn_protocols = j.at("alpn_protocols").get<std::vector<std::string>>();
    const auto& a = j.at("alerts");
    m.alerts.no_version_overlap = a.at("no_version_overlap").get<uint8_t>();
    m.alerts.no_cipher_overlap = a.at("no_cipher_overlap").get<uint8_t>();
    m.alerts.no_group_overlap = a.at("no_group_overlap").get<uint8_t>();
    m.alerts.missing_sni = a.at("missing_sni").get<uint8_t>();
    m.alerts.require_sni = a.at("require_sni").get<bool>();
    const auto& s = j.at("status_request");
    m.status_request.mode = status_mode_from(s.at("mode").get<std::string>());
    m.status_request.p = s.at("p").get<double>();
    m.hrr_when_no_key_share = j.at("hrr_when_no_key_share").get<bool>();
    m.request_client_cert = j.at("request_client_cert").get<bool>();
    auto profile = certs::cert_profile_from_name(
        j.at("cert_profile").get<std::string>());
    if (!profile) throw PopulationFormatError("unknown cert profile");
    m.cert_profile = *profile;
    m.cert_name = j.at("cert_name").get<std::string>();
    if (j.contains("http_server_header"))
      m.http_server_header = j["http_server_header"].get<std::string>();
    m.silent = j.at("silent").get<bool>();
    for (const auto& [key, value] : j.at("labels").items())
      m.labels[key] = value.get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw PopulationFormatError(std::string("bad behavior model: ") + e.what());
  }
}

}  // namespace

std::string save_population(const std::vector<BehaviorModel>& models) {
  json j = json::array();
  for (const auto& m : models) j.push_back(model_to_json(m));
  return json{{"behaviors", std::move(j)}}.dump(2) + "\n";
}

std::vector<BehaviorModel> load_population(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw PopulationFormatError(std::string("population is not JSON: ") + e.what());
  }
  if (!j.contains("behaviors") || !j["behaviors"].is_array())
    throw PopulationFormatError("population file lacks a 'behaviors' array");
  std::vector<BehaviorModel> out;
  for (const auto& item : j["behaviors"]) out.push_back(model_from_json(item));
  return out;
}

// --- network facade --------------------------------------------------------

std::string ip_for_index(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "10.%zu.%zu.%zu", (index >> 16) & 255,
                (index >> 8) & 255, index & 255);
  return buf;
}

SimNetwork::SimNetwork(std::vector<BehaviorModel> models, uint64_t run_seed)
    : models_(std::move(models)), run_seed_(run_seed) {
  for (size_t i = 0; i < models_.size(); ++i) by_ip_[ip_for_index(i)] = i;
}

const BehaviorModel* SimNetwork::model_for_ip(const std::string& ip) const {
  auto it = by_ip_.find(ip);
  return it == by_ip_.end() ? nullptr : &models_[it->second];
}

HandshakeObservation SimNetwork::probe(const std::string& ip, uint16_t port,
                                       const std::optional<std::string>& domain,
                                       const wire::ClientHelloSpec& spec) const {
  const BehaviorModel* model = model_for_ip(ip);
  HandshakeObservation obs;
  if (!model) {
    obs.probe_id = spec.id;
    obs.ip = ip;
    obs.port = port;
    obs.domain = domain;
    obs.outcome = Outcome::TransportError;
    obs.transport_error = TransportErrorKind::Refused;
    return obs;
  }
  uint64_t seed = util::derive_seed(run_seed_, model->behavior_id, spec.id);
  obs = respond(*model, spec, seed, domain);
  obs.ip = ip;
  obs.port = port;
  return obs;
}

std::string SimNetwork::targets_csv() const {
  std::string out = "ip,port,domain,source\n";
  for (size_t i = 0; i < models_.size(); ++i) {
    const BehaviorModel& m = models_[i];
    std::vector<std::string> row{ip_for_index(i), "443", m.cert_name,
                                 m.labels.count("c2") ? "blocklist" : "toplist"};
    for (const auto& [key, value] : m.labels) row.push_back(key + "=" + value);
    out += util::csv_join(row);
    out += '\n';
  }
  return out;
}

forge::ResponseMatrix build_matrix(const std::vector<BehaviorModel>& models,
                                   const std::vector<wire::ClientHelloSpec>& probes,
                                   uint64_t seed,
                                   const feature::ExtractionPolicy& policy) {
  forge::ResponseMatrix matrix;
  for (const auto& probe : probes) matrix.columns.push_back(probe.id);
  for (const auto& model : models) {
    matrix.row_ids.push_back(model.behavior_id);
    std::vector<std::optional<std::string>> row;
    for (const auto& probe : probes) {
      uint64_t cell_seed = util::derive_seed(seed, model.behavior_id, probe.id);
      HandshakeObservation obs = respond(model, probe, cell_seed, model.cert_name);
      if (obs.outcome == Outcome::TransportError) {
        row.push_back(std::nullopt);
      } else {
        row.push_back(feature::extract_features(obs, policy).text);
      }
    }
    matrix.cells.push_back(std::move(row));
  }
  return matrix;
}

}  // namespace tlsfp::sim
