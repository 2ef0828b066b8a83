// Shared builders for tests: mainstream Client Hello specs and render
// contexts with fixed entropy.
#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "tlsfp/wire.hpp"

namespace testutil {

struct ProbeOptions {
  bool offer_tls13 = true;
  bool offer_tls12 = true;
  bool status_request = false;
  std::vector<std::string> alpn;
  std::vector<uint16_t> key_share_groups{29};
  std::vector<uint16_t> supported_groups{29, 23, 24};
  std::vector<uint16_t> ciphers{0x1301, 0x1302, 0x1303, 0xc02f, 0xc030, 0x009c};
};

// A Client Hello every mainstream stack can complete.
inline tlsfp::wire::ClientHelloSpec make_probe(const std::string& id,
                                               const ProbeOptions& opts = {}) {
  using namespace tlsfp::wire;
  ClientHelloSpec spec;
  spec.id = id;
  spec.legacy_version = 0x0303;
  spec.cipher_suites = opts.ciphers;
  spec.session_id_policy = SessionIdPolicy::Random32;

  spec.extensions.push_back({kExtServerName, ExtensionTemplate::SniPlaceholder{}});
  spec.extensions.push_back(
      {kExtSupportedGroups, ExtensionTemplate::SupportedGroups{opts.supported_groups}});
  spec.extensions.push_back(
      {kExtSignatureAlgorithms,
       ExtensionTemplate::SignatureAlgorithms{{0x0403, 0x0804, 0x0401, 0x0503,
                                               0x0805, 0x0501, 0x0806, 0x0601}}});
  if (opts.status_request)
    spec.extensions.push_back(
        {kExtStatusRequest,
         ExtensionTemplate::Literal{{0x01, 0x00, 0x00, 0x00, 0x00}}});
  if (!opts.alpn.empty())
    spec.extensions.push_back({kExtAlpn, ExtensionTemplate::Alpn{opts.alpn}});
  std::vector<uint16_t> versions;
  if (opts.offer_tls13) versions.push_back(0x0304);
  if (opts.offer_tls12) versions.push_back(0x0303);
  spec.extensions.push_back(
      {kExtSupportedVersions, ExtensionTemplate::SupportedVersions{versions}});
  spec.extensions.push_back(
      {kExtEcPointFormats, ExtensionTemplate::EcPointFormats{{0}}});
  if (opts.offer_tls13 && !opts.key_share_groups.empty())
    spec.extensions.push_back(
        {kExtKeyShare, ExtensionTemplate::KeyShare{opts.key_share_groups}});
  return spec;
}

// n probes with mildly varied offers, ids "p00".."pNN".
inline std::vector<tlsfp::wire::ClientHelloSpec> small_pool(size_t n) {
  std::vector<tlsfp::wire::ClientHelloSpec> pool;
  for (size_t i = 0; i < n; ++i) {
    ProbeOptions opts;
    opts.status_request = i % 2 == 1;
    if (i % 3 == 1) opts.alpn = {"h2", "http/1.1"};
    if (i % 4 == 3) opts.offer_tls12 = false;
    char id[24];
    std::snprintf(id, sizeof(id), "p%02zu", i);
    pool.push_back(make_probe(id, opts));
  }
  return pool;
}

// Deterministic render context covering every group a spec may name.
inline tlsfp::wire::RenderContext make_context(
    const tlsfp::wire::ClientHelloSpec& spec,
    const std::optional<std::string>& sni = std::nullopt) {
  tlsfp::wire::RenderContext ctx;
  ctx.sni = sni;
  for (size_t i = 0; i < 32; ++i) ctx.client_random[i] = static_cast<uint8_t>(i);
  ctx.session_id.assign(32, 0xab);
  for (uint16_t group : spec.key_share_groups()) {
    size_t len = 32;
    switch (group) {
      case 23: len = 65; break;
      case 24: len = 97; break;
      case 25: len = 133; break;
      case 29: len = 32; break;
      case 30: len = 56; break;
      default: len = 32 + (group % 7); break;
    }
    ctx.key_share_publics[group] =
        tlsfp::Bytes(len, static_cast<uint8_t>(group & 0xff));
  }
  return ctx;
}

}  // namespace testutil
