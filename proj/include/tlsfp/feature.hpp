// Canonical feature encoding: observation -> FeatureString, per-server
// fingerprint assembly, and the coarser unencrypted-data projection.
#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/observation.hpp"
#include "tlsfp/util.hpp"

namespace tlsfp::feature {

struct RefusedTransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExtractionPolicy {
  // Extension ids whose raw values become part of the feature text.
  std::set<uint16_t> value_whitelist = default_whitelist();
  // Extension ids removed entirely; wins over the whitelist.
  std::set<uint16_t> strip_extensions = {5};
  // Collapse the key-share value to the selected group.
  bool keyshare_group_only = true;

  static const std::set<uint16_t>& default_whitelist();
  // No stripping. Stored scan records use this so any stricter policy can
  // be applied later as a pure string transform.
  static ExtractionPolicy raw();
};

struct FeatureItem {
  enum class Kind { Bare, Value, Group, Marker };
  Kind kind = Kind::Bare;
  uint16_t id = 0;
  Bytes value;         // Kind::Value
  uint16_t group = 0;  // Kind::Group
  std::string marker;  // Kind::Marker, token text without the '!' prefix

  bool operator==(const FeatureItem&) const = default;

  static FeatureItem bare(uint16_t id) { return {Kind::Bare, id, {}, 0, {}}; }
  static FeatureItem with_value(uint16_t id, Bytes v) {
    return {Kind::Value, id, std::move(v), 0, {}};
  }
  static FeatureItem with_group(uint16_t id, uint16_t g) {
    return {Kind::Group, id, {}, g, {}};
  }
  static FeatureItem as_marker(std::string token) {
    return {Kind::Marker, 0, {}, 0, std::move(token)};
  }
};

// Section indices of the canonical layout.
inline constexpr size_t kSecServerHello = 0;
inline constexpr size_t kSecEncryptedExtensions = 1;
inline constexpr size_t kSecCertificateRequest = 2;
inline constexpr size_t kSecHelloRetryRequest = 3;
inline constexpr size_t kSecCertificate = 4;

struct FeatureFields {
  std::optional<uint16_t> version;
  std::optional<uint16_t> cipher;
  std::array<std::vector<FeatureItem>, 5> sections;
  std::vector<uint8_t> alerts;  // descriptions, arrival order

  bool operator==(const FeatureFields&) const = default;

  // Canonical text: version _ cipher _ sh _ ee _ cr _ hrr _ cert _ alerts.
  std::string render() const;

  // Inverse of render. keyshare_group_only picks how an id-51 value part
  // is read back (decimal group vs raw base64), mirroring the policy that
  // produced the text.
  static std::optional<FeatureFields> parse(std::string_view text,
                                            bool keyshare_group_only = true);
};

struct FeatureString {
  std::string text;
  FeatureFields fields;

  bool operator==(const FeatureString& other) const { return text == other.text; }
};

// Throws RefusedTransportError when obs.outcome is TransportError.
FeatureString extract_features(const HandshakeObservation& obs,
                               const ExtractionPolicy& policy);

// Drops every non-marker item whose id is in `ids`. Equivalent to having
// extracted with those ids in strip_extensions.
FeatureFields strip_ids(const FeatureFields& fields, const std::set<uint16_t>& ids);
std::string strip_ids_text(const std::string& text, const std::set<uint16_t>& ids,
                           bool keyshare_group_only = true);

// Keeps version, cipher and the ServerHello section; inside it, drops every
// extension value except ALPN's. Idempotent.
FeatureFields project_jarm(const FeatureFields& fields);
std::string project_jarm_text(const std::string& text,
                              bool keyshare_group_only = true);

struct ServerFingerprint {
  std::map<std::string, std::string> entries;  // probe_id -> feature text
  bool complete = false;

  // "probe=feature;probe=feature" in probe_id order.
  std::string canonical_text() const;

  bool operator==(const ServerFingerprint& other) const {
    return entries == other.entries;
  }
};

// features: (probe_id, feature text or nullopt for transport error), later
// entries replacing earlier ones. complete=true iff every id in probe_ids
// ends up with a feature.
ServerFingerprint assemble_fingerprint(
    const std::vector<std::string>& probe_ids,
    const std::vector<std::pair<std::string, std::optional<std::string>>>& features);

}  // namespace tlsfp::feature
