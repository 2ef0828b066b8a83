#include "tlsfp/feature.hpp"

#include <algorithm>

namespace tlsfp::feature {

const std::set<uint16_t>& ExtractionPolicy::default_whitelist() {
  static const std::set<uint16_t> ids = {1,  7,  8,  9,  10, 11, 13, 15, 16,
                                         19, 20, 24, 27, 28, 43, 47, 50, 51};
  return ids;
}

ExtractionPolicy ExtractionPolicy::raw() {
  ExtractionPolicy policy;
  policy.strip_extensions.clear();
  return policy;
}

namespace {

constexpr std::string_view kMarkerMalformed = "malformed";
constexpr std::string_view kMarkerUndecryptable = "undecryptable";
constexpr std::string_view kMarkerTimeout = "timeout";

std::string render_item(const FeatureItem& item) {
  switch (item.kind) {
    case FeatureItem::Kind::Bare:
      return std::to_string(item.id);
    case FeatureItem::Kind::Value:
      return std::to_string(item.id) + "." + util::base64_unpadded(item.value);
    case FeatureItem::Kind::Group:
      return std::to_string(item.id) + "." + std::to_string(item.group);
    case FeatureItem::Kind::Marker:
      return "!" + item.marker;
  }
  return {};
}

// Strict decimal: no sign, no leading zeros, fits uint16.
std::optional<uint16_t> parse_decimal_u16(std::string_view s) {
  if (s.empty() || s.size() > 5) return std::nullopt;
  if (s.size() > 1 && s[0] == '0') return std::nullopt;
  uint32_t value = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<uint32_t>(c - '0');
  }
  if (value > 0xffff) return std::nullopt;
  return static_cast<uint16_t>(value);
}

std::optional<FeatureItem> parse_item(std::string_view token, bool keyshare_group_only) {
  if (token.empty()) return std::nullopt;
  if (token[0] == '!') {
    if (token.size() < 2) return std::nullopt;
    return FeatureItem::as_marker(std::string(token.substr(1)));
  }
  size_t dot = token.find('.');
  if (dot == std::string_view::npos) {
    auto id = parse_decimal_u16(token);
    if (!id) return std::nullopt;
    return FeatureItem::bare(*id);
  }
  auto id = parse_decimal_u16(token.substr(0, dot));
  if (!id) return std::nullopt;
  std::string_view value_part = token.substr(dot + 1);
  if (*id == 51 && keyshare_group_only) {
    if (auto group = parse_decimal_u16(value_part)) {
      return FeatureItem::with_group(51, *group);
    }
    return std::nullopt;
  }
  auto raw = util::base64_decode_unpadded(value_part);
  if (!raw) return std::nullopt;
  return FeatureItem::with_value(*id, std::move(*raw));
}

std::string render_section(const std::vector<FeatureItem>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += '-';
    out += render_item(items[i]);
  }
  return out;
}

std::vector<std::string_view> split_on(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  size_t start = 0;
  while (true) {
    size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::string FeatureFields::render() const {
  std::string out;
  out += version ? std::to_string(*version) : std::string();
  out += '_';
  out += cipher ? std::to_string(*cipher) : std::string();
  for (const auto& section : sections) {
    out += '_';
    out += render_section(section);
  }
  out += '_';
  for (size_t i = 0; i < alerts.size(); ++i) {
    if (i > 0) out += '-';
    out += '<';
    out += std::to_string(alerts[i]);
  }
  return out;
}

std::optional<FeatureFields> FeatureFields::parse(std::string_view text,
                                                  bool keyshare_group_only) {
  auto parts = split_on(text, '_');
  if (parts.size() != 8) return std::nullopt;

  FeatureFields fields;
  if (!parts[0].empty()) {
    auto v = parse_decimal_u16(parts[0]);
    if (!v) return std::nullopt;
    fields.version = *v;
  }
  if (!parts[1].empty()) {
    auto c = parse_decimal_u16(parts[1]);
    if (!c) return std::nullopt;
    fields.cipher = *c;
  }
  for (size_t s = 0; s < 5; ++s) {
    std::string_view part = parts[2 + s];
    if (part.empty()) continue;
    for (std::string_view token : split_on(part, '-')) {
      auto item = parse_item(token, keyshare_group_only);
      if (!item) return std::nullopt;
      fields.sections[s].push_back(std::move(*item));
    }
  }
  std::string_view alert_part = parts[7];
  if (!alert_part.empty()) {
    for (std::string_view token : split_on(alert_part, '-')) {
      if (token.size() < 2 || token[0] != '<') return std::nullopt;
      auto code = parse_decimal_u16(token.substr(1));
      if (!code || *code > 0xff) return std::nullopt;
      fields.alerts.push_back(static_cast<uint8_t>(*code));
    }
  }
  return fields;
}

namespace {

void append_extension_items(std::vector<FeatureItem>& out,
                            const wire::ExtensionList& exts,
                            const ExtractionPolicy& policy) {
  for (const auto& [id, value] : exts) {
    if (policy.strip_extensions.count(id)) continue;
    if (id == wire::kExtKeyShare && policy.keyshare_group_only && value.size() >= 2) {
      uint16_t group = static_cast<uint16_t>(value[0]) << 8 | value[1];
      out.push_back(FeatureItem::with_group(id, group));
      continue;
    }
    if (policy.value_whitelist.count(id)) {
      out.push_back(FeatureItem::with_value(id, value));
    } else {
      out.push_back(FeatureItem::bare(id));
    }
  }
}

size_t section_index(wire::Section section) {
  switch (section) {
    case wire::Section::ServerHello: return kSecServerHello;
    case wire::Section::EncryptedExtensions: return kSecEncryptedExtensions;
    case wire::Section::CertificateRequest: return kSecCertificateRequest;
    case wire::Section::HelloRetryRequest: return kSecHelloRetryRequest;
    case wire::Section::Certificate: return kSecCertificate;
  }
  return kSecServerHello;
}

}  // namespace

FeatureString extract_features(const HandshakeObservation& obs,
                               const ExtractionPolicy& policy) {
  if (obs.outcome == Outcome::TransportError)
    throw RefusedTransportError("no features from a transport-level failure");

  FeatureFields fields;
  for (const auto& msg : obs.messages) {
    switch (msg.kind) {
      case wire::MsgKind::ServerHello:
        if (!fields.version) fields.version = msg.legacy_version;
        if (!fields.cipher) fields.cipher = msg.cipher;
        append_extension_items(fields.sections[kSecServerHello], msg.extensions,
                               policy);
        break;
      case wire::MsgKind::HelloRetryRequest:
        append_extension_items(fields.sections[kSecHelloRetryRequest], msg.extensions,
                               policy);
        break;
      case wire::MsgKind::EncryptedExtensions:
        append_extension_items(fields.sections[kSecEncryptedExtensions],
                               msg.extensions, policy);
        break;
      case wire::MsgKind::CertificateRequest:
        append_extension_items(fields.sections[kSecCertificateRequest],
                               msg.extensions, policy);
        break;
      case wire::MsgKind::Certificate:
        for (const auto& entry : msg.cert_entry_extensions)
          append_extension_items(fields.sections[kSecCertificate], entry, policy);
        break;
      case wire::MsgKind::Alert:
        break;  // mirrored into obs.alerts
      case wire::MsgKind::Other:
        break;  // not a feature source
      case wire::MsgKind::Malformed:
      case wire::MsgKind::Undecryptable:
      case wire::MsgKind::Timeout: {
        std::string_view token = msg.kind == wire::MsgKind::Malformed
                                     ? kMarkerMalformed
                                     : msg.kind == wire::MsgKind::Undecryptable
                                           ? kMarkerUndecryptable
                                           : kMarkerTimeout;
        size_t idx = msg.marker_section ? section_index(*msg.marker_section)
                                        : kSecServerHello;
        fields.sections[idx].push_back(FeatureItem::as_marker(std::string(token)));
        break;
      }
    }
  }
  for (const auto& [level, description] : obs.alerts) {
    (void)level;  // description only; level is not encoded
    fields.alerts.push_back(description);
  }

  FeatureString fs;
  fs.fields = std::move(fields);
  fs.text = fs.fields.render();
  return fs;
}

FeatureFields strip_ids(const FeatureFields& fields, const std::set<uint16_t>& ids) {
  FeatureFields out = fields;
  for (auto& section : out.sections) {
    std::erase_if(section, [&](const FeatureItem& item) {
      return item.kind != FeatureItem::Kind::Marker && ids.count(item.id) > 0;
    });
  }
  return out;
}

std::string strip_ids_text(const std::string& text, const std::set<uint16_t>& ids,
                           bool keyshare_group_only) {
  auto fields = FeatureFields::parse(text, keyshare_group_only);
  if (!fields) return text;
  return strip_ids(*fields, ids).render();
}

FeatureFields project_jarm(const FeatureFields& fields) {
  FeatureFields out;
  out.version = fields.version;
  out.cipher = fields.cipher;
  for (const FeatureItem& item : fields.sections[kSecServerHello]) {
    switch (item.kind) {
      case FeatureItem::Kind::Value:
        if (item.id == wire::kExtAlpn) {
          out.sections[kSecServerHello].push_back(item);
        } else {
          out.sections[kSecServerHello].push_back(FeatureItem::bare(item.id));
        }
        break;
      case FeatureItem::Kind::Group:
        out.sections[kSecServerHello].push_back(FeatureItem::bare(item.id));
        break;
      default:
        out.sections[kSecServerHello].push_back(item);
        break;
    }
  }
  return out;
}

std::string project_jarm_text(const std::string& text, bool keyshare_group_only) {
  auto fields = FeatureFields::parse(text, keyshare_group_only);
  if (!fields) return text;
  return project_jarm(*fields).render();
}

std::string ServerFingerprint::canonical_text() const {
  std::string out;
  for (const auto& [probe_id, feature] : entries) {
    if (!out.empty()) out += ';';
    out += probe_id;
    out += '=';
    out += feature;
  }
  return out;
}

ServerFingerprint assemble_fingerprint(
    const std::vector<std::string>& probe_ids,
    const std::vector<std::pair<std::string, std::optional<std::string>>>& features) {
  std::map<std::string, std::optional<std::string>> latest;
  for (const auto& [probe_id, feature] : features) latest[probe_id] = feature;

  ServerFingerprint fp;
  for (const auto& [probe_id, feature] : latest) {
    if (feature) fp.entries[probe_id] = *feature;
  }
  fp.complete = !probe_ids.empty();
  for (const std::string& probe_id : probe_ids) {
    auto it = latest.find(probe_id);
    if (it == latest.end() || !it->second) {
      fp.complete = false;
      break;
    }
  }
  return fp;
}

}  // namespace tlsfp::feature
