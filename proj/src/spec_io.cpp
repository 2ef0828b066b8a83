#include "tlsfp/spec_io.hpp"

#include "json.hpp"

#include "tlsfp/util.hpp"

namespace tlsfp::spec_io {

using nlohmann::json;
using wire::ClientHelloSpec;
using wire::ExtensionTemplate;

namespace {

uint16_t require_u16(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_number_unsigned() || j[field].get<uint64_t>() > 0xffff)
    throw SpecFormatError(std::string("bad or missing 16-bit field: ") + field);
  return static_cast<uint16_t>(j[field].get<uint64_t>());
}

std::vector<uint16_t> u16_list(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array())
    throw SpecFormatError(std::string("expected array field: ") + field);
  std::vector<uint16_t> out;
  for (const auto& v : j[field]) {
    if (!v.is_number_unsigned() || v.get<uint64_t>() > 0xffff)
      throw SpecFormatError(std::string("non-16-bit entry in ") + field);
    out.push_back(static_cast<uint16_t>(v.get<uint64_t>()));
  }
  return out;
}

json payload_to_json(const ExtensionTemplate::Payload& payload) {
  using T = ExtensionTemplate;
  json j;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, T::Literal>) {
          j["type"] = "literal";
          j["data"] = util::to_hex(p.bytes);
        } else if constexpr (std::is_same_v<P, T::SupportedVersions>) {
          j["type"] = "supported_versions";
          j["versions"] = p.versions;
        } else if constexpr (std::is_same_v<P, T::KeyShare>) {
          j["type"] = "key_share";
          j["groups"] = p.groups;
        } else if constexpr (std::is_same_v<P, T::SniPlaceholder>) {
          j["type"] = "sni";
        } else if constexpr (std::is_same_v<P, T::Alpn>) {
          j["type"] = "alpn";
          j["protocols"] = p.protocols;
        } else if constexpr (std::is_same_v<P, T::SignatureAlgorithms>) {
          j["type"] = "signature_algorithms";
          j["algorithms"] = p.algorithms;
        } else if constexpr (std::is_same_v<P, T::SupportedGroups>) {
          j["type"] = "supported_groups";
          j["groups"] = p.groups;
        } else if constexpr (std::is_same_v<P, T::EcPointFormats>) {
          j["type"] = "ec_point_formats";
          j["formats"] = p.formats;
        } else if constexpr (std::is_same_v<P, T::Empty>) {
          j["type"] = "empty";
        }
      },
      payload);
  return j;
}

ExtensionTemplate::Payload payload_from_json(const json& j) {
  using T = ExtensionTemplate;
  if (!j.contains("type") || !j["type"].is_string())
    throw SpecFormatError("extension payload missing type");
  const std::string type = j["type"].get<std::string>();
  if (type == "literal") {
    if (!j.contains("data") || !j["data"].is_string())
      throw SpecFormatError("literal payload missing data");
    auto bytes = util::from_hex(j["data"].get<std::string>());
    if (!bytes) throw SpecFormatError("literal payload is not valid hex");
    return T::Literal{std::move(*bytes)};
  }
  if (type == "supported_versions") return T::SupportedVersions{u16_list(j, "versions")};
  if (type == "key_share") return T::KeyShare{u16_list(j, "groups")};
  if (type == "sni") return T::SniPlaceholder{};
  if (type == "alpn") {
    if (!j.contains("protocols") || !j["protocols"].is_array())
      throw SpecFormatError("alpn payload missing protocols");
    std::vector<std::string> protos;
    for (const auto& p : j["protocols"]) {
      if (!p.is_string()) throw SpecFormatError("alpn protocol must be a string");
      protos.push_back(p.get<std::string>());
    }
    return T::Alpn{std::move(protos)};
  }
  if (type == "signature_algorithms")
    return T::SignatureAlgorithms{u16_list(j, "algorithms")};
  if (type == "supported_groups") return T::SupportedGroups{u16_list(j, "groups")};
  if (type == "ec_point_formats") {
    if (!j.contains("formats") || !j["formats"].is_array())
      throw SpecFormatError("ec_point_formats payload missing formats");
    std::vector<uint8_t> formats;
    for (const auto& f : j["formats"]) {
      if (!f.is_number_unsigned() || f.get<uint64_t>() > 0xff)
        throw SpecFormatError("ec point format must be a byte");
      formats.push_back(static_cast<uint8_t>(f.get<uint64_t>()));
    }
    return T::EcPointFormats{std::move(formats)};
  }
  if (type == "empty") return T::Empty{};
  throw SpecFormatError("unknown extension payload type: " + type);
}

json spec_to_json(const ClientHelloSpec& spec) {
  json j;
  j["id"] = spec.id;
  j["legacy_version"] = spec.legacy_version;
  j["cipher_suites"] = spec.cipher_suites;
  j["compression_methods"] = spec.compression_methods;
  j["session_id"] =
      spec.session_id_policy == wire::SessionIdPolicy::Empty ? "empty" : "random-32";
  j["grease"] =
      spec.grease_policy == wire::GreasePolicy::FixedValues ? "fixed-values" : "none";
  json exts = json::array();
  for (const auto& tmpl : spec.extensions) {
    json e = payload_to_json(tmpl.payload);
    e["id"] = tmpl.ext_id;
    exts.push_back(std::move(e));
  }
  j["extensions"] = std::move(exts);
  return j;
}

ClientHelloSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw SpecFormatError("spec must be a JSON object");
  ClientHelloSpec spec;
  if (!j.contains("id") || !j["id"].is_string())
    throw SpecFormatError("spec missing string id");
  spec.id = j["id"].get<std::string>();
  spec.legacy_version = require_u16(j, "legacy_version");
  spec.cipher_suites = u16_list(j, "cipher_suites");
  spec.compression_methods.clear();
  if (!j.contains("compression_methods") || !j["compression_methods"].is_array())
    throw SpecFormatError("spec missing compression_methods");
  for (const auto& c : j["compression_methods"]) {
    if (!c.is_number_unsigned() || c.get<uint64_t>() > 0xff)
      throw SpecFormatError("compression method must be a byte");
    spec.compression_methods.push_back(static_cast<uint8_t>(c.get<uint64_t>()));
  }
  const std::string sid = j.value("session_id", "random-32");
  if (sid == "empty")
    spec.session_id_policy = wire::SessionIdPolicy::Empty;
  else if (sid == "random-32")
    spec.session_id_policy = wire::SessionIdPolicy::Random32;
  else
    throw SpecFormatError("unknown session_id policy: " + sid);
  const std::string grease = j.value("grease", "none");
  if (grease == "none")
    spec.grease_policy = wire::GreasePolicy::None;
  else if (grease == "fixed-values")
    spec.grease_policy = wire::GreasePolicy::FixedValues;
  else
    throw SpecFormatError("unknown grease policy: " + grease);
  if (!j.contains("extensions") || !j["extensions"].is_array())
    throw SpecFormatError("spec missing extensions array");
  for (const auto& e : j["extensions"]) {
    ExtensionTemplate tmpl;
    tmpl.ext_id = require_u16(e, "id");
    tmpl.payload = payload_from_json(e);
    spec.extensions.push_back(std::move(tmpl));
  }
  return spec;
}

}  // namespace

std::string pool_to_json_text(const std::vector<ClientHelloSpec>& pool) {
  json arr = json::array();
  for (const auto& spec : pool) arr.push_back(spec_to_json(spec));
  return arr.dump(2) + "\n";
}

std::vector<ClientHelloSpec> pool_from_json_text(const std::string& text) {
  json arr = json::parse(text, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    throw SpecFormatError("pool file is not a JSON array");
  std::vector<ClientHelloSpec> pool;
  for (const auto& j : arr) pool.push_back(spec_from_json(j));
  return pool;
}

std::vector<ClientHelloSpec> load_pool(const std::string& path) {
  return pool_from_json_text(util::read_file(path));
}

void save_pool(const std::string& path, const std::vector<ClientHelloSpec>& pool) {
  util::write_file(path, pool_to_json_text(pool));
}

}  // namespace tlsfp::spec_io
