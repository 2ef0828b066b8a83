#include "tlsfp/wire.hpp"

#include <algorithm>
#include <cstring>

namespace tlsfp::wire {

namespace {

void put_u8(Bytes& out, uint8_t v) { out.push_back(v); }
void put_u16(Bytes& out, uint16_t v) {
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}
void put_u24(Bytes& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}
void put_bytes(Bytes& out, std::span<const uint8_t> data) {
  out.insert(out.end(), data.begin(), data.end());
}

// Bounds-checked big-endian reader.
class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  bool u8(uint8_t& v) {
    if (pos_ + 1 > data_.size()) return false;
    v = data_[pos_++];
    return true;
  }
  bool u16(uint16_t& v) {
    if (pos_ + 2 > data_.size()) return false;
    v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return true;
  }
  bool u24(uint32_t& v) {
    if (pos_ + 3 > data_.size()) return false;
    v = static_cast<uint32_t>(data_[pos_] << 16 | data_[pos_ + 1] << 8 | data_[pos_ + 2]);
    pos_ += 3;
    return true;
  }
  bool take(size_t n, std::span<const uint8_t>& out) {
    if (pos_ + n > data_.size()) return false;
    out = data_.subspan(pos_, n);
    pos_ += n;
    return true;
  }
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

bool parse_extension_list(Reader& r, size_t list_len, ExtensionList& out) {
  size_t end = r.remaining();
  if (list_len > end) return false;
  size_t stop = end - list_len;
  while (r.remaining() > stop) {
    uint16_t id = 0, len = 0;
    if (!r.u16(id) || !r.u16(len)) return false;
    std::span<const uint8_t> value;
    if (!r.take(len, value)) return false;
    if (r.remaining() < stop) return false;  // extension ran past the list
    out.emplace_back(id, Bytes(value.begin(), value.end()));
  }
  return true;
}

}  // namespace

const std::array<uint8_t, 32> kHelloRetryRequestRandom = {
    0xcf, 0x21, 0xad, 0x74, 0xe5, 0x9a, 0x61, 0x11, 0xbe, 0x1d, 0x8c,
    0x02, 0x1e, 0x65, 0xb8, 0x91, 0xc2, 0xa2, 0x11, 0x16, 0x7a, 0xbb,
    0x8c, 0x5e, 0x07, 0x9e, 0x09, 0xe2, 0xc8, 0xa8, 0x33, 0x9c};

std::vector<uint16_t> ClientHelloSpec::key_share_groups() const {
  std::vector<uint16_t> groups;
  for (const auto& tmpl : extensions) {
    if (const auto* ks = std::get_if<ExtensionTemplate::KeyShare>(&tmpl.payload)) {
      for (uint16_t g : ks->groups) groups.push_back(g);
    }
  }
  return groups;
}

std::optional<Bytes> render_extension(const ExtensionTemplate& tmpl,
                                      const RenderContext& ctx) {
  using T = ExtensionTemplate;
  Bytes body;
  bool absent = false;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, T::Literal>) {
          body = p.bytes;
        } else if constexpr (std::is_same_v<P, T::SupportedVersions>) {
          put_u8(body, static_cast<uint8_t>(p.versions.size() * 2));
          for (uint16_t v : p.versions) put_u16(body, v);
        } else if constexpr (std::is_same_v<P, T::KeyShare>) {
          Bytes entries;
          for (uint16_t g : p.groups) {
            auto it = ctx.key_share_publics.find(g);
            if (it == ctx.key_share_publics.end())
              throw UnrenderableTemplate("no key material for group " + std::to_string(g));
            put_u16(entries, g);
            put_u16(entries, static_cast<uint16_t>(it->second.size()));
            put_bytes(entries, it->second);
          }
          put_u16(body, static_cast<uint16_t>(entries.size()));
          put_bytes(body, entries);
        } else if constexpr (std::is_same_v<P, T::SniPlaceholder>) {
          if (!ctx.sni) {
            absent = true;
            return;
          }
          const std::string& name = *ctx.sni;
          put_u16(body, static_cast<uint16_t>(name.size() + 3));
          put_u8(body, 0);  // host_name
          put_u16(body, static_cast<uint16_t>(name.size()));
          body.insert(body.end(), name.begin(), name.end());
        } else if constexpr (std::is_same_v<P, T::Alpn>) {
          Bytes list;
          for (const std::string& proto : p.protocols) {
            put_u8(list, static_cast<uint8_t>(proto.size()));
            list.insert(list.end(), proto.begin(), proto.end());
          }
          put_u16(body, static_cast<uint16_t>(list.size()));
          put_bytes(body, list);
        } else if constexpr (std::is_same_v<P, T::SignatureAlgorithms>) {
          put_u16(body, static_cast<uint16_t>(p.algorithms.size() * 2));
          for (uint16_t a : p.algorithms) put_u16(body, a);
        } else if constexpr (std::is_same_v<P, T::SupportedGroups>) {
          put_u16(body, static_cast<uint16_t>(p.groups.size() * 2));
          for (uint16_t g : p.groups) put_u16(body, g);
        } else if constexpr (std::is_same_v<P, T::EcPointFormats>) {
          put_u8(body, static_cast<uint8_t>(p.formats.size()));
          put_bytes(body, p.formats);
        } else if constexpr (std::is_same_v<P, T::Empty>) {
          // zero-length body
        }
      },
      tmpl.payload);
  if (absent) return std::nullopt;
  return body;
}

Bytes encode_client_hello(const ClientHelloSpec& spec, const RenderContext& ctx) {
  Bytes body;
  put_u16(body, spec.legacy_version);
  put_bytes(body, ctx.client_random);

  if (spec.session_id_policy == SessionIdPolicy::Random32) {
    if (ctx.session_id.size() != 32)
      throw UnrenderableTemplate("session id policy random-32 needs 32 context bytes");
    put_u8(body, 32);
    put_bytes(body, ctx.session_id);
  } else {
    put_u8(body, 0);
  }

  put_u16(body, static_cast<uint16_t>(spec.cipher_suites.size() * 2));
  for (uint16_t c : spec.cipher_suites) put_u16(body, c);

  put_u8(body, static_cast<uint8_t>(spec.compression_methods.size()));
  put_bytes(body, spec.compression_methods);

  // The extensions block is omitted entirely for a template-free spec,
  // like a pre-extensions Client Hello would be.
  if (!spec.extensions.empty()) {
    Bytes exts;
    for (const auto& tmpl : spec.extensions) {
      auto rendered = render_extension(tmpl, ctx);
      if (!rendered) continue;  // SNI placeholder without a domain
      put_u16(exts, tmpl.ext_id);
      put_u16(exts, static_cast<uint16_t>(rendered->size()));
      put_bytes(exts, *rendered);
    }
    put_u16(body, static_cast<uint16_t>(exts.size()));
    put_bytes(body, exts);
  }

  Bytes msg;
  put_u8(msg, kHsClientHello);
  put_u24(msg, static_cast<uint32_t>(body.size()));
  put_bytes(msg, body);
  return msg;
}

RecordParse parse_records(std::span<const uint8_t> stream) {
  // Allowance over 2^14 covers protected records (expansion + padding).
  constexpr size_t kMaxRecordLen = (1 << 14) + 2048;
  RecordParse out;
  size_t pos = 0;
  while (true) {
    if (pos == stream.size()) {
      out.end = StreamEnd::Clean;
      break;
    }
    if (stream.size() - pos < 5) {
      out.end = StreamEnd::Truncated;
      break;
    }
    uint8_t type = stream[pos];
    uint16_t version = static_cast<uint16_t>(stream[pos + 1] << 8 | stream[pos + 2]);
    uint16_t len = static_cast<uint16_t>(stream[pos + 3] << 8 | stream[pos + 4]);
    if (type < kContentChangeCipherSpec || type > kContentApplicationData ||
        len > kMaxRecordLen) {
      out.end = StreamEnd::MalformedHeader;
      break;
    }
    if (stream.size() - pos - 5 < len) {
      out.end = StreamEnd::Truncated;
      break;
    }
    Record rec;
    rec.type = type;
    rec.legacy_version = version;
    rec.payload.assign(stream.begin() + pos + 5, stream.begin() + pos + 5 + len);
    out.records.push_back(std::move(rec));
    pos += 5 + len;
    out.consumed = pos;
  }
  return out;
}

Bytes frame_records(uint8_t type, uint16_t legacy_version,
                    std::span<const uint8_t> payload) {
  constexpr size_t kChunk = 1 << 14;
  Bytes out;
  size_t off = 0;
  do {
    size_t n = std::min(kChunk, payload.size() - off);
    put_u8(out, type);
    put_u16(out, legacy_version);
    put_u16(out, static_cast<uint16_t>(n));
    put_bytes(out, payload.subspan(off, n));
    off += n;
  } while (off < payload.size());
  return out;
}

void MessageReassembler::feed(std::span<const uint8_t> record_payload) {
  buffer_.insert(buffer_.end(), record_payload.begin(), record_payload.end());
  while (buffer_.size() >= 4) {
    uint32_t len = static_cast<uint32_t>(buffer_[1] << 16 | buffer_[2] << 8 | buffer_[3]);
    if (buffer_.size() < 4 + len) break;
    HandshakeMsg msg;
    msg.msg_type = buffer_[0];
    msg.raw.assign(buffer_.begin(), buffer_.begin() + 4 + len);
    msg.body.assign(buffer_.begin() + 4, buffer_.begin() + 4 + len);
    ready_.push_back(std::move(msg));
    buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + len);
  }
}

std::vector<HandshakeMsg> MessageReassembler::take() {
  std::vector<HandshakeMsg> out;
  out.swap(ready_);
  return out;
}

ServerMessage ServerMessage::alert(uint8_t level, uint8_t description) {
  ServerMessage m;
  m.kind = MsgKind::Alert;
  m.alert_level = level;
  m.alert_description = description;
  return m;
}

ServerMessage ServerMessage::marker(MsgKind kind, Section section, uint8_t type_code) {
  ServerMessage m;
  m.kind = kind;
  m.type_code = type_code;
  m.marker_section = section;
  return m;
}

namespace {

Section section_for_type(uint8_t msg_type) {
  switch (msg_type) {
    case kHsEncryptedExtensions: return Section::EncryptedExtensions;
    case kHsCertificateRequest: return Section::CertificateRequest;
    case kHsCertificate: return Section::Certificate;
    default: return Section::ServerHello;
  }
}

std::optional<ServerMessage> parse_server_hello(std::span<const uint8_t> body) {
  Reader r(body);
  ServerMessage m;
  m.type_code = kHsServerHello;
  if (!r.u16(m.legacy_version)) return std::nullopt;
  std::span<const uint8_t> random;
  if (!r.take(32, random)) return std::nullopt;
  std::copy(random.begin(), random.end(), m.random.begin());
  uint8_t sid_len = 0;
  std::span<const uint8_t> sid;
  if (!r.u8(sid_len) || !r.take(sid_len, sid)) return std::nullopt;
  if (!r.u16(m.cipher)) return std::nullopt;
  uint8_t compression = 0;
  if (!r.u8(compression)) return std::nullopt;
  // Extensions block is optional for pre-TLS-1.2-era hellos.
  if (!r.done()) {
    uint16_t ext_len = 0;
    if (!r.u16(ext_len)) return std::nullopt;
    if (ext_len != r.remaining()) return std::nullopt;
    if (!parse_extension_list(r, ext_len, m.extensions)) return std::nullopt;
  }
  m.kind = std::equal(m.random.begin(), m.random.end(), kHelloRetryRequestRandom.begin())
               ? MsgKind::HelloRetryRequest
               : MsgKind::ServerHello;
  return m;
}

std::optional<ServerMessage> parse_encrypted_extensions(std::span<const uint8_t> body) {
  Reader r(body);
  ServerMessage m;
  m.kind = MsgKind::EncryptedExtensions;
  m.type_code = kHsEncryptedExtensions;
  uint16_t ext_len = 0;
  if (!r.u16(ext_len)) return std::nullopt;
  if (ext_len != r.remaining()) return std::nullopt;
  if (!parse_extension_list(r, ext_len, m.extensions)) return std::nullopt;
  return m;
}

std::optional<ServerMessage> parse_certificate_request(std::span<const uint8_t> body,
                                                       uint16_t version) {
  ServerMessage m;
  m.kind = MsgKind::CertificateRequest;
  m.type_code = kHsCertificateRequest;
  if (version == 0x0304) {
    Reader r(body);
    uint8_t ctx_len = 0;
    std::span<const uint8_t> ctx;
    if (!r.u8(ctx_len) || !r.take(ctx_len, ctx)) return std::nullopt;
    uint16_t ext_len = 0;
    if (!r.u16(ext_len)) return std::nullopt;
    if (ext_len != r.remaining()) return std::nullopt;
    if (!parse_extension_list(r, ext_len, m.extensions)) return std::nullopt;
  }
  // TLS <= 1.2 carries certificate types and CAs, none of which are
  // extension data; the message is kept with an empty extension list.
  return m;
}

std::optional<ServerMessage> parse_certificate(std::span<const uint8_t> body,
                                               uint16_t version) {
  Reader r(body);
  ServerMessage m;
  m.kind = MsgKind::Certificate;
  m.type_code = kHsCertificate;
  if (version == 0x0304) {
    uint8_t ctx_len = 0;
    std::span<const uint8_t> ctx;
    if (!r.u8(ctx_len) || !r.take(ctx_len, ctx)) return std::nullopt;
    uint32_t list_len = 0;
    if (!r.u24(list_len)) return std::nullopt;
    if (list_len != r.remaining()) return std::nullopt;
    while (!r.done()) {
      uint32_t cert_len = 0;
      std::span<const uint8_t> der;
      if (!r.u24(cert_len) || !r.take(cert_len, der)) return std::nullopt;
      uint16_t ext_len = 0;
      if (!r.u16(ext_len)) return std::nullopt;
      ExtensionList entry_exts;
      if (!parse_extension_list(r, ext_len, entry_exts)) return std::nullopt;
      m.cert_chain.emplace_back(der.begin(), der.end());
      m.cert_entry_extensions.push_back(std::move(entry_exts));
    }
  } else {
    uint32_t list_len = 0;
    if (!r.u24(list_len)) return std::nullopt;
    if (list_len != r.remaining()) return std::nullopt;
    while (!r.done()) {
      uint32_t cert_len = 0;
      std::span<const uint8_t> der;
      if (!r.u24(cert_len) || !r.take(cert_len, der)) return std::nullopt;
      m.cert_chain.emplace_back(der.begin(), der.end());
    }
  }
  return m;
}

}  // namespace

ServerMessage parse_handshake_message(uint8_t msg_type, std::span<const uint8_t> body,
                                      uint16_t negotiated_version) {
  std::optional<ServerMessage> parsed;
  switch (msg_type) {
    case kHsServerHello:
      parsed = parse_server_hello(body);
      break;
    case kHsEncryptedExtensions:
      parsed = parse_encrypted_extensions(body);
      break;
    case kHsCertificateRequest:
      parsed = parse_certificate_request(body, negotiated_version);
      break;
    case kHsCertificate:
      parsed = parse_certificate(body, negotiated_version);
      break;
    default: {
      ServerMessage m;
      m.kind = MsgKind::Other;
      m.type_code = msg_type;
      return m;
    }
  }
  if (parsed) return std::move(*parsed);
  return ServerMessage::marker(MsgKind::Malformed, section_for_type(msg_type), msg_type);
}

std::optional<ParsedClientHello> parse_client_hello(std::span<const uint8_t> message) {
  Reader r(message);
  uint8_t msg_type = 0;
  uint32_t len = 0;
  if (!r.u8(msg_type) || msg_type != kHsClientHello) return std::nullopt;
  if (!r.u24(len) || len != r.remaining()) return std::nullopt;

  ParsedClientHello ch;
  if (!r.u16(ch.legacy_version)) return std::nullopt;
  std::span<const uint8_t> random;
  if (!r.take(32, random)) return std::nullopt;
  std::copy(random.begin(), random.end(), ch.random.begin());
  uint8_t sid_len = 0;
  std::span<const uint8_t> sid;
  if (!r.u8(sid_len) || !r.take(sid_len, sid)) return std::nullopt;
  ch.session_id.assign(sid.begin(), sid.end());

  uint16_t cipher_len = 0;
  if (!r.u16(cipher_len) || cipher_len % 2 != 0) return std::nullopt;
  for (int i = 0; i < cipher_len / 2; ++i) {
    uint16_t c = 0;
    if (!r.u16(c)) return std::nullopt;
    ch.cipher_suites.push_back(c);
  }

  uint8_t comp_len = 0;
  std::span<const uint8_t> comp;
  if (!r.u8(comp_len) || !r.take(comp_len, comp)) return std::nullopt;
  ch.compression_methods.assign(comp.begin(), comp.end());

  if (!r.done()) {
    ch.has_extensions_block = true;
    uint16_t ext_len = 0;
    if (!r.u16(ext_len)) return std::nullopt;
    if (ext_len != r.remaining()) return std::nullopt;
    if (!parse_extension_list(r, ext_len, ch.extensions)) return std::nullopt;
  }
  return ch;
}

}  // namespace tlsfp::wire
