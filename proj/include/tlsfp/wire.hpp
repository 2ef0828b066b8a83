// Bit-exact Client Hello construction and parsing of server-side TLS
// records and handshake messages. Everything here is pure: no IO, no
// shared state, reentrant from any number of threads.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tlsfp/util.hpp"

namespace tlsfp::wire {

// --- Client Hello description -----------------------------------------

enum class SessionIdPolicy { Empty, Random32 };
enum class GreasePolicy { None, FixedValues };

// Declarative extension body. Literal bytes cover everything the typed
// templates do not; GREASE values are plain code points like any other.
struct ExtensionTemplate {
  struct Literal { Bytes bytes; };
  struct SupportedVersions { std::vector<uint16_t> versions; };
  struct KeyShare { std::vector<uint16_t> groups; };
  struct SniPlaceholder {};
  struct Alpn { std::vector<std::string> protocols; };
  struct SignatureAlgorithms { std::vector<uint16_t> algorithms; };
  struct SupportedGroups { std::vector<uint16_t> groups; };
  struct EcPointFormats { std::vector<uint8_t> formats; };
  struct Empty {};
  using Payload = std::variant<Literal, SupportedVersions, KeyShare, SniPlaceholder,
                               Alpn, SignatureAlgorithms, SupportedGroups,
                               EcPointFormats, Empty>;

  uint16_t ext_id = 0;
  Payload payload = Empty{};
};

struct ClientHelloSpec {
  std::string id;
  uint16_t legacy_version = 0x0303;
  std::vector<uint16_t> cipher_suites;
  std::vector<uint8_t> compression_methods{0};
  std::vector<ExtensionTemplate> extensions;
  SessionIdPolicy session_id_policy = SessionIdPolicy::Random32;
  GreasePolicy grease_policy = GreasePolicy::None;

  // Groups named by any key_share template, in template order.
  std::vector<uint16_t> key_share_groups() const;
};

// Everything connection-specific a spec needs to become bytes. Identical
// context and spec always produce identical bytes.
struct RenderContext {
  std::optional<std::string> sni;
  std::map<uint16_t, Bytes> key_share_publics;  // group -> public key octets
  std::array<uint8_t, 32> client_random{};
  Bytes session_id;  // consulted only under SessionIdPolicy::Random32
};

struct UnrenderableTemplate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Complete ClientHello handshake message (type + 24-bit length + body).
// Record framing is the caller's job.
Bytes encode_client_hello(const ClientHelloSpec& spec, const RenderContext& ctx);

// Render of a single extension body; absent (nullopt) only for an SNI
// placeholder without a domain in context.
std::optional<Bytes> render_extension(const ExtensionTemplate& tmpl,
                                      const RenderContext& ctx);

// --- Record layer ------------------------------------------------------

constexpr uint8_t kContentChangeCipherSpec = 20;
constexpr uint8_t kContentAlert = 21;
constexpr uint8_t kContentHandshake = 22;
constexpr uint8_t kContentApplicationData = 23;

struct Record {
  uint8_t type = 0;
  uint16_t legacy_version = 0;
  Bytes payload;
};

enum class StreamEnd {
  Clean,            // stream ends on a record boundary
  Truncated,        // stream ends mid-record
  MalformedHeader,  // header bytes are not a plausible TLS record
};

struct RecordParse {
  std::vector<Record> records;
  StreamEnd end = StreamEnd::Clean;
  size_t consumed = 0;  // bytes of complete records taken from the stream
};

RecordParse parse_records(std::span<const uint8_t> stream);

// Wraps a payload into records of at most 2^14 bytes each.
Bytes frame_records(uint8_t type, uint16_t legacy_version,
                    std::span<const uint8_t> payload);

// Reassembles handshake messages out of a sequence of handshake-record
// payloads; messages may be split across or coalesced within records.
struct HandshakeMsg {
  uint8_t msg_type = 0;
  Bytes body;
  Bytes raw;  // header + body, for transcript hashing
};

class MessageReassembler {
 public:
  void feed(std::span<const uint8_t> record_payload);
  // Complete messages accumulated so far, in arrival order.
  std::vector<HandshakeMsg> take();
  bool mid_message() const { return !buffer_.empty(); }

 private:
  Bytes buffer_;
  std::vector<HandshakeMsg> ready_;
};

// --- Server handshake messages ------------------------------------------

constexpr uint8_t kHsClientHello = 1;
constexpr uint8_t kHsServerHello = 2;
constexpr uint8_t kHsNewSessionTicket = 4;
constexpr uint8_t kHsEncryptedExtensions = 8;
constexpr uint8_t kHsCertificate = 11;
constexpr uint8_t kHsServerKeyExchange = 12;
constexpr uint8_t kHsCertificateRequest = 13;
constexpr uint8_t kHsServerHelloDone = 14;
constexpr uint8_t kHsCertificateVerify = 15;
constexpr uint8_t kHsFinished = 20;

// ServerHello.random value that turns a ServerHello into a HelloRetryRequest.
extern const std::array<uint8_t, 32> kHelloRetryRequestRandom;

enum class MsgKind {
  ServerHello,
  HelloRetryRequest,
  EncryptedExtensions,
  CertificateRequest,
  Certificate,
  Alert,
  Other,
  // Markers recorded inside observations rather than thrown:
  Malformed,      // message body did not parse
  Undecryptable,  // protected flight could not be opened
  Timeout,        // read deadline hit after at least one TLS byte
};

// Sections of the canonical feature layout a message (or marker) lands in.
enum class Section { ServerHello, EncryptedExtensions, CertificateRequest,
                     HelloRetryRequest, Certificate };

using ExtensionList = std::vector<std::pair<uint16_t, Bytes>>;

struct ServerMessage {
  MsgKind kind = MsgKind::Other;
  uint8_t type_code = 0;       // handshake message type (original type for markers)
  uint16_t legacy_version = 0; // ServerHello / HRR
  std::array<uint8_t, 32> random{};
  uint16_t cipher = 0;         // ServerHello / HRR
  ExtensionList extensions;    // exact wire order, values verbatim
  uint8_t alert_level = 0;
  uint8_t alert_description = 0;
  std::vector<Bytes> cert_chain;                      // Certificate only
  std::vector<ExtensionList> cert_entry_extensions;   // per entry, TLS 1.3 only
  std::optional<Section> marker_section;              // markers only

  static ServerMessage alert(uint8_t level, uint8_t description);
  static ServerMessage marker(MsgKind kind, Section section, uint8_t type_code = 0);
};

// Parses one server handshake message body. Never throws: a body that does
// not parse yields kind Malformed, because deviant encodings are themselves
// server behavior worth keeping.
ServerMessage parse_handshake_message(uint8_t msg_type, std::span<const uint8_t> body,
                                      uint16_t negotiated_version);

// Client Hello parser, the other half of the codec round trip.
struct ParsedClientHello {
  uint16_t legacy_version = 0;
  std::array<uint8_t, 32> random{};
  Bytes session_id;
  std::vector<uint16_t> cipher_suites;
  std::vector<uint8_t> compression_methods;
  bool has_extensions_block = false;
  ExtensionList extensions;
};

std::optional<ParsedClientHello> parse_client_hello(std::span<const uint8_t> message);

// Extension ids with meaning to the toolkit.
constexpr uint16_t kExtServerName = 0;
constexpr uint16_t kExtStatusRequest = 5;
constexpr uint16_t kExtSupportedGroups = 10;
constexpr uint16_t kExtEcPointFormats = 11;
constexpr uint16_t kExtSignatureAlgorithms = 13;
constexpr uint16_t kExtAlpn = 16;
constexpr uint16_t kExtSupportedVersions = 43;
constexpr uint16_t kExtCookie = 44;
constexpr uint16_t kExtKeyShare = 51;

}  // namespace tlsfp::wire
