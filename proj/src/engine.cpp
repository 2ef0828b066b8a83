#include "tlsfp/engine.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/rand.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <mutex>

#include "tlsfp/keyschedule.hpp"

namespace tlsfp::engine {

void EngineConfig::validate() const {
  if (connect_timeout.count() <= 0 || read_timeout.count() <= 0)
    throw std::invalid_argument("timeouts must be strictly positive");
  if (max_transcript_bytes < 64 * 1024)
    throw std::invalid_argument("max_transcript_bytes must be at least 64 KiB");
}

std::optional<std::string> parse_server_header(std::string_view response_head) {
  size_t pos = 0;
  while (pos < response_head.size()) {
    size_t eol = response_head.find("\r\n", pos);
    if (eol == std::string_view::npos) eol = response_head.size();
    std::string_view line = response_head.substr(pos, eol - pos);
    if (line.empty()) break;  // end of head
    size_t colon = line.find(':');
    if (colon != std::string_view::npos &&
        util::lower(util::trim(line.substr(0, colon))) == "server") {
      return util::trim(line.substr(colon + 1));
    }
    pos = eol + 2;
  }
  return std::nullopt;
}

namespace {

int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

TransportErrorKind errno_kind(int err) {
  switch (err) {
    case ECONNREFUSED:
      return TransportErrorKind::Refused;
    case ECONNRESET:
    case EPIPE:
      return TransportErrorKind::Reset;
    case ETIMEDOUT:
      return TransportErrorKind::Timeout;
    case EHOSTUNREACH:
    case ENETUNREACH:
    case EADDRNOTAVAIL:
      return TransportErrorKind::Unreachable;
    default:
      return TransportErrorKind::Other;
  }
}

// Connects with a deadline; on success returns a nonblocking fd.
int connect_with_timeout(const std::string& ip, uint16_t port,
                         std::chrono::milliseconds timeout,
                         TransportErrorKind& error_out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_NUMERICHOST;
  addrinfo* res = nullptr;
  std::string port_str = std::to_string(port);
  if (getaddrinfo(ip.c_str(), port_str.c_str(), &hints, &res) != 0 || !res) {
    error_out = TransportErrorKind::Unreachable;
    return -1;
  }

  int fd = socket(res->ai_family, SOCK_STREAM | SOCK_NONBLOCK, 0);
  if (fd < 0) {
    freeaddrinfo(res);
    error_out = TransportErrorKind::Other;
    return -1;
  }
  int rc = connect(fd, res->ai_addr, res->ai_addrlen);
  freeaddrinfo(res);
  if (rc != 0 && errno != EINPROGRESS) {
    error_out = errno_kind(errno);
    close(fd);
    return -1;
  }
  if (rc != 0) {
    pollfd pfd{fd, POLLOUT, 0};
    int pr = poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (pr <= 0) {
      error_out = TransportErrorKind::Timeout;
      close(fd);
      return -1;
    }
    int so_error = 0;
    socklen_t len = sizeof(so_error);
    getsockopt(fd, SOL_SOCKET, SO_ERROR, &so_error, &len);
    if (so_error != 0) {
      error_out = errno_kind(so_error);
      close(fd);
      return -1;
    }
  }
  int flag = 1;
  setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &flag, sizeof(flag));
  return fd;
}

enum class ReadResult { Data, Eof, Timeout, Error };

ReadResult read_some(int fd, std::chrono::milliseconds timeout, Bytes& out,
                     int& err_out) {
  pollfd pfd{fd, POLLIN, 0};
  int pr = poll(&pfd, 1, static_cast<int>(timeout.count()));
  if (pr == 0) return ReadResult::Timeout;
  if (pr < 0) {
    err_out = errno;
    return ReadResult::Error;
  }
  uint8_t buf[16384];
  ssize_t n = recv(fd, buf, sizeof(buf), 0);
  if (n == 0) return ReadResult::Eof;
  if (n < 0) {
    if (errno == EAGAIN || errno == EWOULDBLOCK) return ReadResult::Timeout;
    err_out = errno;
    return ReadResult::Error;
  }
  out.insert(out.end(), buf, buf + n);
  return ReadResult::Data;
}

bool send_all(int fd, std::span<const uint8_t> data) {
  size_t sent = 0;
  while (sent < data.size()) {
    ssize_t n = send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        pollfd pfd{fd, POLLOUT, 0};
        if (poll(&pfd, 1, 2000) <= 0) return false;
        continue;
      }
      return false;
    }
    sent += static_cast<size_t>(n);
  }
  return true;
}

// Wire length of a plausible public share per group; used when a spec names
// a group the crypto provider cannot complete.
size_t placeholder_public_len(uint16_t group) {
  switch (group) {
    case tls13::kGroupSecp256r1: return 65;
    case tls13::kGroupSecp384r1: return 97;
    case tls13::kGroupSecp521r1: return 133;
    case tls13::kGroupX25519: return 32;
    case tls13::kGroupX448: return 56;
    case 256: return 256;   // ffdhe2048
    case 257: return 384;   // ffdhe3072
    case 258: return 512;   // ffdhe4096
    case 259: return 768;   // ffdhe6144
    case 260: return 1024;  // ffdhe8192
    default: return 32;
  }
}

std::mutex g_keylog_mu;

void keylog_line(const std::string& path, const char* label,
                 std::span<const uint8_t> client_random,
                 std::span<const uint8_t> secret) {
  if (path.empty()) return;
  std::lock_guard<std::mutex> lock(g_keylog_mu);
  FILE* f = std::fopen(path.c_str(), "a");
  if (!f) return;
  std::fprintf(f, "%s %s %s\n", label, util::to_hex(client_random).c_str(),
               util::to_hex(secret).c_str());
  std::fclose(f);
}

std::optional<uint16_t> find_ext_u16(const wire::ExtensionList& exts, uint16_t id) {
  for (const auto& [ext_id, value] : exts)
    if (ext_id == id && value.size() >= 2)
      return static_cast<uint16_t>(value[0]) << 8 | value[1];
  return std::nullopt;
}

const Bytes* find_ext(const wire::ExtensionList& exts, uint16_t id) {
  for (const auto& [ext_id, value] : exts)
    if (ext_id == id) return &value;
  return nullptr;
}

struct Driver {
  const Endpoint& target;
  const wire::ClientHelloSpec& spec;
  const EngineConfig& config;

  HandshakeObservation obs;
  int fd = -1;
  bool transport_failed = false;
  TransportErrorKind transport_kind = TransportErrorKind::Other;

  Bytes rx;            // unconsumed raw stream bytes
  size_t total_rx = 0;
  wire::MessageReassembler plain_asm;
  wire::MessageReassembler inner_asm;

  wire::RenderContext ctx;
  std::map<uint16_t, tls13::EphemeralKey> ephemeral;  // group -> key
  Bytes ch1_msg;
  Bytes hrr_raw;
  Bytes ch2_msg;
  bool hrr_seen = false;

  Bytes hs_transcript;  // raw handshake messages after hello agreement
  std::optional<tls13::HandshakeSecrets> secrets;
  std::optional<tls13::RecordCipher> server_cipher;
  std::optional<tls13::RecordCipher> client_cipher;
  bool ccs_sent = false;
  uint16_t record_version = 0x0301;

  enum class Phase { AwaitServerHello, AwaitEncrypted, Tls12Flight, Http };
  Phase phase = Phase::AwaitServerHello;
  bool saw_ee = false;
  bool done = false;
  bool undecryptable_marked = false;
  bool completed_crypto = false;
  std::string http_head;

  Driver(const Endpoint& t, const wire::ClientHelloSpec& s, const EngineConfig& c)
      : target(t), spec(s), config(c) {}

  ~Driver() {
    if (fd >= 0) close(fd);
  }

  wire::Section current_section() const {
    switch (phase) {
      case Phase::AwaitServerHello:
        return wire::Section::ServerHello;
      case Phase::AwaitEncrypted:
        return saw_ee ? wire::Section::Certificate
                      : wire::Section::EncryptedExtensions;
      case Phase::Tls12Flight:
      case Phase::Http:
        return wire::Section::Certificate;
    }
    return wire::Section::ServerHello;
  }

  void mark(wire::MsgKind kind) {
    obs.messages.push_back(wire::ServerMessage::marker(kind, current_section()));
  }

  void add_alerts(std::span<const uint8_t> payload) {
    if (phase == Phase::Http) {
      // Teardown alerts after a completed handshake are not behavior.
      done = true;
      return;
    }
    if (payload.empty() || payload.size() % 2 != 0) {
      mark(wire::MsgKind::Malformed);
      done = true;
      return;
    }
    for (size_t i = 0; i + 1 < payload.size(); i += 2) {
      obs.messages.push_back(wire::ServerMessage::alert(payload[i], payload[i + 1]));
      obs.alerts.emplace_back(payload[i], payload[i + 1]);
    }
    done = true;  // any alert ends collection
  }

  void render_context_init() {
    RAND_bytes(ctx.client_random.data(), static_cast<int>(ctx.client_random.size()));
    if (spec.session_id_policy == wire::SessionIdPolicy::Random32) {
      ctx.session_id.resize(32);
      RAND_bytes(ctx.session_id.data(), 32);
    }
    ctx.sni = target.domain;
    for (uint16_t group : spec.key_share_groups()) {
      if (ctx.key_share_publics.count(group)) continue;
      if (tls13::group_supported(group)) {
        if (auto key = tls13::EphemeralKey::generate(group)) {
          ctx.key_share_publics[group] = key->public_bytes();
          ephemeral.emplace(group, std::move(*key));
          continue;
        }
      }
      Bytes filler(placeholder_public_len(group));
      RAND_bytes(filler.data(), static_cast<int>(filler.size()));
      ctx.key_share_publics[group] = filler;
    }
  }

  // First ClientHello goes out at 0x0301; every later plaintext record
  // must say 0x0303 or strict stacks drop the connection.
  bool send_record(uint8_t type, std::span<const uint8_t> payload) {
    Bytes framed = wire::frame_records(type, record_version, payload);
    record_version = 0x0303;
    return send_all(fd, framed);
  }

  void run() {
    config.validate();
    obs.probe_id = spec.id;
    obs.ip = target.ip;
    obs.port = target.port;
    obs.domain = target.domain;
    obs.timestamp_ms = now_ms();

    fd = connect_with_timeout(target.ip, target.port, config.connect_timeout,
                              transport_kind);
    if (fd < 0) {
      transport_failed = true;
      finish();
      return;
    }

    render_context_init();
    ch1_msg = wire::encode_client_hello(spec, ctx);
    if (!send_record(wire::kContentHandshake, ch1_msg)) {
      if (total_rx == 0) {
        transport_failed = true;
        transport_kind = TransportErrorKind::Reset;
      }
      finish();
      return;
    }

    while (!done) {
      int err = 0;
      size_t before = rx.size();
      switch (read_some(fd, config.read_timeout, rx, err)) {
        case ReadResult::Data:
          total_rx += rx.size() - before;
          process_records();
          if (total_rx > config.max_transcript_bytes) done = true;
          break;
        case ReadResult::Eof:
          done = true;
          break;
        case ReadResult::Timeout:
          handle_timeout();
          done = true;
          break;
        case ReadResult::Error:
          if (total_rx == 0) {
            transport_failed = true;
            transport_kind = errno_kind(err);
          }
          done = true;
          break;
      }
    }
    finish();
  }

  void handle_timeout() {
    if (total_rx == 0) {
      transport_failed = true;
      transport_kind = TransportErrorKind::Timeout;
      return;
    }
    if (phase == Phase::Http) return;  // header fetch is best-effort
    mark(wire::MsgKind::Timeout);
  }

  void process_records() {
    auto parsed = wire::parse_records(rx);
    rx.erase(rx.begin(), rx.begin() + static_cast<long>(parsed.consumed));
    for (const auto& record : parsed.records) {
      handle_record(record);
      if (done) return;
    }
    if (parsed.end == wire::StreamEnd::MalformedHeader) {
      mark(wire::MsgKind::Malformed);
      done = true;
    }
  }

  void handle_record(const wire::Record& record) {
    switch (record.type) {
      case wire::kContentChangeCipherSpec:
        break;  // compatibility noise
      case wire::kContentAlert:
        add_alerts(record.payload);
        break;
      case wire::kContentHandshake:
        plain_asm.feed(record.payload);
        for (auto& msg : plain_asm.take()) {
          handle_plain_message(msg);
          if (done) return;
        }
        break;
      case wire::kContentApplicationData:
        handle_protected_record(record);
        break;
      default:
        break;
    }
  }

  void handle_plain_message(const wire::HandshakeMsg& msg) {
    uint16_t version_for_parse =
        obs.negotiated_version.value_or(spec.legacy_version);
    wire::ServerMessage parsed =
        wire::parse_handshake_message(msg.msg_type, msg.body, version_for_parse);

    switch (parsed.kind) {
      case wire::MsgKind::Malformed:
        obs.messages.push_back(parsed);
        if (msg.msg_type == wire::kHsServerHello) done = true;
        return;
      case wire::MsgKind::ServerHello:
        handle_server_hello(parsed, msg.raw);
        return;
      case wire::MsgKind::HelloRetryRequest:
        handle_hello_retry(parsed, msg.raw);
        return;
      default:
        obs.messages.push_back(parsed);
        if (msg.msg_type == wire::kHsServerHelloDone) done = true;
        return;
    }
  }

  void handle_server_hello(const wire::ServerMessage& sh, const Bytes& raw) {
    obs.messages.push_back(sh);
    uint16_t negotiated = sh.legacy_version;
    if (auto selected = find_ext_u16(sh.extensions, wire::kExtSupportedVersions))
      negotiated = *selected;
    obs.negotiated_version = negotiated;

    if (negotiated == 0x0304) {
      phase = Phase::AwaitEncrypted;
      setup_decryption(sh, raw);
    } else {
      phase = Phase::Tls12Flight;
    }
  }

  void setup_decryption(const wire::ServerMessage& sh, const Bytes& sh_raw) {
    const Bytes* key_share = find_ext(sh.extensions, wire::kExtKeyShare);
    if (!key_share || key_share->size() < 4) return;
    uint16_t group = static_cast<uint16_t>((*key_share)[0]) << 8 | (*key_share)[1];
    size_t pub_len = static_cast<size_t>((*key_share)[2]) << 8 | (*key_share)[3];
    if (key_share->size() < 4 + pub_len) return;
    std::span<const uint8_t> server_pub(key_share->data() + 4, pub_len);

    auto it = ephemeral.find(group);
    if (it == ephemeral.end()) return;
    auto shared = it->second.shared_secret(server_pub);
    if (!shared) return;

    auto params = tls13::cipher_params(sh.cipher);
    if (!params) return;

    Bytes hello_transcript;
    if (hrr_seen) {
      // RFC 8446 4.4.1: the first hello is replaced by a message_hash message.
      Bytes ch1_hash = tls13::transcript_hash(params->md, ch1_msg);
      hello_transcript.push_back(254);
      hello_transcript.push_back(0);
      hello_transcript.push_back(0);
      hello_transcript.push_back(static_cast<uint8_t>(ch1_hash.size()));
      hello_transcript.insert(hello_transcript.end(), ch1_hash.begin(), ch1_hash.end());
      hello_transcript.insert(hello_transcript.end(), hrr_raw.begin(), hrr_raw.end());
      hello_transcript.insert(hello_transcript.end(), ch2_msg.begin(), ch2_msg.end());
    } else {
      hello_transcript = ch1_msg;
    }
    hello_transcript.insert(hello_transcript.end(), sh_raw.begin(), sh_raw.end());

    Bytes hash = tls13::transcript_hash(params->md, hello_transcript);
    try {
      secrets = tls13::derive_handshake_keys(hash, *shared, sh.cipher);
    } catch (const tls13::UnsupportedCipher&) {
      return;
    }
    server_cipher.emplace(secrets->params, secrets->server.key, secrets->server.iv);
    client_cipher.emplace(secrets->params, secrets->client.key, secrets->client.iv);
    hs_transcript = std::move(hello_transcript);

    keylog_line(config.keylog_path, "CLIENT_HANDSHAKE_TRAFFIC_SECRET",
                ctx.client_random, secrets->client.secret);
    keylog_line(config.keylog_path, "SERVER_HANDSHAKE_TRAFFIC_SECRET",
                ctx.client_random, secrets->server.secret);
  }

  void handle_hello_retry(const wire::ServerMessage& hrr, const Bytes& raw) {
    obs.messages.push_back(hrr);
    if (!config.follow_hrr || hrr_seen) {
      done = true;
      return;
    }
    hrr_seen = true;
    hrr_raw = raw;

    auto group = find_ext_u16(hrr.extensions, wire::kExtKeyShare);
    if (!group || !tls13::group_supported(*group)) {
      done = true;
      return;
    }
    if (!ephemeral.count(*group)) {
      auto key = tls13::EphemeralKey::generate(*group);
      if (!key) {
        done = true;
        return;
      }
      ctx.key_share_publics[*group] = key->public_bytes();
      ephemeral.emplace(*group, std::move(*key));
    }

    // Second hello: same spec, key share narrowed to the selected group,
    // cookie echoed when present.
    wire::ClientHelloSpec retry = spec;
    for (auto& tmpl : retry.extensions) {
      if (auto* ks = std::get_if<wire::ExtensionTemplate::KeyShare>(&tmpl.payload))
        ks->groups = {*group};
    }
    if (const Bytes* cookie = find_ext(hrr.extensions, wire::kExtCookie)) {
      wire::ExtensionTemplate echo;
      echo.ext_id = wire::kExtCookie;
      echo.payload = wire::ExtensionTemplate::Literal{*cookie};
      retry.extensions.push_back(echo);
    }

    try {
      ch2_msg = wire::encode_client_hello(retry, ctx);
    } catch (const wire::UnrenderableTemplate&) {
      done = true;
      return;
    }
    if (!ccs_sent) {
      const uint8_t ccs[] = {1};
      send_record(wire::kContentChangeCipherSpec, ccs);
      ccs_sent = true;
    }
    if (!send_record(wire::kContentHandshake, ch2_msg)) done = true;
    phase = Phase::AwaitServerHello;
  }

  void handle_protected_record(const wire::Record& record) {
    if (!server_cipher) {
      if (!undecryptable_marked) {
        mark(wire::MsgKind::Undecryptable);
        undecryptable_marked = true;
      }
      done = true;
      return;
    }
    Bytes header{record.type,
                 static_cast<uint8_t>(record.legacy_version >> 8),
                 static_cast<uint8_t>(record.legacy_version & 0xff),
                 static_cast<uint8_t>(record.payload.size() >> 8),
                 static_cast<uint8_t>(record.payload.size() & 0xff)};
    auto inner = server_cipher->open(header, record.payload);
    if (!inner) {
      if (!undecryptable_marked) {
        mark(wire::MsgKind::Undecryptable);
        undecryptable_marked = true;
      }
      done = true;
      return;
    }
    uint8_t inner_type = inner->back();
    inner->pop_back();

    switch (inner_type) {
      case wire::kContentAlert:
        add_alerts(*inner);
        break;
      case wire::kContentHandshake:
        if (phase == Phase::Http) break;  // post-handshake tickets, ignored
        inner_asm.feed(*inner);
        for (auto& msg : inner_asm.take()) {
          handle_inner_message(msg);
          if (done) return;
        }
        break;
      case wire::kContentApplicationData:
        if (phase == Phase::Http) {
          http_head.append(inner->begin(), inner->end());
          size_t end = http_head.find("\r\n\r\n");
          if (end != std::string::npos || http_head.size() > 64 * 1024) {
            obs.http_server_header =
                parse_server_header(std::string_view(http_head).substr(0, end));
            done = true;
          }
        }
        break;
      default:
        break;
    }
  }

  void handle_inner_message(const wire::HandshakeMsg& msg) {
    wire::ServerMessage parsed =
        wire::parse_handshake_message(msg.msg_type, msg.body, 0x0304);
    if (parsed.kind == wire::MsgKind::EncryptedExtensions) saw_ee = true;

    if (msg.msg_type == wire::kHsFinished) {
      handle_server_finished(msg);
      return;
    }
    obs.messages.push_back(parsed);
    hs_transcript.insert(hs_transcript.end(), msg.raw.begin(), msg.raw.end());
  }

  void handle_server_finished(const wire::HandshakeMsg& msg) {
    obs.messages.push_back(
        wire::parse_handshake_message(msg.msg_type, msg.body, 0x0304));
    if (!secrets) {
      done = true;
      return;
    }
    Bytes pre_finished_hash =
        tls13::transcript_hash(secrets->params.md, hs_transcript);
    Bytes expected = tls13::finished_verify_data(
        secrets->params, secrets->server.secret, pre_finished_hash);
    bool verified = expected.size() == msg.body.size() &&
                    std::equal(expected.begin(), expected.end(), msg.body.begin());
    hs_transcript.insert(hs_transcript.end(), msg.raw.begin(), msg.raw.end());

    if (!config.complete_handshake || !verified) {
      done = true;
      return;
    }

    Bytes full_hash = tls13::transcript_hash(secrets->params.md, hs_transcript);
    auto app = tls13::derive_application_keys(*secrets, full_hash);

    Bytes verify = tls13::finished_verify_data(secrets->params,
                                               secrets->client.secret, full_hash);
    Bytes finished;
    finished.push_back(wire::kHsFinished);
    finished.push_back(0);
    finished.push_back(static_cast<uint8_t>(verify.size() >> 8));
    finished.push_back(static_cast<uint8_t>(verify.size() & 0xff));
    finished.insert(finished.end(), verify.begin(), verify.end());

    if (!ccs_sent) {
      const uint8_t ccs[] = {1};
      send_record(wire::kContentChangeCipherSpec, ccs);
      ccs_sent = true;
    }
    Bytes record = client_cipher->seal_record(wire::kContentHandshake, finished);
    if (!send_all(fd, record)) {
      done = true;
      return;
    }
    completed_crypto = true;

    keylog_line(config.keylog_path, "CLIENT_TRAFFIC_SECRET_0", ctx.client_random,
                app.client.secret);
    keylog_line(config.keylog_path, "SERVER_TRAFFIC_SECRET_0", ctx.client_random,
                app.server.secret);

    if (config.fetch_http_header) {
      server_cipher.emplace(secrets->params, app.server.key, app.server.iv);
      client_cipher.emplace(secrets->params, app.client.key, app.client.iv);
      phase = Phase::Http;
      std::string host = target.domain.value_or(target.ip);
      std::string request = "GET / HTTP/1.1\r\nHost: " + host +
                            "\r\nUser-Agent: tlsfp/0.1\r\nAccept: */*\r\n"
                            "Connection: close\r\n\r\n";
      Bytes req = client_cipher->seal_record(
          wire::kContentApplicationData,
          std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(request.data()),
                                   request.size()));
      if (!send_all(fd, req)) done = true;
    } else {
      done = true;
    }
  }

  void finish() {
    if (phase == Phase::Http && !obs.http_server_header && !http_head.empty())
      obs.http_server_header = parse_server_header(http_head);

    if (transport_failed) {
      obs.outcome = Outcome::TransportError;
      obs.transport_error = transport_kind;
      obs.messages.clear();
      obs.alerts.clear();
      obs.negotiated_version.reset();
      return;
    }

    bool any_real = false;
    for (const auto& msg : obs.messages) {
      switch (msg.kind) {
        case wire::MsgKind::ServerHello:
        case wire::MsgKind::HelloRetryRequest:
        case wire::MsgKind::EncryptedExtensions:
        case wire::MsgKind::CertificateRequest:
        case wire::MsgKind::Certificate:
        case wire::MsgKind::Other:
          any_real = true;
          break;
        default:
          break;
      }
    }
    obs.outcome = any_real ? Outcome::Completed : Outcome::AlertedOnly;

    if (config.trust_store) {
      for (const auto& msg : obs.messages) {
        if (msg.kind == wire::MsgKind::Certificate && !msg.cert_chain.empty()) {
          obs.cert_validity = certs::verify_certificate_chain(
              msg.cert_chain, target.domain.value_or(""), *config.trust_store);
          break;
        }
      }
    }
  }
};

}  // namespace

HandshakeObservation perform_handshake(const Endpoint& target,
                                       const wire::ClientHelloSpec& spec,
                                       const EngineConfig& config) {
  Driver driver(target, spec, config);
  driver.run();
  return driver.obs;
}

}  // namespace tlsfp::engine
