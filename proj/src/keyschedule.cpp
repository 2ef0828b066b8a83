#include "tlsfp/keyschedule.hpp"

#include <openssl/core_names.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/param_build.h>

#include <cassert>
#include <cstring>

namespace tlsfp::tls13 {

std::optional<CipherParams> cipher_params(uint16_t suite) {
  CipherParams p;
  p.suite = suite;
  switch (suite) {
    case 0x1301:
      p.md = EVP_sha256();
      p.aead = EVP_aes_128_gcm();
      p.key_len = 16;
      break;
    case 0x1302:
      p.md = EVP_sha384();
      p.aead = EVP_aes_256_gcm();
      p.key_len = 32;
      break;
    case 0x1303:
      p.md = EVP_sha256();
      p.aead = EVP_chacha20_poly1305();
      p.key_len = 32;
      break;
    default:
      return std::nullopt;
  }
  p.hash_len = static_cast<size_t>(EVP_MD_get_size(p.md));
  return p;
}

Bytes hkdf_extract(const EVP_MD* md, std::span<const uint8_t> salt,
                   std::span<const uint8_t> ikm) {
  Bytes out(static_cast<size_t>(EVP_MD_get_size(md)));
  unsigned int out_len = 0;
  HMAC(md, salt.data(), static_cast<int>(salt.size()), ikm.data(), ikm.size(),
       out.data(), &out_len);
  out.resize(out_len);
  return out;
}

namespace {

Bytes hkdf_expand(const EVP_MD* md, std::span<const uint8_t> prk,
                  std::span<const uint8_t> info, size_t length) {
  Bytes out;
  Bytes t;
  uint8_t counter = 1;
  while (out.size() < length) {
    Bytes block(t);
    block.insert(block.end(), info.begin(), info.end());
    block.push_back(counter++);
    Bytes digest(static_cast<size_t>(EVP_MD_get_size(md)));
    unsigned int digest_len = 0;
    HMAC(md, prk.data(), static_cast<int>(prk.size()), block.data(), block.size(),
         digest.data(), &digest_len);
    digest.resize(digest_len);
    t = digest;
    out.insert(out.end(), digest.begin(), digest.end());
  }
  out.resize(length);
  return out;
}

Bytes derive_secret(const EVP_MD* md, std::span<const uint8_t> secret,
                    std::string_view label, std::span<const uint8_t> messages_hash) {
  return hkdf_expand_label(md, secret, label, messages_hash,
                           static_cast<size_t>(EVP_MD_get_size(md)));
}

Bytes empty_hash(const EVP_MD* md) { return transcript_hash(md, {}); }

TrafficKeys traffic_keys(const CipherParams& params, Bytes secret) {
  TrafficKeys keys;
  keys.key = hkdf_expand_label(params.md, secret, "key", {}, params.key_len);
  keys.iv = hkdf_expand_label(params.md, secret, "iv", {}, params.iv_len);
  keys.secret = std::move(secret);
  return keys;
}

}  // namespace

Bytes hkdf_expand_label(const EVP_MD* md, std::span<const uint8_t> secret,
                        std::string_view label, std::span<const uint8_t> context,
                        size_t length) {
  // HkdfLabel: u16 length, opaque label<7..255> = "tls13 " + label, context.
  Bytes info;
  info.push_back(static_cast<uint8_t>(length >> 8));
  info.push_back(static_cast<uint8_t>(length));
  std::string full_label = "tls13 ";
  full_label += label;
  info.push_back(static_cast<uint8_t>(full_label.size()));
  info.insert(info.end(), full_label.begin(), full_label.end());
  info.push_back(static_cast<uint8_t>(context.size()));
  info.insert(info.end(), context.begin(), context.end());
  return hkdf_expand(md, secret, info, length);
}

Bytes transcript_hash(const EVP_MD* md, std::span<const uint8_t> transcript) {
  Bytes out(static_cast<size_t>(EVP_MD_get_size(md)));
  unsigned int out_len = 0;
  EVP_Digest(transcript.data(), transcript.size(), out.data(), &out_len, md, nullptr);
  out.resize(out_len);
  return out;
}

HandshakeSecrets derive_handshake_keys(std::span<const uint8_t> hello_transcript_hash,
                                       std::span<const uint8_t> shared_secret,
                                       uint16_t cipher_suite) {
  auto params = cipher_params(cipher_suite);
  if (!params) throw UnsupportedCipher("cipher suite not supported: " +
                                       std::to_string(cipher_suite));
  if (hello_transcript_hash.size() != params->hash_len)
    throw UnsupportedCipher("transcript hash length does not match cipher hash");
  if (shared_secret.empty()) throw UnsupportedCipher("empty shared secret");

  const EVP_MD* md = params->md;
  const Bytes zeros(params->hash_len, 0);
  Bytes early = hkdf_extract(md, {}, zeros);
  Bytes derived = derive_secret(md, early, "derived", empty_hash(md));
  Bytes handshake = hkdf_extract(md, derived, shared_secret);

  HandshakeSecrets out;
  out.params = *params;
  out.client = traffic_keys(
      *params, derive_secret(md, handshake, "c hs traffic", hello_transcript_hash));
  out.server = traffic_keys(
      *params, derive_secret(md, handshake, "s hs traffic", hello_transcript_hash));
  out.handshake_secret = std::move(handshake);
  return out;
}

ApplicationSecrets derive_application_keys(const HandshakeSecrets& hs,
                                           std::span<const uint8_t> transcript_hash) {
  const EVP_MD* md = hs.params.md;
  const Bytes zeros(hs.params.hash_len, 0);
  Bytes derived = derive_secret(md, hs.handshake_secret, "derived", empty_hash(md));
  Bytes master = hkdf_extract(md, derived, zeros);

  ApplicationSecrets out;
  out.client =
      traffic_keys(hs.params, derive_secret(md, master, "c ap traffic", transcript_hash));
  out.server =
      traffic_keys(hs.params, derive_secret(md, master, "s ap traffic", transcript_hash));
  out.master_secret = std::move(master);
  return out;
}

Bytes finished_verify_data(const CipherParams& params,
                           std::span<const uint8_t> traffic_secret,
                           std::span<const uint8_t> transcript_hash) {
  Bytes finished_key =
      hkdf_expand_label(params.md, traffic_secret, "finished", {}, params.hash_len);
  Bytes out(params.hash_len);
  unsigned int out_len = 0;
  HMAC(params.md, finished_key.data(), static_cast<int>(finished_key.size()),
       transcript_hash.data(), transcript_hash.size(), out.data(), &out_len);
  out.resize(out_len);
  return out;
}

// --- Record protection ----------------------------------------------------

RecordCipher::RecordCipher(const CipherParams& params, Bytes key, Bytes iv)
    : params_(params), key_(std::move(key)), iv_(std::move(iv)) {}

namespace {

Bytes record_nonce(const Bytes& iv, uint64_t seq) {
  Bytes nonce = iv;
  for (int i = 0; i < 8; ++i)
    nonce[nonce.size() - 1 - i] ^= static_cast<uint8_t>(seq >> (8 * i));
  return nonce;
}

}  // namespace

std::optional<Bytes> RecordCipher::open(std::span<const uint8_t> record_header,
                                        std::span<const uint8_t> ciphertext) {
  constexpr size_t kTagLen = 16;
  if (ciphertext.size() < kTagLen) return std::nullopt;
  Bytes nonce = record_nonce(iv_, seq_);

  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(
      EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  if (!ctx) return std::nullopt;
  if (EVP_DecryptInit_ex(ctx.get(), params_.aead, nullptr, nullptr, nullptr) != 1)
    return std::nullopt;
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN,
                      static_cast<int>(nonce.size()), nullptr);
  if (EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key_.data(), nonce.data()) != 1)
    return std::nullopt;

  int len = 0;
  if (EVP_DecryptUpdate(ctx.get(), nullptr, &len, record_header.data(),
                        static_cast<int>(record_header.size())) != 1)
    return std::nullopt;

  Bytes plain(ciphertext.size() - kTagLen);
  const size_t body_len = ciphertext.size() - kTagLen;
  if (body_len > 0 &&
      EVP_DecryptUpdate(ctx.get(), plain.data(), &len, ciphertext.data(),
                        static_cast<int>(body_len)) != 1)
    return std::nullopt;

  Bytes tag(ciphertext.end() - kTagLen, ciphertext.end());
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_TAG, kTagLen, tag.data());
  int final_len = 0;
  uint8_t dummy[16];
  if (EVP_DecryptFinal_ex(ctx.get(), dummy, &final_len) != 1) return std::nullopt;

  ++seq_;
  // Strip zero padding; last nonzero byte is the inner content type.
  while (!plain.empty() && plain.back() == 0) plain.pop_back();
  if (plain.empty()) return std::nullopt;  // no content type at all
  return plain;
}

Bytes RecordCipher::seal_record(uint8_t inner_type, std::span<const uint8_t> plaintext) {
  constexpr size_t kTagLen = 16;
  Bytes inner(plaintext.begin(), plaintext.end());
  inner.push_back(inner_type);

  const size_t record_len = inner.size() + kTagLen;
  Bytes header{0x17, 0x03, 0x03, static_cast<uint8_t>(record_len >> 8),
               static_cast<uint8_t>(record_len)};

  Bytes nonce = record_nonce(iv_, seq_);
  std::unique_ptr<EVP_CIPHER_CTX, decltype(&EVP_CIPHER_CTX_free)> ctx(
      EVP_CIPHER_CTX_new(), EVP_CIPHER_CTX_free);
  EVP_EncryptInit_ex(ctx.get(), params_.aead, nullptr, nullptr, nullptr);
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_SET_IVLEN,
                      static_cast<int>(nonce.size()), nullptr);
  EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key_.data(), nonce.data());

  int len = 0;
  EVP_EncryptUpdate(ctx.get(), nullptr, &len, header.data(),
                    static_cast<int>(header.size()));
  Bytes cipher(inner.size());
  EVP_EncryptUpdate(ctx.get(), cipher.data(), &len, inner.data(),
                    static_cast<int>(inner.size()));
  int final_len = 0;
  EVP_EncryptFinal_ex(ctx.get(), cipher.data() + len, &final_len);
  Bytes tag(kTagLen);
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_AEAD_GET_TAG, kTagLen, tag.data());

  ++seq_;
  Bytes record = header;
  record.insert(record.end(), cipher.begin(), cipher.end());
  record.insert(record.end(), tag.begin(), tag.end());
  return record;
}

// --- Ephemeral keys --------------------------------------------------------

bool group_supported(uint16_t group) {
  switch (group) {
    case kGroupSecp256r1:
    case kGroupSecp384r1:
    case kGroupSecp521r1:
    case kGroupX25519:
    case kGroupX448:
      return true;
    default:
      return false;
  }
}

namespace {

const char* group_curve_name(uint16_t group) {
  switch (group) {
    case kGroupSecp256r1: return "P-256";
    case kGroupSecp384r1: return "P-384";
    case kGroupSecp521r1: return "P-521";
    default: return nullptr;
  }
}

int group_raw_type(uint16_t group) {
  if (group == kGroupX25519) return EVP_PKEY_X25519;
  if (group == kGroupX448) return EVP_PKEY_X448;
  return 0;
}

Bytes public_octets(EVP_PKEY* pkey, uint16_t group) {
  if (group_raw_type(group) != 0) {
    size_t len = 0;
    EVP_PKEY_get_raw_public_key(pkey, nullptr, &len);
    Bytes out(len);
    EVP_PKEY_get_raw_public_key(pkey, out.data(), &len);
    out.resize(len);
    return out;
  }
  // EC: uncompressed point encoding.
  size_t len = 0;
  EVP_PKEY_get_octet_string_param(pkey, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, nullptr, 0,
                                  &len);
  Bytes out(len);
  EVP_PKEY_get_octet_string_param(pkey, OSSL_PKEY_PARAM_ENCODED_PUBLIC_KEY, out.data(),
                                  out.size(), &len);
  out.resize(len);
  return out;
}

EVP_PKEY* peer_from_octets(uint16_t group, std::span<const uint8_t> peer_public) {
  if (int raw = group_raw_type(group); raw != 0) {
    return EVP_PKEY_new_raw_public_key(raw, nullptr, peer_public.data(),
                                       peer_public.size());
  }
  const char* curve = group_curve_name(group);
  if (!curve) return nullptr;
  OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
  OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, curve, 0);
  OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, peer_public.data(),
                                   peer_public.size());
  OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
  OSSL_PARAM_BLD_free(bld);

  EVP_PKEY* pkey = nullptr;
  EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr);
  if (ctx && EVP_PKEY_fromdata_init(ctx) == 1)
    EVP_PKEY_fromdata(ctx, &pkey, EVP_PKEY_PUBLIC_KEY, params);
  EVP_PKEY_CTX_free(ctx);
  OSSL_PARAM_free(params);
  return pkey;
}

}  // namespace

EphemeralKey::EphemeralKey(EphemeralKey&& other) noexcept
    : group_(other.group_), public_(std::move(other.public_)), pkey_(other.pkey_) {
  other.pkey_ = nullptr;
}

EphemeralKey& EphemeralKey::operator=(EphemeralKey&& other) noexcept {
  if (this != &other) {
    if (pkey_) EVP_PKEY_free(pkey_);
    group_ = other.group_;
    public_ = std::move(other.public_);
    pkey_ = other.pkey_;
    other.pkey_ = nullptr;
  }
  return *this;
}

EphemeralKey::~EphemeralKey() {
  if (pkey_) EVP_PKEY_free(pkey_);
}

std::optional<EphemeralKey> EphemeralKey::generate(uint16_t group) {
  EVP_PKEY* pkey = nullptr;
  if (int raw = group_raw_type(group); raw != 0) {
    EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_id(raw, nullptr);
    if (!ctx) return std::nullopt;
    if (EVP_PKEY_keygen_init(ctx) == 1) EVP_PKEY_keygen(ctx, &pkey);
    EVP_PKEY_CTX_free(ctx);
  } else if (const char* curve = group_curve_name(group)) {
    pkey = EVP_PKEY_Q_keygen(nullptr, nullptr, "EC", curve);
  }
  if (!pkey) return std::nullopt;

  EphemeralKey key;
  key.group_ = group;
  key.pkey_ = pkey;
  key.public_ = public_octets(pkey, group);
  if (key.public_.empty()) return std::nullopt;
  return key;
}

std::optional<EphemeralKey> EphemeralKey::from_private(uint16_t group,
                                                       std::span<const uint8_t> priv) {
  int raw = group_raw_type(group);
  if (raw == 0) return std::nullopt;
  EVP_PKEY* pkey = EVP_PKEY_new_raw_private_key(raw, nullptr, priv.data(), priv.size());
  if (!pkey) return std::nullopt;
  EphemeralKey key;
  key.group_ = group;
  key.pkey_ = pkey;
  key.public_ = public_octets(pkey, group);
  return key;
}

std::optional<Bytes> EphemeralKey::shared_secret(
    std::span<const uint8_t> peer_public) const {
  EVP_PKEY* peer = peer_from_octets(group_, peer_public);
  if (!peer) return std::nullopt;
  std::optional<Bytes> result;
  EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new(pkey_, nullptr);
  if (ctx && EVP_PKEY_derive_init(ctx) == 1 && EVP_PKEY_derive_set_peer(ctx, peer) == 1) {
    size_t len = 0;
    if (EVP_PKEY_derive(ctx, nullptr, &len) == 1) {
      Bytes secret(len);
      if (EVP_PKEY_derive(ctx, secret.data(), &len) == 1) {
        secret.resize(len);
        result = std::move(secret);
      }
    }
  }
  EVP_PKEY_CTX_free(ctx);
  EVP_PKEY_free(peer);
  return result;
}

}  // namespace tlsfp::tls13
