// TLS 1.3 key schedule (HKDF chain) and AEAD record protection, plus the
// ephemeral key-exchange provider used to fill key_share templates.
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "tlsfp/util.hpp"

using EVP_MD = struct evp_md_st;
using EVP_CIPHER = struct evp_cipher_st;
using EVP_PKEY = struct evp_pkey_st;

namespace tlsfp::tls13 {

struct UnsupportedCipher : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CipherParams {
  uint16_t suite = 0;
  const EVP_MD* md = nullptr;
  const EVP_CIPHER* aead = nullptr;
  size_t key_len = 0;
  size_t iv_len = 12;
  size_t hash_len = 0;
};

// Supported suites: 0x1301 AES-128-GCM, 0x1302 AES-256-GCM, 0x1303 ChaCha20.
std::optional<CipherParams> cipher_params(uint16_t suite);

Bytes hkdf_extract(const EVP_MD* md, std::span<const uint8_t> salt,
                   std::span<const uint8_t> ikm);
Bytes hkdf_expand_label(const EVP_MD* md, std::span<const uint8_t> secret,
                        std::string_view label, std::span<const uint8_t> context,
                        size_t length);
Bytes transcript_hash(const EVP_MD* md, std::span<const uint8_t> transcript);

struct TrafficKeys {
  Bytes secret;
  Bytes key;
  Bytes iv;
};

struct HandshakeSecrets {
  CipherParams params;
  Bytes handshake_secret;  // input to the master-secret stage
  TrafficKeys client;
  TrafficKeys server;
};

// Derives client/server handshake traffic secrets and keys from the hash
// of ClientHello..ServerHello and the (EC)DHE shared secret. Reproduces
// the published RFC 8446 key-schedule chain exactly.
HandshakeSecrets derive_handshake_keys(std::span<const uint8_t> hello_transcript_hash,
                                       std::span<const uint8_t> shared_secret,
                                       uint16_t cipher_suite);

struct ApplicationSecrets {
  Bytes master_secret;
  TrafficKeys client;
  TrafficKeys server;
};

// Transcript hash covers ClientHello..server Finished.
ApplicationSecrets derive_application_keys(const HandshakeSecrets& hs,
                                           std::span<const uint8_t> transcript_hash);

// verify_data for a Finished message under the given traffic secret.
Bytes finished_verify_data(const CipherParams& params, std::span<const uint8_t> traffic_secret,
                           std::span<const uint8_t> transcript_hash);

// One direction of record protection; tracks its own sequence number.
class RecordCipher {
 public:
  RecordCipher(const CipherParams& params, Bytes key, Bytes iv);

  // Opens a protected record; returns the inner plaintext with the real
  // content type as its last byte (padding already removed), or nullopt
  // if authentication fails.
  std::optional<Bytes> open(std::span<const uint8_t> record_header,
                            std::span<const uint8_t> ciphertext);

  // Seals plaintext||inner_type into a full ApplicationData record.
  Bytes seal_record(uint8_t inner_type, std::span<const uint8_t> plaintext);

 private:
  CipherParams params_;
  Bytes key_;
  Bytes iv_;
  uint64_t seq_ = 0;
};

// --- Ephemeral key exchange ---------------------------------------------

constexpr uint16_t kGroupSecp256r1 = 23;
constexpr uint16_t kGroupSecp384r1 = 24;
constexpr uint16_t kGroupSecp521r1 = 25;
constexpr uint16_t kGroupX25519 = 29;
constexpr uint16_t kGroupX448 = 30;

bool group_supported(uint16_t group);

class EphemeralKey {
 public:
  static std::optional<EphemeralKey> generate(uint16_t group);
  // Reconstructs a key from raw private bytes (X25519/X448 only; used to
  // replay published handshake traces).
  static std::optional<EphemeralKey> from_private(uint16_t group,
                                                  std::span<const uint8_t> priv);

  uint16_t group() const { return group_; }
  const Bytes& public_bytes() const { return public_; }
  std::optional<Bytes> shared_secret(std::span<const uint8_t> peer_public) const;

  EphemeralKey(EphemeralKey&&) noexcept;
  EphemeralKey& operator=(EphemeralKey&&) noexcept;
  EphemeralKey(const EphemeralKey&) = delete;
  EphemeralKey& operator=(const EphemeralKey&) = delete;
  ~EphemeralKey();

 private:
  EphemeralKey() = default;
  uint16_t group_ = 0;
  Bytes public_;
  EVP_PKEY* pkey_ = nullptr;
};

}  // namespace tlsfp::tls13
