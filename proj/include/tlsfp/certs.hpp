// Certificate chain validation and the built-in test CA used by the
// simulator and the test suite.
#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tlsfp/util.hpp"

using X509_STORE = struct x509_store_st;
using EVP_PKEY = struct evp_pkey_st;

namespace tlsfp::certs {

enum class InvalidReason { Expired, NameMismatch, UntrustedRoot, Malformed };

std::string_view reason_text(InvalidReason reason);

struct CertValidity {
  bool valid = false;
  std::optional<InvalidReason> reason;  // set iff !valid

  // "valid" or "invalid(<reason>)".
  std::string text() const;
  static std::optional<CertValidity> parse(std::string_view text);

  bool operator==(const CertValidity&) const = default;
};

class TrustStore {
 public:
  TrustStore();
  ~TrustStore();
  TrustStore(TrustStore&&) noexcept;
  TrustStore& operator=(TrustStore&&) noexcept;
  TrustStore(const TrustStore&) = delete;
  TrustStore& operator=(const TrustStore&) = delete;

  // Loads every .pem/.crt file in the directory. Throws std::runtime_error
  // when the directory is missing; unparseable files are skipped.
  static TrustStore from_directory(const std::string& dir);

  void add_pem(const std::string& pem);
  void add_der(std::span<const uint8_t> der);

  size_t size() const { return count_; }
  X509_STORE* handle() const { return store_; }

 private:
  X509_STORE* store_ = nullptr;
  size_t count_ = 0;
};

// Verifies leaf-first DER chain against the store; when sni is nonempty the
// leaf must also match it. Never throws: every failure maps to a reason.
CertValidity verify_certificate_chain(const std::vector<Bytes>& chain,
                                      const std::string& sni,
                                      const TrustStore& trust);

enum class CertProfile { Valid, Expired, SelfSigned, NameMismatch };

std::string_view cert_profile_name(CertProfile profile);
std::optional<CertProfile> cert_profile_from_name(std::string_view name);

// Deterministic X.509 material: fixed embedded RSA keys, fixed validity
// windows, serials derived from the subject name. Issuing the same
// (name, profile) twice yields byte-identical chains.
class TestCa {
 public:
  static const TestCa& builtin();

  const Bytes& ca_der() const { return ca_der_; }
  std::string ca_pem() const;

  // Leaf-first chain: [leaf, ca] for CA-signed profiles, [leaf] when
  // self-signed.
  std::vector<Bytes> issue_chain(const std::string& name, CertProfile profile) const;

  // Leaf private key PEM for loopback test servers.
  std::string leaf_key_pem() const { return leaf_key_pem_; }
  std::string leaf_cert_pem(const std::string& name, CertProfile profile) const;

 private:
  TestCa();
  ~TestCa();

  EVP_PKEY* ca_key_ = nullptr;
  EVP_PKEY* leaf_key_ = nullptr;
  Bytes ca_der_;
  std::string leaf_key_pem_;
  mutable std::mutex mu_;
  mutable std::unordered_map<std::string, std::vector<Bytes>> cache_;
};

}  // namespace tlsfp::certs
