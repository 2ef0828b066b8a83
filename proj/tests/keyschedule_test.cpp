#include <openssl/evp.h>

#include "doctest.h"
#include "tlsfp/keyschedule.hpp"
#include "tlsfp/util.hpp"

using namespace tlsfp;

namespace {

// Initializes namespace-scope constants, so no doctest assertions here.
Bytes hx(std::string_view hex) { return util::from_hex(hex).value(); }

// Published one-round-trip handshake trace, X25519 + AES-128-GCM-SHA256.
const Bytes kClientPriv =
    hx("49af42ba7f7994852d713ef2784bcbcaa7911de26adc5642cb634540e7ea5005");
const Bytes kClientPub =
    hx("99381de560e4bd43d23d8e435a7dbafeb3c06e51c13cae4d5413691e529aaf2c");
const Bytes kServerPriv =
    hx("b1580eeadf6dd589b8ef4f2d5652578cc810e9980191ec8d058308cea216a21e");
const Bytes kServerPub =
    hx("c9828876112095fe66762bdbf7c672e156d6cc253b833df1dd69b1b04e751f0f");
const Bytes kShared =
    hx("8bd4054fb55b9d63fdfbacf9f04b9f0d35e6d63f537563efd46272900f89492d");
const Bytes kHelloHash =
    hx("860c06edc07858ee8e78f0e7428c58edd6b43f2ca3e6e95f02ed063cf0e1cad8");

}  // namespace

TEST_SUITE("keyschedule") {

TEST_CASE("x25519 reconstruction reproduces the trace key pair") {
  auto client = tls13::EphemeralKey::from_private(tls13::kGroupX25519, kClientPriv);
  REQUIRE(client.has_value());
  CHECK(client->group() == tls13::kGroupX25519);
  CHECK(client->public_bytes() == kClientPub);

  auto server = tls13::EphemeralKey::from_private(tls13::kGroupX25519, kServerPriv);
  REQUIRE(server.has_value());
  CHECK(server->public_bytes() == kServerPub);

  auto shared = client->shared_secret(kServerPub);
  REQUIRE(shared.has_value());
  CHECK(*shared == kShared);
  CHECK(server->shared_secret(kClientPub) == shared);
}

TEST_CASE("handshake stage matches the trace byte for byte") {
  auto hs = tls13::derive_handshake_keys(kHelloHash, kShared, 0x1301);
  CHECK(hs.params.suite == 0x1301);
  CHECK(util::to_hex(hs.handshake_secret) ==
        "1dc826e93606aa6fdc0aadc12f741b01046aa6b99f691ed221a9f0ca043fbeac");
  CHECK(util::to_hex(hs.client.secret) ==
        "b3eddb126e067f35a780b3abf45e2d8f3b1a950738f52e9600746a0e27a55a21");
  CHECK(util::to_hex(hs.server.secret) ==
        "b67b7d690cc16c4e75e54213cb2d37b4e9c912bcded9105d42befd59d391ad38");
  CHECK(util::to_hex(hs.server.key) == "3fce516009c21727d0f2e4e86ee403bc");
  CHECK(util::to_hex(hs.server.iv) == "5d313eb2671276ee13000b30");
  CHECK(util::to_hex(hs.client.key) == "dbfaa693d1762c5b666af5d950258d01");
  CHECK(util::to_hex(hs.client.iv) == "5bd3c71b836e0b76bb73265f");
}

TEST_CASE("finished verify data matches the trace") {
  auto hs = tls13::derive_handshake_keys(kHelloHash, kShared, 0x1301);
  auto cv_hash =
      hx("edb7725fa7a3473b031ec8ef65a2485493900138a2b91291407d7951a06110ed");
  auto verify = tls13::finished_verify_data(hs.params, hs.server.secret, cv_hash);
  CHECK(util::to_hex(verify) ==
        "9b9b141d906337fbd2cbdce71df4deda4ab42c309572cb7fffee5454b78f0718");
}

TEST_CASE("application stage matches the trace") {
  auto hs = tls13::derive_handshake_keys(kHelloHash, kShared, 0x1301);
  auto fin_hash =
      hx("9608102a0f1ccc6db6250b7b7e417b1a000eaada3daae4777a7686c9ff83df13");
  auto app = tls13::derive_application_keys(hs, fin_hash);
  CHECK(util::to_hex(app.master_secret) ==
        "18df06843d13a08bf2a449844c5f8a478001bc4d4c627984d5a41da8d0402919");
  CHECK(util::to_hex(app.client.secret) ==
        "9e40646ce79a7f9dc05af8889bce6552875afa0b06df0087f792ebb7c17504a5");
  CHECK(util::to_hex(app.server.secret) ==
        "a11af9f05531f856ad47116b45a950328204b4f44bfb6b3a4b4f1f3fcb631643");
  CHECK(util::to_hex(app.server.key) == "9f02283b6c9c07efc26bb9f2ac92e356");
  CHECK(util::to_hex(app.server.iv) == "cf782b88dd83549aadf1e984");
}

TEST_CASE("hkdf primitives agree with direct EVP computation") {
  const EVP_MD* md = EVP_sha256();
  Bytes salt{0x01, 0x02};
  Bytes ikm{0x0a, 0x0b, 0x0c};
  auto prk = tls13::hkdf_extract(md, salt, ikm);
  CHECK(prk.size() == 32);

  auto okm = tls13::hkdf_expand_label(md, prk, "test", Bytes{0x99}, 40);
  CHECK(okm.size() == 40);
  // Determinism and label sensitivity.
  CHECK(okm == tls13::hkdf_expand_label(md, prk, "test", Bytes{0x99}, 40));
  CHECK(okm != tls13::hkdf_expand_label(md, prk, "tesu", Bytes{0x99}, 40));

  Bytes transcript{1, 2, 3};
  auto th = tls13::transcript_hash(md, transcript);
  CHECK(util::to_hex(th) ==
        "039058c6f2c0cb492c533b0a4d14ef77cc0f78abccced5287d84a1a2011cfb81");
}

TEST_CASE("record protection round trips and rejects tampering") {
  auto hs = tls13::derive_handshake_keys(kHelloHash, kShared, 0x1301);
  tls13::RecordCipher seal(hs.params, hs.server.key, hs.server.iv);
  tls13::RecordCipher open(hs.params, hs.server.key, hs.server.iv);

  Bytes plain{0xde, 0xad, 0xbe, 0xef};
  auto rec1 = seal.seal_record(22, plain);
  auto rec2 = seal.seal_record(22, plain);
  CHECK(rec1 != rec2);  // sequence number advances

  // Record: 5-byte header then ciphertext.
  REQUIRE(rec1.size() > 5);
  std::span<const uint8_t> hdr1(rec1.data(), 5);
  std::span<const uint8_t> body1(rec1.data() + 5, rec1.size() - 5);
  auto opened = open.open(hdr1, body1);
  REQUIRE(opened.has_value());
  Bytes expect = plain;
  expect.push_back(22);  // inner content type is the last byte
  CHECK(*opened == expect);

  Bytes tampered = rec2;
  tampered[7] ^= 0x01;
  std::span<const uint8_t> hdr2(tampered.data(), 5);
  std::span<const uint8_t> body2(tampered.data() + 5, tampered.size() - 5);
  CHECK_FALSE(open.open(hdr2, body2).has_value());
}

TEST_CASE("unsupported suite is refused") {
  CHECK_FALSE(tls13::cipher_params(0x0035).has_value());
  CHECK_THROWS_AS(tls13::derive_handshake_keys(kHelloHash, kShared, 0x0035),
                  tls13::UnsupportedCipher);
}

TEST_CASE("supported groups generate working key pairs") {
  for (uint16_t group : {tls13::kGroupSecp256r1, tls13::kGroupSecp384r1,
                         tls13::kGroupX25519, tls13::kGroupX448}) {
    CAPTURE(group);
    CHECK(tls13::group_supported(group));
    auto a = tls13::EphemeralKey::generate(group);
    auto b = tls13::EphemeralKey::generate(group);
    REQUIRE(a.has_value());
    REQUIRE(b.has_value());
    auto s1 = a->shared_secret(b->public_bytes());
    auto s2 = b->shared_secret(a->public_bytes());
    REQUIRE(s1.has_value());
    CHECK(s1 == s2);
    CHECK_FALSE(s1->empty());
  }
}

}  // TEST_SUITE
