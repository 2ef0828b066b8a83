#include <algorithm>

#include "doctest.h"
#include "helpers.hpp"
#include "tlsfp/forge.hpp"
#include "tlsfp/util.hpp"
#include "tlsfp/wire.hpp"

using namespace tlsfp;

namespace {

// Expected wire bytes of one extension, independent of the encoder under
// test where practical.
Bytes expected_extension_bytes(const wire::ExtensionTemplate& tmpl,
                               const wire::RenderContext& ctx) {
  auto rendered = wire::render_extension(tmpl, ctx);
  REQUIRE(rendered.has_value());
  return *rendered;
}

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("minimal client hello encodes to the hand-computed bytes") {
  wire::ClientHelloSpec spec;
  spec.id = "minimal";
  spec.legacy_version = 0x0303;
  spec.cipher_suites = {0x1301};
  spec.session_id_policy = wire::SessionIdPolicy::Empty;
  spec.extensions.push_back(
      {wire::kExtSupportedVersions, wire::ExtensionTemplate::SupportedVersions{{0x0304}}});

  wire::RenderContext ctx;  // zero client random, no session id needed
  auto bytes = wire::encode_client_hello(spec, ctx);

  std::string expected =
      "010000320303" + std::string(64, '0') + "00" + "00021301" + "0100" +
      "0007" + "002b0003020304";
  CHECK(util::to_hex(bytes) == expected);
}

TEST_CASE("session id policy random-32 needs context bytes") {
  wire::ClientHelloSpec spec;
  spec.id = "s";
  spec.cipher_suites = {0x1301};
  spec.session_id_policy = wire::SessionIdPolicy::Random32;

  wire::RenderContext ctx;
  CHECK_THROWS_AS(wire::encode_client_hello(spec, ctx), wire::UnrenderableTemplate);
  ctx.session_id.assign(32, 0x11);
  auto bytes = wire::encode_client_hello(spec, ctx);
  auto parsed = wire::parse_client_hello(bytes);
  REQUIRE(parsed.has_value());
  CHECK(parsed->session_id == ctx.session_id);
}

TEST_CASE("key share template requires key material for every group") {
  wire::ClientHelloSpec spec;
  spec.id = "ks";
  spec.cipher_suites = {0x1301};
  spec.session_id_policy = wire::SessionIdPolicy::Empty;
  spec.extensions.push_back(
      {wire::kExtKeyShare, wire::ExtensionTemplate::KeyShare{{29, 23}}});
  CHECK(spec.key_share_groups() == std::vector<uint16_t>{29, 23});

  auto ctx = testutil::make_context(spec);
  ctx.key_share_publics.erase(23);
  CHECK_THROWS_AS(wire::encode_client_hello(spec, ctx), wire::UnrenderableTemplate);
}

TEST_CASE("sni placeholder renders only when a domain is present") {
  wire::ExtensionTemplate sni{wire::kExtServerName,
                              wire::ExtensionTemplate::SniPlaceholder{}};
  wire::RenderContext ctx;
  CHECK_FALSE(wire::render_extension(sni, ctx).has_value());
  ctx.sni = "example.test";
  auto rendered = wire::render_extension(sni, ctx);
  REQUIRE(rendered.has_value());
  // server_name_list: one entry of type 0 carrying the name.
  std::string name = "example.test";
  Bytes expect;
  expect.push_back(static_cast<uint8_t>((name.size() + 3) >> 8));
  expect.push_back(static_cast<uint8_t>(name.size() + 3));
  expect.push_back(0);
  expect.push_back(static_cast<uint8_t>(name.size() >> 8));
  expect.push_back(static_cast<uint8_t>(name.size()));
  expect.insert(expect.end(), name.begin(), name.end());
  CHECK(*rendered == expect);
}

TEST_CASE("codec round trip preserves every field and the extension order") {
  auto spaces = {forge::FeatureSpace::iana(), forge::FeatureSpace::scanner()};
  uint64_t seed = 0;
  for (const auto& space : spaces) {
    for (int i = 0; i < 100; ++i) {
      auto spec = forge::random_client_hello(space, ++seed);
      auto ctx = testutil::make_context(spec, "round.trip.test");
      auto bytes = wire::encode_client_hello(spec, ctx);

      auto parsed = wire::parse_client_hello(bytes);
      REQUIRE(parsed.has_value());
      CHECK(parsed->legacy_version == spec.legacy_version);
      CHECK(parsed->cipher_suites == spec.cipher_suites);
      CHECK(parsed->compression_methods == spec.compression_methods);
      if (spec.session_id_policy == wire::SessionIdPolicy::Empty)
        CHECK(parsed->session_id.empty());
      else
        CHECK(parsed->session_id == ctx.session_id);

      // Every template must land, in order, with the bytes the standalone
      // renderer produces.
      REQUIRE(parsed->extensions.size() == spec.extensions.size());
      for (size_t e = 0; e < spec.extensions.size(); ++e) {
        CHECK(parsed->extensions[e].first == spec.extensions[e].ext_id);
        CHECK(parsed->extensions[e].second ==
              expected_extension_bytes(spec.extensions[e], ctx));
      }
    }
  }
}

TEST_CASE("record stream parsing") {
  Bytes payload{1, 2, 3};
  auto framed = wire::frame_records(wire::kContentHandshake, 0x0303, payload);
  auto parsed = wire::parse_records(framed);
  CHECK(parsed.end == wire::StreamEnd::Clean);
  CHECK(parsed.consumed == framed.size());
  REQUIRE(parsed.records.size() == 1);
  CHECK(parsed.records[0].type == wire::kContentHandshake);
  CHECK(parsed.records[0].legacy_version == 0x0303);
  CHECK(parsed.records[0].payload == payload);

  SUBCASE("truncated header") {
    Bytes cut(framed.begin(), framed.begin() + 3);
    CHECK(wire::parse_records(cut).end == wire::StreamEnd::Truncated);
  }
  SUBCASE("truncated body keeps prior records") {
    Bytes two = framed;
    two.insert(two.end(), framed.begin(), framed.end());
    two.pop_back();
    auto p = wire::parse_records(two);
    CHECK(p.end == wire::StreamEnd::Truncated);
    CHECK(p.records.size() == 1);
    CHECK(p.consumed == framed.size());
  }
  SUBCASE("bad content type") {
    Bytes bad = framed;
    bad[0] = 99;
    CHECK(wire::parse_records(bad).end == wire::StreamEnd::MalformedHeader);
  }
  SUBCASE("oversized length") {
    Bytes bad{wire::kContentHandshake, 3, 3, 0xff, 0xff};
    CHECK(wire::parse_records(bad).end == wire::StreamEnd::MalformedHeader);
  }
}

TEST_CASE("framing splits payloads above the record size cap") {
  Bytes big((1 << 14) + 10, 0x5a);
  auto framed = wire::frame_records(wire::kContentHandshake, 0x0303, big);
  auto parsed = wire::parse_records(framed);
  REQUIRE(parsed.records.size() == 2);
  CHECK(parsed.records[0].payload.size() == (1 << 14));
  CHECK(parsed.records[1].payload.size() == 10);
  Bytes joined = parsed.records[0].payload;
  joined.insert(joined.end(), parsed.records[1].payload.begin(),
                parsed.records[1].payload.end());
  CHECK(joined == big);
}

TEST_CASE("reassembler handles split and coalesced messages") {
  // Two handshake messages: type 2 body {aa}, type 8 body {bb, cc}.
  Bytes msg1{2, 0, 0, 1, 0xaa};
  Bytes msg2{8, 0, 0, 2, 0xbb, 0xcc};
  Bytes all = msg1;
  all.insert(all.end(), msg2.begin(), msg2.end());

  SUBCASE("coalesced in one record") {
    wire::MessageReassembler r;
    r.feed(all);
    auto msgs = r.take();
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].msg_type == 2);
    CHECK(msgs[0].body == Bytes{0xaa});
    CHECK(msgs[0].raw == msg1);
    CHECK(msgs[1].msg_type == 8);
    CHECK(msgs[1].body == Bytes{0xbb, 0xcc});
    CHECK_FALSE(r.mid_message());
  }
  SUBCASE("split at every byte boundary") {
    for (size_t cut = 1; cut < all.size(); ++cut) {
      wire::MessageReassembler r;
      r.feed(std::span<const uint8_t>(all.data(), cut));
      r.feed(std::span<const uint8_t>(all.data() + cut, all.size() - cut));
      auto msgs = r.take();
      REQUIRE(msgs.size() == 2);
      CHECK(msgs[1].body == Bytes{0xbb, 0xcc});
      CHECK_FALSE(r.mid_message());
    }
  }
  SUBCASE("incomplete tail stays buffered") {
    wire::MessageReassembler r;
    r.feed(std::span<const uint8_t>(all.data(), all.size() - 1));
    CHECK(r.take().size() == 1);
    CHECK(r.mid_message());
  }
}

TEST_CASE("server hello parsing keeps extension order and spots HRR") {
  // body: version, random, session echo, cipher, compression, extensions.
  auto build_sh = [](const std::array<uint8_t, 32>& random) {
    Bytes b{0x03, 0x03};
    b.insert(b.end(), random.begin(), random.end());
    b.push_back(0);              // empty session echo
    b.push_back(0x13); b.push_back(0x01);
    b.push_back(0);              // compression null
    Bytes exts;
    // supported_versions then key_share, order must survive.
    for (auto [id, body] : std::vector<std::pair<uint16_t, Bytes>>{
             {43, {0x03, 0x04}}, {51, {0x00, 0x1d, 0x00, 0x01, 0x9d}}}) {
      exts.push_back(static_cast<uint8_t>(id >> 8));
      exts.push_back(static_cast<uint8_t>(id));
      exts.push_back(static_cast<uint8_t>(body.size() >> 8));
      exts.push_back(static_cast<uint8_t>(body.size()));
      exts.insert(exts.end(), body.begin(), body.end());
    }
    b.push_back(static_cast<uint8_t>(exts.size() >> 8));
    b.push_back(static_cast<uint8_t>(exts.size()));
    b.insert(b.end(), exts.begin(), exts.end());
    return b;
  };

  std::array<uint8_t, 32> plain{};
  plain.fill(0x42);
  auto sh = wire::parse_handshake_message(wire::kHsServerHello, build_sh(plain), 0);
  CHECK(sh.kind == wire::MsgKind::ServerHello);
  CHECK(sh.legacy_version == 0x0303);
  CHECK(sh.cipher == 0x1301);
  REQUIRE(sh.extensions.size() == 2);
  CHECK(sh.extensions[0].first == 43);
  CHECK(sh.extensions[0].second == Bytes{0x03, 0x04});
  CHECK(sh.extensions[1].first == 51);

  auto hrr = wire::parse_handshake_message(
      wire::kHsServerHello, build_sh(wire::kHelloRetryRequestRandom), 0);
  CHECK(hrr.kind == wire::MsgKind::HelloRetryRequest);
}

TEST_CASE("undersized handshake bodies come back as malformed, not thrown") {
  Bytes junk{0x01, 0x02};
  auto msg = wire::parse_handshake_message(wire::kHsServerHello, junk, 0);
  CHECK(msg.kind == wire::MsgKind::Malformed);
  CHECK(msg.type_code == wire::kHsServerHello);

  auto cert = wire::parse_handshake_message(wire::kHsCertificate, junk, 0x0304);
  CHECK(cert.kind == wire::MsgKind::Malformed);
}

TEST_CASE("certificate parsing for both protocol shapes") {
  Bytes leaf{0x30, 0x82, 0x00, 0x04, 1, 2, 3, 4};  // nonsense DER, length is what counts

  // TLS 1.3: context length 0, then list of (cert, extensions) entries.
  Bytes v13{0x00};
  Bytes entry;
  entry.push_back(0); entry.push_back(0);
  entry.push_back(static_cast<uint8_t>(leaf.size()));
  entry.insert(entry.end(), leaf.begin(), leaf.end());
  entry.push_back(0x00); entry.push_back(0x06);           // extensions block
  for (uint8_t b : {0x00, 0x12, 0x00, 0x02, 0xaa, 0xbb}) entry.push_back(b);
  v13.push_back(0); v13.push_back(0);
  v13.push_back(static_cast<uint8_t>(entry.size()));
  v13.insert(v13.end(), entry.begin(), entry.end());

  auto msg13 = wire::parse_handshake_message(wire::kHsCertificate, v13, 0x0304);
  CHECK(msg13.kind == wire::MsgKind::Certificate);
  REQUIRE(msg13.cert_chain.size() == 1);
  CHECK(msg13.cert_chain[0] == leaf);
  REQUIRE(msg13.cert_entry_extensions.size() == 1);
  REQUIRE(msg13.cert_entry_extensions[0].size() == 1);
  CHECK(msg13.cert_entry_extensions[0][0].first == 18);
  CHECK(msg13.cert_entry_extensions[0][0].second == Bytes{0xaa, 0xbb});

  // TLS 1.2: bare list of certificates.
  Bytes v12;
  size_t entry_len = 3 + leaf.size();
  v12.push_back(0); v12.push_back(0); v12.push_back(static_cast<uint8_t>(entry_len));
  v12.push_back(0); v12.push_back(0); v12.push_back(static_cast<uint8_t>(leaf.size()));
  v12.insert(v12.end(), leaf.begin(), leaf.end());
  auto msg12 = wire::parse_handshake_message(wire::kHsCertificate, v12, 0x0303);
  CHECK(msg12.kind == wire::MsgKind::Certificate);
  REQUIRE(msg12.cert_chain.size() == 1);
  CHECK(msg12.cert_chain[0] == leaf);
  CHECK(msg12.cert_entry_extensions.empty());
}

TEST_CASE("alert and marker constructors") {
  auto alert = wire::ServerMessage::alert(2, 70);
  CHECK(alert.kind == wire::MsgKind::Alert);
  CHECK(alert.alert_level == 2);
  CHECK(alert.alert_description == 70);

  auto marker = wire::ServerMessage::marker(wire::MsgKind::Timeout,
                                            wire::Section::EncryptedExtensions);
  CHECK(marker.kind == wire::MsgKind::Timeout);
  REQUIRE(marker.marker_section.has_value());
  CHECK(*marker.marker_section == wire::Section::EncryptedExtensions);
}

TEST_CASE("client hello parser rejects torn messages") {
  auto spec = testutil::make_probe("torn");
  auto ctx = testutil::make_context(spec, "x.test");
  auto bytes = wire::encode_client_hello(spec, ctx);

  for (size_t cut : {size_t(1), size_t(10), bytes.size() - 1}) {
    Bytes torn(bytes.begin(), bytes.begin() + cut);
    CHECK_FALSE(wire::parse_client_hello(torn).has_value());
  }
  Bytes padded = bytes;
  padded.push_back(0);
  CHECK_FALSE(wire::parse_client_hello(padded).has_value());
}

}  // TEST_SUITE
