// Deterministic server simulator: behavior models that answer Client Hellos
// the way a configured TLS stack would, used to exercise the whole toolchain
// without touching a network.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/certs.hpp"
#include "tlsfp/feature.hpp"
#include "tlsfp/forge.hpp"
#include "tlsfp/observation.hpp"
#include "tlsfp/wire.hpp"

namespace tlsfp::sim {

struct PopulationFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One server-sent extension and how its value is produced.
struct ExtGen {
  uint16_t ext_id = 0;
  enum class Kind {
    Empty,
    Fixed,            // value = fixed bytes
    AlpnEcho,         // first own protocol also offered by the client
    KeyShare,         // negotiated group + deterministic public (TLS 1.3)
    SelectedVersion,  // two-byte negotiated version (TLS 1.3)
  } kind = Kind::Empty;
  Bytes fixed;

  bool operator==(const ExtGen&) const = default;
};

// Alert descriptions sent on negotiation failure; level is always fatal.
struct AlertPolicy {
  uint8_t no_version_overlap = 70;
  uint8_t no_cipher_overlap = 40;
  uint8_t no_group_overlap = 40;
  uint8_t missing_sni = 112;
  bool require_sni = false;

  bool operator==(const AlertPolicy&) const = default;
};

struct StatusRequestPolicy {
  enum class Mode { Never, Always, Bernoulli } mode = Mode::Never;
  double p = 0.5;  // Bernoulli only

  bool operator==(const StatusRequestPolicy&) const = default;
};

// A complete server personality. Identical (model, probe, seed) triples
// always produce identical observations.
struct BehaviorModel {
  std::string behavior_id;
  // Preference order; negotiation picks the first version the client admits.
  std::vector<uint16_t> supported_versions{0x0304, 0x0303};
  std::vector<uint16_t> cipher_preference{0x1301, 0x1302, 0x1303, 0xc02f, 0xc030};
  // Emission order for server extensions. Under TLS 1.3, key_share and
  // supported_versions land in the ServerHello and everything else in
  // EncryptedExtensions; under 1.2 and below everything lands in the
  // ServerHello and the 1.3-only generators are skipped.
  std::vector<ExtGen> extension_order;
  std::vector<uint16_t> group_preference{29, 23, 24};
  std::vector<std::string> alpn_protocols;
  AlertPolicy alerts;
  StatusRequestPolicy status_request;  // gates ext 5 on top of extension_order
  bool hrr_when_no_key_share = true;
  bool request_client_cert = false;
  certs::CertProfile cert_profile = certs::CertProfile::Valid;
  std::string cert_name = "server.sim.test";
  std::optional<std::string> http_server_header;
  bool silent = false;  // answers nothing: transport-level timeout
  std::map<std::string, std::string> labels;  // ground truth for target lists

  bool operator==(const BehaviorModel&) const = default;
};

// Runs one probe against one model. The seed fixes every random draw
// (client render context, server randoms, Bernoulli extensions).
HandshakeObservation respond(const BehaviorModel& model,
                             const wire::ClientHelloSpec& spec, uint64_t seed,
                             const std::optional<std::string>& sni);

// Composition of a generated population; counts are additive.
struct PopulationKnobs {
  size_t base_count = 24;       // organic variety
  size_t alpn_only_pairs = 0;   // pairs distinguishable only via ALPN
  size_t bernoulli_status = 0;  // coin-flip status_request servers
  double bernoulli_p = 0.5;
  size_t c2_unique = 0;         // one-off configs labeled c2
  size_t c2_cloned = 0;         // servers sharing a single c2 config
  size_t cdn_count = 0;         // distinct CDN fleets
  size_t cdn_size = 0;          // servers per fleet, sharing one config
  size_t header_split = 0;      // same TLS config, differing Server header
  size_t silent_count = 0;      // never answer
  bool include_tls12 = true;
};

std::vector<BehaviorModel> generate_population(const PopulationKnobs& knobs,
                                               uint64_t seed);

std::string save_population(const std::vector<BehaviorModel>& models);
std::vector<BehaviorModel> load_population(const std::string& text);

// Address space for a population: model i listens on ip_for_index(i):443
// with its cert_name as the target domain.
std::string ip_for_index(size_t index);

class SimNetwork {
 public:
  SimNetwork(std::vector<BehaviorModel> models, uint64_t run_seed);

  // Observation for one probe, addressed by ip. Unknown addresses refuse.
  HandshakeObservation probe(const std::string& ip, uint16_t port,
                             const std::optional<std::string>& domain,
                             const wire::ClientHelloSpec& spec) const;

  const std::vector<BehaviorModel>& models() const { return models_; }
  const BehaviorModel* model_for_ip(const std::string& ip) const;

  // "ip,port,domain,labels..." rows for every model, target-list shaped.
  std::string targets_csv() const;

 private:
  std::vector<BehaviorModel> models_;
  std::map<std::string, size_t> by_ip_;
  uint64_t run_seed_ = 0;
};

// Full response matrix: rows = models, columns = probes, cell = feature
// text (absent when the model yielded no TLS bytes).
forge::ResponseMatrix build_matrix(const std::vector<BehaviorModel>& models,
                                   const std::vector<wire::ClientHelloSpec>& probes,
                                   uint64_t seed,
                                   const feature::ExtractionPolicy& policy);

}  // namespace tlsfp::sim
