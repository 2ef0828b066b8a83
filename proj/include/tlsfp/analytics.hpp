// Downstream analysis over scan snapshots: fingerprint stability across
// measurement rounds, CDN and C2 classification, precision/recall
// evaluation, and feature-configuration comparisons.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/feature.hpp"
#include "tlsfp/pipeline.hpp"

namespace tlsfp::analytics {

struct NoOverlap : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoLabels : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyScope : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MissingProbeData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SnapshotEntry {
  std::string ip;
  uint16_t port = 0;
  std::optional<std::string> domain;
  std::string source;
  std::map<std::string, std::string> labels;
  feature::ServerFingerprint fingerprint;
  // Conjunction over records that carried certificate information.
  std::optional<bool> cert_valid;
  std::optional<std::string> http_server_header;

  std::string identity() const;
};

struct FingerprintSnapshot {
  std::string snapshot_id;
  std::map<std::string, SnapshotEntry> entries;  // identity -> entry
};

// Groups one snapshot's records into per-target fingerprints; probe_ids
// defines completeness. Records with other snapshot ids are ignored.
FingerprintSnapshot build_snapshot(const std::string& snapshot_id,
                                   const std::vector<pipeline::ScanRecord>& records,
                                   const std::vector<std::string>& probe_ids);

// Feature transform applied to every stored string: strip the given ids,
// then optionally project down to the ServerHello-only comparison form.
FingerprintSnapshot apply_policy(const FingerprintSnapshot& snapshot,
                                 const std::set<uint16_t>& strip, bool jarm);

// --- stability --------------------------------------------------------------

struct StabilityReport {
  size_t shared_targets = 0;
  size_t identical = 0;
  double ratio = 0;
};

// Fraction of targets present in both snapshots whose fingerprints match
// after stripping `strip` from every feature. Throws NoOverlap when the
// snapshots share no target.
StabilityReport stability_report(const FingerprintSnapshot& prev,
                                 const FingerprintSnapshot& curr,
                                 const std::set<uint16_t>& strip);

// --- CDN classification -------------------------------------------------

struct CdnModel {
  std::map<std::string, std::string> by_fingerprint;  // canonical text -> label
  std::vector<std::string> conflicts;                 // excluded, with counts
  size_t min_count = 10;
};

// A fingerprint maps to a CDN when that CDN produced it at least min_count
// times with a valid certificate; fingerprints qualifying for two CDNs are
// excluded with a diagnostic. Throws NoLabels when no entry carries a
// "cdn" label. Only complete fingerprints participate.
CdnModel train_cdn(const std::vector<FingerprintSnapshot>& snapshots,
                   size_t min_count = 10);

std::optional<std::string> predict_cdn(const CdnModel& model,
                                       const feature::ServerFingerprint& fingerprint);

// --- C2 classification --------------------------------------------------

struct RateEntry {
  size_t c2_count = 0;
  size_t total_count = 0;
  double rate() const { return total_count == 0 ? 0.0 : double(c2_count) / double(total_count); }
};

struct C2RateTable {
  bool augmented = false;
  std::map<std::string, RateEntry> rates;
};

// Classification key: the fingerprint text, with the HTTP Server header
// folded in when augmentation is on (absent header folds as empty).
std::string c2_key(const feature::ServerFingerprint& fingerprint,
                   const std::optional<std::string>& header, bool augmented);

// Ground truth: the target came from a blocklist source or carries a "c2"
// label.
bool is_c2_truth(const SnapshotEntry& entry, const std::set<std::string>& c2_sources);

C2RateTable train_c2(const std::vector<FingerprintSnapshot>& snapshots,
                     bool augment_http, const std::set<std::string>& c2_sources);

// True iff the key is present and its rate strictly exceeds t.
bool classify_c2(const C2RateTable& table, const std::string& key, double t);

// --- evaluation --------------------------------------------------------

struct LabelStats {
  size_t tp = 0;
  size_t fp = 0;
  size_t pp = 0;
  std::optional<double> precision;  // tp/(tp+fp), absent on zero denominator
  std::optional<double> recall;     // tp/pp, absent on zero denominator
};

struct EvalReport : LabelStats {
  std::map<std::string, LabelStats> per_label;
};

// predictions/truth: identity -> label; scope restricts which identities
// are judged. Throws EmptyScope.
EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, std::string>& truth,
                    const std::set<std::string>& scope);

// Identities in `week` that appear in no training snapshot.
std::set<std::string> new_identities(const std::vector<FingerprintSnapshot>& training,
                                     const FingerprintSnapshot& week);

// --- configuration comparison ----------------------------------------------

struct ConfigSpec {
  std::string name;
  bool jarm_projection = false;
  std::vector<std::string> probe_subset;  // empty = every probe in the dataset
};

struct SweepPoint {
  size_t probe_count = 0;
  LabelStats stats;
};

struct ConfigResult {
  std::string name;
  size_t unique_fingerprints = 0;
  size_t c2_only_fingerprints = 0;  // never seen from a non-c2 target
  size_t c2_targets = 0;            // complete c2 identities under this config
  std::vector<SweepPoint> sweep;    // filled when a threshold is supplied
};

struct ComparisonReport {
  std::vector<ConfigResult> configs;
};

// Uniqueness counts run over training + evaluation entries; the sweep
// trains on `training`, classifies week `eval_snapshot` scoped to its new
// identities, and adds probes in greedy selection order. Throws
// MissingProbeData on an empty dataset or an unknown probe id.
ComparisonReport compare_configs(const std::vector<FingerprintSnapshot>& training,
                                 const FingerprintSnapshot& eval_snapshot,
                                 const std::vector<ConfigSpec>& configs,
                                 std::optional<double> threshold,
                                 const std::set<std::string>& c2_sources);

}  // namespace tlsfp::analytics
