// Measurement orchestration: target ingestion and resolution, randomized
// cross-product planning with pacing, rate-limited execution, and the
// append-only record store grouped into snapshots.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/certs.hpp"
#include "tlsfp/observation.hpp"
#include "tlsfp/wire.hpp"

namespace tlsfp::pipeline {

struct MalformedRow : std::runtime_error {
  size_t line;
  MalformedRow(size_t line_number, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
};
struct StoreFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RecordFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- targets ---------------------------------------------------------------

struct Target {
  std::string ip;  // empty until resolved
  uint16_t port = 443;
  std::optional<std::string> domain;
  std::string source;
  std::map<std::string, std::string> labels;

  // The scanned combination of address, port, and name.
  std::string identity() const;
  bool operator==(const Target&) const = default;
};

// Rows: ip,port,domain,source followed by any number of key=value label
// cells. Empty or "-" ip/domain cells mean absent. A leading header row
// starting with "ip" is skipped. Duplicate identities collapse into one
// target with later labels winning key collisions.
std::vector<Target> parse_targets_csv(const std::string& text);
std::vector<Target> ingest_targets(const std::vector<std::string>& paths);

// --- resolution --------------------------------------------------------

struct SkipEntry {
  std::string domain;
  std::string reason;
};

struct ResolveResult {
  std::vector<Target> targets;
  std::vector<SkipEntry> skipped;
};

struct ResolverUnavailable : std::runtime_error {
  ResolveResult partial;  // skip report up to the failure
  ResolverUnavailable(const std::string& what, ResolveResult partial_result)
      : std::runtime_error(what), partial(std::move(partial_result)) {}
};

class Resolver {
 public:
  virtual ~Resolver() = default;
  // All addresses for a name, both families; empty = name does not exist;
  // nullopt = the resolver itself failed.
  virtual std::optional<std::vector<std::string>> resolve(const std::string& domain) = 0;
};

class SystemResolver : public Resolver {
 public:
  std::optional<std::vector<std::string>> resolve(const std::string& domain) override;
};

// Fixed name→address table; the deterministic stand-in for tests and sims.
class HostsResolver : public Resolver {
 public:
  // Lines: "name addr [addr...]", '#' comments.
  static HostsResolver from_text(const std::string& text);
  void add(const std::string& domain, const std::string& address);
  std::optional<std::vector<std::string>> resolve(const std::string& domain) override;

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

// Fans out domain-only targets to one target per resolved address; targets
// that already carry an address pass through. Unresolvable names land in
// the skip report. Throws ResolverUnavailable on resolver failure.
ResolveResult resolve_targets(const std::vector<Target>& targets, Resolver& resolver);

// --- exclusion -----------------------------------------------------------

class CidrSet {
 public:
  // One CIDR per line, '#' comments; bare addresses mean /32 (or /128).
  static CidrSet from_text(const std::string& text);
  void add(const std::string& cidr);  // throws std::invalid_argument
  bool contains(const std::string& ip) const;
  size_t size() const { return v4_.size() + v6_.size(); }

 private:
  std::vector<std::pair<uint32_t, int>> v4_;                  // address, prefix
  std::vector<std::pair<std::array<uint8_t, 16>, int>> v6_;
};

// --- planning ---------------------------------------------------------------

struct WorkItem {
  Target target;
  std::string probe_id;
  int64_t not_before_ms = 0;  // offset from scan start
};

struct ScanPlan {
  std::vector<WorkItem> items;  // execution order
  int64_t window_ms = 0;
  double rate = 0;  // probes per second, global cap
};

// Shuffled cross product of targets × pool, excluded CIDRs removed first.
// Each target's probes are spread evenly across the window at a random
// phase, so per-address traffic spans most of it. Deterministic per seed.
ScanPlan plan_scan(const std::vector<Target>& targets,
                   const std::vector<wire::ClientHelloSpec>& pool,
                   int64_t window_ms, double rate, const CidrSet& exclude,
                   uint64_t seed);

// --- clock & rate limit ------------------------------------------------

class Clock {
 public:
  virtual ~Clock() = default;
  virtual int64_t now_ms() = 0;
  virtual void sleep_until_ms(int64_t deadline) = 0;
};

class RealClock : public Clock {
 public:
  int64_t now_ms() override;
  void sleep_until_ms(int64_t deadline) override;
};

// Virtual time: sleeping jumps the clock forward, so planned schedules
// execute instantly while preserving every ordering constraint.
class SimClock : public Clock {
 public:
  int64_t now_ms() override;
  void sleep_until_ms(int64_t deadline) override;

 private:
  std::mutex mu_;
  int64_t now_ = 0;
};

// Serializes launches at least 1000/rate ms apart, which bounds any
// one-second window to at most `rate` probes. Launch times are recorded
// for audits.
class RateLimiter {
 public:
  explicit RateLimiter(double rate);
  int64_t acquire(Clock& clock);  // returns the granted launch time
  const std::vector<int64_t>& launch_log() const { return log_; }

 private:
  std::mutex mu_;
  double rate_;
  int64_t min_gap_ms_;
  int64_t last_ms_ = -1;
  std::vector<int64_t> log_;
};

// Highest probe count in any sliding one-second window of a launch log.
size_t max_probes_per_second(const std::vector<int64_t>& launches_ms);

// --- records ---------------------------------------------------------------

struct ScanRecord {
  std::string snapshot_id;
  std::string ip;
  uint16_t port = 0;
  std::optional<std::string> domain;
  std::string source;
  std::map<std::string, std::string> labels;
  std::string probe_id;
  int64_t timestamp_ms = 0;
  Outcome outcome = Outcome::TransportError;
  TransportErrorKind transport_error = TransportErrorKind::Other;
  std::optional<std::string> feature;  // present iff outcome != TransportError
  std::optional<certs::CertValidity> cert_validity;
  std::optional<std::string> http_server_header;

  std::string target_identity() const;
  bool operator==(const ScanRecord&) const = default;
};

std::string record_to_json(const ScanRecord& record);
ScanRecord record_from_json(const std::string& line);  // throws RecordFormatError

// Append-only JSONL store; append is safe from any number of workers.
class RecordStore {
 public:
  explicit RecordStore(const std::string& path);  // throws StoreFailure
  ~RecordStore();
  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  void append(const ScanRecord& record);  // throws StoreFailure
  const std::string& path() const { return path_; }
  size_t written() const { return written_; }

 private:
  std::mutex mu_;
  std::string path_;
  FILE* file_ = nullptr;
  size_t written_ = 0;
};

std::vector<ScanRecord> load_records(const std::string& path);

// --- execution --------------------------------------------------------------

using ProbeFn = std::function<HandshakeObservation(const Target&,
                                                   const wire::ClientHelloSpec&)>;

struct ScanSummary {
  size_t attempted = 0;
  size_t succeeded = 0;
  size_t transport_errors = 0;
};

// Bounded workers drain the plan in order; every item yields exactly one
// record stamped with snapshot_id. SNI = target domain when present.
ScanSummary run_scan(const ScanPlan& plan,
                     const std::vector<wire::ClientHelloSpec>& pool,
                     const std::string& snapshot_id, const ProbeFn& probe,
                     Clock& clock, RateLimiter& limiter, RecordStore& store,
                     size_t concurrency);

// --- snapshot manifest ------------------------------------------------

struct SnapshotManifest {
  std::string snapshot_id;
  std::vector<std::string> record_files;
  std::string probe_pool_sha256;
  int64_t created_ms = 0;
};

std::string manifest_to_json(const SnapshotManifest& manifest);
SnapshotManifest manifest_from_json(const std::string& text);  // throws RecordFormatError

std::string sha256_hex(std::string_view data);

}  // namespace tlsfp::pipeline
