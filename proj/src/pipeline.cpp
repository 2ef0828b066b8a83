#include "tlsfp/pipeline.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <openssl/evp.h>
#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "tlsfp/feature.hpp"
#include "tlsfp/util.hpp"

namespace tlsfp {

std::string_view outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::Completed: return "completed";
    case Outcome::AlertedOnly: return "alerted_only";
    case Outcome::TransportError: return "transport_error";
  }
  return "transport_error";
}

std::string_view transport_error_name(TransportErrorKind kind) {
  switch (kind) {
    case TransportErrorKind::Refused: return "refused";
    case TransportErrorKind::Reset: return "reset";
    case TransportErrorKind::Timeout: return "timeout";
    case TransportErrorKind::Unreachable: return "unreachable";
    case TransportErrorKind::Other: return "other";
  }
  return "other";
}

std::optional<Outcome> outcome_from_name(std::string_view name) {
  if (name == "completed") return Outcome::Completed;
  if (name == "alerted_only") return Outcome::AlertedOnly;
  if (name == "transport_error") return Outcome::TransportError;
  return std::nullopt;
}

std::optional<TransportErrorKind> transport_error_from_name(std::string_view name) {
  if (name == "refused") return TransportErrorKind::Refused;
  if (name == "reset") return TransportErrorKind::Reset;
  if (name == "timeout") return TransportErrorKind::Timeout;
  if (name == "unreachable") return TransportErrorKind::Unreachable;
  if (name == "other") return TransportErrorKind::Other;
  return std::nullopt;
}

}  // namespace tlsfp

namespace tlsfp::pipeline {

using nlohmann::json;

// --- targets ----------------------------------------------------------------

std::string Target::identity() const {
  return ip + "|" + std::to_string(port) + "|" + domain.value_or("");
}

namespace {

bool absent_cell(const std::string& cell) { return cell.empty() || cell == "-"; }

std::optional<uint16_t> parse_port(const std::string& cell) {
  if (cell.empty() || cell.size() > 5) return std::nullopt;
  uint32_t value = 0;
  for (char c : cell) {
    if (c < '0' || c > '9') return std::nullopt;
    value = value * 10 + static_cast<uint32_t>(c - '0');
  }
  if (value == 0 || value > 65535) return std::nullopt;
  return static_cast<uint16_t>(value);
}

void merge_target(std::vector<Target>& out, std::map<std::string, size_t>& index,
                  Target target) {
  auto [it, fresh] = index.try_emplace(target.identity(), out.size());
  if (fresh) {
    out.push_back(std::move(target));
    return;
  }
  Target& existing = out[it->second];
  existing.source = target.source;
  for (auto& [key, value] : target.labels) existing.labels[key] = std::move(value);
}

}  // namespace

std::vector<Target> parse_targets_csv(const std::string& text) {
  std::vector<Target> out;
  std::map<std::string, size_t> index;
  auto lines = util::split_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    size_t line_no = i + 1;
    if (line.empty() || line[0] == '#') continue;
    auto cells = util::csv_split(line);
    if (i == 0 && !cells.empty() && util::lower(cells[0]) == "ip") continue;
    if (cells.size() < 4) throw MalformedRow(line_no, "need ip,port,domain,source");

    Target t;
    if (!absent_cell(cells[0])) t.ip = cells[0];
    auto port = parse_port(cells[1]);
    if (!port) throw MalformedRow(line_no, "bad port: " + cells[1]);
    t.port = *port;
    if (!absent_cell(cells[2])) t.domain = cells[2];
    if (cells[3].empty()) throw MalformedRow(line_no, "empty source");
    t.source = cells[3];
    if (t.ip.empty() && !t.domain) throw MalformedRow(line_no, "neither ip nor domain");

    for (size_t c = 4; c < cells.size(); ++c) {
      if (cells[c].empty()) continue;
      size_t eq = cells[c].find('=');
      if (eq == std::string::npos || eq == 0)
        throw MalformedRow(line_no, "label cell is not key=value: " + cells[c]);
      t.labels[cells[c].substr(0, eq)] = cells[c].substr(eq + 1);
    }
    merge_target(out, index, std::move(t));
  }
  return out;
}

std::vector<Target> ingest_targets(const std::vector<std::string>& paths) {
  std::vector<Target> out;
  std::map<std::string, size_t> index;
  for (const auto& path : paths) {
    for (Target& t : parse_targets_csv(util::read_file(path)))
      merge_target(out, index, std::move(t));
  }
  return out;
}

// --- resolution --------------------------------------------------------

std::optional<std::vector<std::string>> SystemResolver::resolve(
    const std::string& domain) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  int rc = getaddrinfo(domain.c_str(), nullptr, &hints, &result);
  if (rc == EAI_NONAME
#ifdef EAI_NODATA
      || rc == EAI_NODATA
#endif
  )
    return std::vector<std::string>{};
  if (rc != 0) return std::nullopt;

  std::vector<std::string> addresses;
  for (addrinfo* ai = result; ai; ai = ai->ai_next) {
    char buf[INET6_ADDRSTRLEN] = {};
    if (ai->ai_family == AF_INET) {
      auto* sin = reinterpret_cast<sockaddr_in*>(ai->ai_addr);
      inet_ntop(AF_INET, &sin->sin_addr, buf, sizeof(buf));
    } else if (ai->ai_family == AF_INET6) {
      auto* sin6 = reinterpret_cast<sockaddr_in6*>(ai->ai_addr);
      inet_ntop(AF_INET6, &sin6->sin6_addr, buf, sizeof(buf));
    } else {
      continue;
    }
    if (buf[0] && std::find(addresses.begin(), addresses.end(), buf) == addresses.end())
      addresses.emplace_back(buf);
  }
  freeaddrinfo(result);
  return addresses;
}

HostsResolver HostsResolver::from_text(const std::string& text) {
  HostsResolver r;
  for (const auto& line : util::split_lines(text)) {
    std::string trimmed = util::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::vector<std::string> parts;
    size_t pos = 0;
    while (pos < trimmed.size()) {
      size_t ws = trimmed.find_first_of(" \t", pos);
      if (ws == std::string::npos) ws = trimmed.size();
      if (ws > pos) parts.push_back(trimmed.substr(pos, ws - pos));
      pos = ws + 1;
    }
    if (parts.size() < 2) continue;
    for (size_t i = 1; i < parts.size(); ++i) r.add(parts[0], parts[i]);
  }
  return r;
}

void HostsResolver::add(const std::string& domain, const std::string& address) {
  table_[domain].push_back(address);
}

std::optional<std::vector<std::string>> HostsResolver::resolve(
    const std::string& domain) {
  auto it = table_.find(domain);
  if (it == table_.end()) return std::vector<std::string>{};
  return it->second;
}

ResolveResult resolve_targets(const std::vector<Target>& targets,
                              Resolver& resolver) {
  ResolveResult result;
  for (const Target& t : targets) {
    if (!t.ip.empty() || !t.domain) {
      result.targets.push_back(t);
      continue;
    }
    auto addresses = resolver.resolve(*t.domain);
    if (!addresses)
      throw ResolverUnavailable("resolver failed on " + *t.domain,
                                std::move(result));
    if (addresses->empty()) {
      result.skipped.push_back({*t.domain, "no addresses"});
      continue;
    }
    for (const auto& addr : *addresses) {
      Target resolved = t;
      resolved.ip = addr;
      result.targets.push_back(std::move(resolved));
    }
  }
  return result;
}

// --- exclusion -----------------------------------------------------------

namespace {

std::optional<uint32_t> parse_v4(const std::string& text) {
  in_addr addr{};
  if (inet_pton(AF_INET, text.c_str(), &addr) != 1) return std::nullopt;
  return ntohl(addr.s_addr);
}

std::optional<std::array<uint8_t, 16>> parse_v6(const std::string& text) {
  in6_addr addr{};
  if (inet_pton(AF_INET6, text.c_str(), &addr) != 1) return std::nullopt;
  std::array<uint8_t, 16> out;
  std::copy(std::begin(addr.s6_addr), std::end(addr.s6_addr), out.begin());
  return out;
}

bool v6_prefix_match(const std::array<uint8_t, 16>& net,
                     const std::array<uint8_t, 16>& addr, int prefix) {
  int full = prefix / 8;
  for (int i = 0; i < full; ++i)
    if (net[i] != addr[i]) return false;
  int rest = prefix % 8;
  if (rest == 0) return true;
  uint8_t mask = static_cast<uint8_t>(0xff << (8 - rest));
  return (net[full] & mask) == (addr[full] & mask);
}

}  // namespace

CidrSet CidrSet::from_text(const std::string& text) {
  CidrSet set;
  for (const auto& line : util::split_lines(text)) {
    std::string trimmed = util::trim(line);
    if (trimmed.empty() || trimmed[0] == '#') continue;
    set.add(trimmed);
  }
  return set;
}

void CidrSet::add(const std::string& cidr) {
  std::string address = cidr;
  int prefix = -1;
  if (size_t slash = cidr.find('/'); slash != std::string::npos) {
    address = cidr.substr(0, slash);
    std::string tail = cidr.substr(slash + 1);
    if (tail.empty() || tail.size() > 3) throw std::invalid_argument("bad prefix: " + cidr);
    prefix = 0;
    for (char c : tail) {
      if (c < '0' || c > '9') throw std::invalid_argument("bad prefix: " + cidr);
      prefix = prefix * 10 + (c - '0');
    }
  }
  if (auto v4 = parse_v4(address)) {
    if (prefix < 0) prefix = 32;
    if (prefix > 32) throw std::invalid_argument("v4 prefix > 32: " + cidr);
    v4_.emplace_back(*v4, prefix);
    return;
  }
  if (auto v6 = parse_v6(address)) {
    if (prefix < 0) prefix = 128;
    if (prefix > 128) throw std::invalid_argument("v6 prefix > 128: " + cidr);
    v6_.emplace_back(*v6, prefix);
    return;
  }
  throw std::invalid_argument("not an address or CIDR: " + cidr);
}

bool CidrSet::contains(const std::string& ip) const {
  if (auto v4 = parse_v4(ip)) {
    for (const auto& [net, prefix] : v4_) {
      uint32_t mask = prefix == 0 ? 0 : ~uint32_t{0} << (32 - prefix);
      if ((*v4 & mask) == (net & mask)) return true;
    }
    return false;
  }
  if (auto v6 = parse_v6(ip)) {
    for (const auto& [net, prefix] : v6_)
      if (v6_prefix_match(net, *v6, prefix)) return true;
  }
  return false;
}

// --- planning ---------------------------------------------------------------

ScanPlan plan_scan(const std::vector<Target>& targets,
                   const std::vector<wire::ClientHelloSpec>& pool,
                   int64_t window_ms, double rate, const CidrSet& exclude,
                   uint64_t seed) {
  if (window_ms <= 0) throw std::invalid_argument("window must be positive");
  if (rate <= 0) throw std::invalid_argument("rate must be positive");

  std::vector<const Target*> kept;
  for (const Target& t : targets)
    if (t.ip.empty() || !exclude.contains(t.ip)) kept.push_back(&t);

  ScanPlan plan;
  plan.window_ms = window_ms;
  plan.rate = rate;
  if (kept.empty() || pool.empty()) return plan;

  for (const Target* t : kept) {
    for (const auto& spec : pool) {
      WorkItem item;
      item.target = *t;
      item.probe_id = spec.id;
      plan.items.push_back(std::move(item));
    }
  }

  util::Rng rng(util::derive_seed(seed, "scan-plan"));
  rng.shuffle(plan.items);

  // Evenly spaced per-address slots at a random phase: every address's
  // probes span (1 - 1/|pool|) of the window.
  int64_t step = std::max<int64_t>(1, window_ms / static_cast<int64_t>(pool.size()));
  std::map<std::string, std::pair<int64_t, size_t>> schedule;  // identity -> phase, next slot
  for (auto& item : plan.items) {
    auto [it, fresh] = schedule.try_emplace(item.target.identity(), 0, 0);
    if (fresh) it->second.first = static_cast<int64_t>(rng.below(static_cast<uint32_t>(step)));
    item.not_before_ms = it->second.first + static_cast<int64_t>(it->second.second) * step;
    ++it->second.second;
  }
  std::stable_sort(plan.items.begin(), plan.items.end(),
                   [](const WorkItem& a, const WorkItem& b) {
                     return a.not_before_ms < b.not_before_ms;
                   });
  return plan;
}

// --- clocks -----------------------------------------------------------------

int64_t RealClock::now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

void RealClock::sleep_until_ms(int64_t deadline) {
  int64_t now = now_ms();
  if (deadline > now)
    std::this_thread::sleep_for(std::chrono::milliseconds(deadline - now));
}

int64_t SimClock::now_ms() {
  std::lock_guard lock(mu_);
  return now_;
}

void SimClock::sleep_until_ms(int64_t deadline) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, deadline);
}

RateLimiter::RateLimiter(double rate) : rate_(rate) {
  if (rate <= 0) throw std::invalid_argument("rate must be positive");
  min_gap_ms_ = static_cast<int64_t>(std::ceil(1000.0 / rate_));
  if (min_gap_ms_ < 1) min_gap_ms_ = 1;
}

int64_t RateLimiter::acquire(Clock& clock) {
  std::lock_guard lock(mu_);
  int64_t now = clock.now_ms();
  int64_t grant = last_ms_ < 0 ? now : std::max(now, last_ms_ + min_gap_ms_);
  clock.sleep_until_ms(grant);
  last_ms_ = grant;
  log_.push_back(grant);
  return grant;
}

size_t max_probes_per_second(const std::vector<int64_t>& launches_ms) {
  std::vector<int64_t> sorted = launches_ms;
  std::sort(sorted.begin(), sorted.end());
  size_t best = 0;
  size_t lo = 0;
  for (size_t hi = 0; hi < sorted.size(); ++hi) {
    while (sorted[hi] - sorted[lo] >= 1000) ++lo;
    best = std::max(best, hi - lo + 1);
  }
  return best;
}

// --- records ---------------------------------------------------------------

std::string ScanRecord::target_identity() const {
  return ip + "|" + std::to_string(port) + "|" + domain.value_or("");
}

std::string record_to_json(const ScanRecord& record) {
  json j;
  j["snapshot"] = record.snapshot_id;
  j["ip"] = record.ip;
  j["port"] = record.port;
  if (record.domain) j["domain"] = *record.domain;
  j["source"] = record.source;
  if (!record.labels.empty()) {
    json labels = json::object();
    for (const auto& [key, value] : record.labels) labels[key] = value;
    j["labels"] = std::move(labels);
  }
  j["probe"] = record.probe_id;
  j["ts"] = record.timestamp_ms;
  j["outcome"] = std::string(outcome_name(record.outcome));
  if (record.outcome == Outcome::TransportError)
    j["error"] = std::string(transport_error_name(record.transport_error));
  if (record.feature) j["feature"] = *record.feature;
  if (record.cert_validity) j["cert"] = record.cert_validity->text();
  if (record.http_server_header) j["server_header"] = *record.http_server_header;
  return j.dump();
}

ScanRecord record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw RecordFormatError(std::string("record is not JSON: ") + e.what());
  }
  try {
    ScanRecord r;
    r.snapshot_id = j.at("snapshot").get<std::string>();
    r.ip = j.at("ip").get<std::string>();
    r.port = j.at("port").get<uint16_t>();
    if (j.contains("domain")) r.domain = j["domain"].get<std::string>();
    r.source = j.at("source").get<std::string>();
    if (j.contains("labels"))
      for (const auto& [key, value] : j["labels"].items())
        r.labels[key] = value.get<std::string>();
    r.probe_id = j.at("probe").get<std::string>();
    r.timestamp_ms = j.at("ts").get<int64_t>();
    auto outcome = outcome_from_name(j.at("outcome").get<std::string>());
    if (!outcome) throw RecordFormatError("unknown outcome");
    r.outcome = *outcome;
    if (j.contains("error")) {
      auto kind = transport_error_from_name(j["error"].get<std::string>());
      if (!kind) throw RecordFormatError("unknown transport error");
      r.transport_error = *kind;
    }
    if (j.contains("feature")) r.feature = j["feature"].get<std::string>();
    if ((r.outcome != Outcome::TransportError) != r.feature.has_value())
      throw RecordFormatError("feature presence contradicts outcome");
    if (j.contains("cert")) {
      r.cert_validity = certs::CertValidity::parse(j["cert"].get<std::string>());
      if (!r.cert_validity) throw RecordFormatError("bad cert validity");
    }
    if (j.contains("server_header"))
      r.http_server_header = j["server_header"].get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw RecordFormatError(std::string("bad record: ") + e.what());
  }
}

RecordStore::RecordStore(const std::string& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw StoreFailure("cannot open record store: " + path);
}

RecordStore::~RecordStore() {
  if (file_) std::fclose(file_);
}

void RecordStore::append(const ScanRecord& record) {
  std::string line = record_to_json(record);
  line.push_back('\n');
  std::lock_guard lock(mu_);
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() ||
      std::fflush(file_) != 0)
    throw StoreFailure("write failed: " + path_);
  ++written_;
}

std::vector<ScanRecord> load_records(const std::string& path) {
  std::vector<ScanRecord> out;
  for (const auto& line : util::split_lines(util::read_file(path))) {
    if (line.empty()) continue;
    out.push_back(record_from_json(line));
  }
  return out;
}

// --- execution --------------------------------------------------------------

ScanSummary run_scan(const ScanPlan& plan,
                     const std::vector<wire::ClientHelloSpec>& pool,
                     const std::string& snapshot_id, const ProbeFn& probe,
                     Clock& clock, RateLimiter& limiter, RecordStore& store,
                     size_t concurrency) {
  std::map<std::string, const wire::ClientHelloSpec*> by_id;
  for (const auto& spec : pool) by_id[spec.id] = &spec;
  for (const auto& item : plan.items)
    if (!by_id.count(item.probe_id))
      throw std::invalid_argument("plan references unknown probe: " + item.probe_id);

  const int64_t start = clock.now_ms();
  std::atomic<size_t> next{0};
  std::atomic<size_t> succeeded{0};
  std::atomic<size_t> transport_errors{0};
  std::mutex error_mu;
  std::exception_ptr first_error;

  auto worker = [&] {
    feature::ExtractionPolicy stored = feature::ExtractionPolicy::raw();
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= plan.items.size()) return;
      const WorkItem& item = plan.items[i];
      try {
        clock.sleep_until_ms(start + item.not_before_ms);
        int64_t launched = limiter.acquire(clock);

        HandshakeObservation obs = probe(item.target, *by_id.at(item.probe_id));

        ScanRecord record;
        record.snapshot_id = snapshot_id;
        record.ip = item.target.ip;
        record.port = item.target.port;
        record.domain = item.target.domain;
        record.source = item.target.source;
        record.labels = item.target.labels;
        record.probe_id = item.probe_id;
        record.timestamp_ms = launched;
        record.outcome = obs.outcome;
        if (obs.outcome == Outcome::TransportError) {
          record.transport_error = obs.transport_error;
          transport_errors.fetch_add(1);
        } else {
          record.feature = feature::extract_features(obs, stored).text;
          succeeded.fetch_add(1);
        }
        record.cert_validity = obs.cert_validity;
        record.http_server_header = obs.http_server_header;
        store.append(record);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        next.store(plan.items.size());  // stop all workers
        return;
      }
    }
  };

  size_t n = std::max<size_t>(1, concurrency);
  std::vector<std::thread> threads;
  for (size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  ScanSummary summary;
  summary.succeeded = succeeded.load();
  summary.transport_errors = transport_errors.load();
  summary.attempted = summary.succeeded + summary.transport_errors;
  return summary;
}

// --- manifests ---------------------------------------------------------

std::string manifest_to_json(const SnapshotManifest& manifest) {
  json j;
  j["snapshot"] = manifest.snapshot_id;
  j["record_files"] = manifest.record_files;
  j["probe_pool_sha256"] = manifest.probe_pool_sha256;
  j["created_ms"] = manifest.created_ms;
  return j.dump(2) + "\n";
}

SnapshotManifest manifest_from_json(const std::string& text) {
  try {
    json j = json::parse(text);
    SnapshotManifest m;
    m.snapshot_id = j.at("snapshot").get<std::string>();
    m.record_files = j.at("record_files").get<std::vector<std::string>>();
    m.probe_pool_sha256 = j.at("probe_pool_sha256").get<std::string>();
    m.created_ms = j.at("created_ms").get<int64_t>();
    return m;
  } catch (const json::exception& e) {
    throw RecordFormatError(std::string("bad manifest: ") + e.what());
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  return util::to_hex({digest, digest + len});
}

}  // namespace tlsfp::pipeline
