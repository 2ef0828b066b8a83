// Command-line front end. Every subcommand is a thin mapping onto library
// operations; all formats are the ones the owning modules define.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "tlsfp/analytics.hpp"
#include "tlsfp/engine.hpp"
#include "tlsfp/feature.hpp"
#include "tlsfp/forge.hpp"
#include "tlsfp/pipeline.hpp"
#include "tlsfp/sim.hpp"
#include "tlsfp/spec_io.hpp"
#include "tlsfp/util.hpp"

namespace {

using namespace tlsfp;

struct GlobalFlags {
  uint64_t seed = 1;
  bool verbose = false;
  std::string output_dir;
};

// Relative output paths land under --output-dir when one is given.
std::string out_path(const GlobalFlags& g, const std::string& path) {
  if (g.output_dir.empty() || path.empty() || path[0] == '/') return path;
  std::filesystem::create_directories(g.output_dir);
  return (std::filesystem::path(g.output_dir) / path).string();
}

void vlog(const GlobalFlags& g, const std::string& message) {
  if (g.verbose) std::cerr << message << "\n";
}

std::vector<wire::ClientHelloSpec> generate_pool(const forge::FeatureSpace& space,
                                                 size_t count, uint64_t seed) {
  std::vector<wire::ClientHelloSpec> pool;
  pool.reserve(count);
  for (size_t i = 0; i < count; ++i)
    pool.push_back(forge::random_client_hello(
        space, util::derive_seed(seed, "pool", "probe", i)));
  return pool;
}

std::vector<std::string> pool_ids(const std::vector<wire::ClientHelloSpec>& pool) {
  std::vector<std::string> ids;
  ids.reserve(pool.size());
  for (const auto& spec : pool) ids.push_back(spec.id);
  return ids;
}

// Snapshot id of a record file: the one id all its records carry.
std::string snapshot_id_of(const std::vector<pipeline::ScanRecord>& records,
                           const std::string& path) {
  if (records.empty()) throw std::runtime_error("no records in " + path);
  const std::string& id = records.front().snapshot_id;
  for (const auto& r : records)
    if (r.snapshot_id != id)
      throw std::runtime_error(path + " mixes snapshot ids; split the file");
  return id;
}

analytics::FingerprintSnapshot load_snapshot(const std::string& path,
                                             const std::vector<std::string>& probes) {
  auto records = pipeline::load_records(path);
  return analytics::build_snapshot(snapshot_id_of(records, path), records, probes);
}

void print_stats(const char* label, const analytics::LabelStats& stats) {
  std::printf("%s tp=%zu fp=%zu pp=%zu precision=%s recall=%s\n", label, stats.tp,
              stats.fp, stats.pp,
              stats.precision ? std::to_string(*stats.precision).c_str() : "n/a",
              stats.recall ? std::to_string(*stats.recall).c_str() : "n/a");
}

// --- subcommand bodies ---------------------------------------------------

int cmd_probes_gen(const GlobalFlags& g, const std::string& space_name,
                   size_t count, const std::string& out) {
  forge::FeatureSpace space;
  if (space_name == "iana")
    space = forge::FeatureSpace::iana();
  else if (space_name == "scanner")
    space = forge::FeatureSpace::scanner();
  else
    throw std::runtime_error("unknown feature space: " + space_name);

  auto pool = generate_pool(space, count, g.seed);
  spec_io::save_pool(out_path(g, out), pool);
  vlog(g, "wrote " + std::to_string(pool.size()) + " probes to " + out);
  return 0;
}

int cmd_probes_select(const GlobalFlags& g, const std::string& matrix_path,
                      size_t k, size_t shortlist, const std::string& out) {
  auto matrix = forge::ResponseMatrix::from_csv(util::read_file(matrix_path));

  forge::ResponseMatrix* selectable = &matrix;
  forge::ResponseMatrix shortlisted;
  if (shortlist > 0 && shortlist < matrix.columns.size()) {
    auto ranked = forge::rank_singletons(matrix);
    ranked.resize(shortlist);
    std::set<std::string> keep(ranked.begin(), ranked.end());
    shortlisted.row_ids = matrix.row_ids;
    for (size_t c = 0; c < matrix.columns.size(); ++c) {
      if (!keep.count(matrix.columns[c])) continue;
      shortlisted.columns.push_back(matrix.columns[c]);
    }
    for (size_t r = 0; r < matrix.cells.size(); ++r) {
      std::vector<std::optional<std::string>> row;
      for (size_t c = 0; c < matrix.columns.size(); ++c)
        if (keep.count(matrix.columns[c])) row.push_back(matrix.cells[r][c]);
      shortlisted.cells.push_back(std::move(row));
    }
    selectable = &shortlisted;
    vlog(g, "shortlisted " + std::to_string(shortlisted.columns.size()) + " probes");
  }

  auto selected = forge::greedy_select(*selectable, std::min(k, selectable->columns.size()));
  std::string text;
  for (size_t i = 0; i < selected.size(); ++i) {
    std::vector<std::string> chosen(selected.begin(), selected.begin() + i + 1);
    size_t count = forge::distinct_behavior_count(*selectable, chosen);
    std::printf("%zu,%s,%zu\n", i + 1, selected[i].c_str(), count);
    text += selected[i];
    text += '\n';
  }
  if (!out.empty()) util::write_file(out_path(g, out), text);
  return 0;
}

pipeline::CidrSet load_excludes(const std::string& path) {
  if (path.empty()) return {};
  return pipeline::CidrSet::from_text(util::read_file(path));
}

int cmd_scan(const GlobalFlags& g, const std::vector<std::string>& target_files,
             const std::string& probes_path, double rate, int64_t window_ms,
             const std::string& exclude_path, const std::string& snapshot_id,
             const std::string& resolver_spec, size_t concurrency,
             bool fetch_http_header, const std::string& out,
             const std::string& manifest_path, const std::string& ca_dir,
             const std::string& keylog) {
  auto pool = spec_io::load_pool(probes_path);
  auto targets = pipeline::ingest_targets(target_files);

  std::unique_ptr<pipeline::Resolver> resolver;
  if (resolver_spec == "system") {
    resolver = std::make_unique<pipeline::SystemResolver>();
  } else if (resolver_spec.rfind("hosts:", 0) == 0) {
    resolver = std::make_unique<pipeline::HostsResolver>(
        pipeline::HostsResolver::from_text(util::read_file(resolver_spec.substr(6))));
  } else if (resolver_spec != "none") {
    throw std::runtime_error("unknown resolver: " + resolver_spec);
  }
  if (resolver) {
    auto resolved = pipeline::resolve_targets(targets, *resolver);
    for (const auto& skip : resolved.skipped)
      std::fprintf(stderr, "skip %s: %s\n", skip.domain.c_str(), skip.reason.c_str());
    targets = std::move(resolved.targets);
  }

  auto plan = pipeline::plan_scan(targets, pool, window_ms, rate,
                                  load_excludes(exclude_path), g.seed);
  vlog(g, "plan: " + std::to_string(plan.items.size()) + " work items");

  certs::TrustStore trust = ca_dir.empty() ? certs::TrustStore()
                                           : certs::TrustStore::from_directory(ca_dir);
  engine::EngineConfig config;
  config.fetch_http_header = fetch_http_header;
  config.trust_store = &trust;
  config.keylog_path = keylog;
  config.validate();

  pipeline::ProbeFn probe = [&](const pipeline::Target& target,
                                const wire::ClientHelloSpec& spec) {
    engine::Endpoint endpoint{target.ip, target.port, target.domain};
    return engine::perform_handshake(endpoint, spec, config);
  };

  pipeline::RealClock clock;
  pipeline::RateLimiter limiter(rate);
  pipeline::RecordStore store(out_path(g, out));
  auto summary = pipeline::run_scan(plan, pool, snapshot_id, probe, clock, limiter,
                                    store, concurrency);
  std::printf("attempted=%zu succeeded=%zu transport_errors=%zu\n",
              summary.attempted, summary.succeeded, summary.transport_errors);

  if (!manifest_path.empty()) {
    pipeline::SnapshotManifest manifest;
    manifest.snapshot_id = snapshot_id;
    manifest.record_files = {store.path()};
    manifest.probe_pool_sha256 = pipeline::sha256_hex(util::read_file(probes_path));
    manifest.created_ms = clock.now_ms();
    util::write_file(out_path(g, manifest_path),
                     pipeline::manifest_to_json(manifest));
  }
  return 0;
}

int cmd_simulate(const GlobalFlags& g, const std::string& population_path,
                 const sim::PopulationKnobs& knobs, const std::string& probes_path,
                 const std::string& snapshot_id, const std::string& out,
                 const std::string& save_population_path,
                 const std::string& targets_out, const std::string& matrix_out,
                 double rate, int64_t window_ms, size_t concurrency) {
  auto pool = spec_io::load_pool(probes_path);

  std::vector<sim::BehaviorModel> population;
  if (!population_path.empty())
    population = sim::load_population(util::read_file(population_path));
  else
    population = sim::generate_population(knobs, g.seed);
  vlog(g, "population: " + std::to_string(population.size()) + " behaviors");

  if (!save_population_path.empty())
    util::write_file(out_path(g, save_population_path),
                     sim::save_population(population));

  // Different snapshots draw different coins, same snapshot reruns agree.
  sim::SimNetwork network(population, util::derive_seed(g.seed, snapshot_id));
  if (!targets_out.empty())
    util::write_file(out_path(g, targets_out), network.targets_csv());

  if (!matrix_out.empty()) {
    auto matrix = sim::build_matrix(population, pool, util::derive_seed(g.seed, snapshot_id),
                                    feature::ExtractionPolicy::raw());
    util::write_file(out_path(g, matrix_out), matrix.to_csv());
  }

  if (out.empty()) return 0;

  auto targets = pipeline::parse_targets_csv(network.targets_csv());
  auto plan = pipeline::plan_scan(targets, pool, window_ms, rate, {}, g.seed);

  pipeline::ProbeFn probe = [&](const pipeline::Target& target,
                                const wire::ClientHelloSpec& spec) {
    return network.probe(target.ip, target.port, target.domain, spec);
  };

  pipeline::SimClock clock;
  pipeline::RateLimiter limiter(rate);
  pipeline::RecordStore store(out_path(g, out));
  auto summary = pipeline::run_scan(plan, pool, snapshot_id, probe, clock, limiter,
                                    store, concurrency);
  std::printf("attempted=%zu succeeded=%zu transport_errors=%zu max_rate=%zu\n",
              summary.attempted, summary.succeeded, summary.transport_errors,
              pipeline::max_probes_per_second(limiter.launch_log()));
  return 0;
}

int cmd_stability(const GlobalFlags&, const std::string& prev_path,
                  const std::string& curr_path, const std::string& probes_path,
                  bool both_policies) {
  auto probes = pool_ids(spec_io::load_pool(probes_path));
  auto prev = load_snapshot(prev_path, probes);
  auto curr = load_snapshot(curr_path, probes);

  auto report = analytics::stability_report(prev, curr, {5});
  std::printf("default shared=%zu identical=%zu ratio=%.6f\n", report.shared_targets,
              report.identical, report.ratio);
  if (both_policies) {
    auto raw = analytics::stability_report(prev, curr, {});
    std::printf("with-ext5 shared=%zu identical=%zu ratio=%.6f\n", raw.shared_targets,
                raw.identical, raw.ratio);
  }
  return 0;
}

int cmd_classify_cdn(const GlobalFlags&, const std::vector<std::string>& train_paths,
                     const std::string& eval_path, const std::string& probes_path,
                     size_t min_count, const std::string& scope_mode) {
  auto probes = pool_ids(spec_io::load_pool(probes_path));
  std::vector<analytics::FingerprintSnapshot> train;
  for (const auto& path : train_paths)
    train.push_back(analytics::apply_policy(load_snapshot(path, probes), {5}, false));
  auto eval_snapshot =
      analytics::apply_policy(load_snapshot(eval_path, probes), {5}, false);

  auto model = analytics::train_cdn(train, min_count);
  for (const auto& conflict : model.conflicts)
    std::fprintf(stderr, "conflict: %s\n", conflict.c_str());

  std::set<std::string> scope;
  if (scope_mode == "new") {
    scope = analytics::new_identities(train, eval_snapshot);
  } else {
    for (const auto& [identity, entry] : eval_snapshot.entries) scope.insert(identity);
  }

  std::map<std::string, std::string> predictions;
  std::map<std::string, std::string> truth;
  for (const auto& [identity, entry] : eval_snapshot.entries) {
    if (auto label = entry.labels.find("cdn"); label != entry.labels.end())
      truth[identity] = label->second;
    if (!entry.fingerprint.complete) continue;
    if (auto predicted = analytics::predict_cdn(model, entry.fingerprint))
      predictions[identity] = *predicted;
  }

  auto report = analytics::evaluate(predictions, truth, scope);
  print_stats("overall", report);
  for (const auto& [label, stats] : report.per_label)
    print_stats(("label " + label).c_str(), stats);
  return 0;
}

int cmd_classify_c2(const GlobalFlags&, const std::vector<std::string>& train_paths,
                    const std::string& eval_path, const std::string& probes_path,
                    double threshold, const std::vector<std::string>& c2_source_list,
                    bool augment, const std::string& scope_mode) {
  auto probes = pool_ids(spec_io::load_pool(probes_path));
  std::set<std::string> c2_sources(c2_source_list.begin(), c2_source_list.end());

  std::vector<analytics::FingerprintSnapshot> train;
  for (const auto& path : train_paths)
    train.push_back(analytics::apply_policy(load_snapshot(path, probes), {5}, false));
  auto eval_snapshot =
      analytics::apply_policy(load_snapshot(eval_path, probes), {5}, false);

  auto table = analytics::train_c2(train, augment, c2_sources);

  std::set<std::string> scope;
  if (scope_mode == "new") {
    scope = analytics::new_identities(train, eval_snapshot);
  } else {
    for (const auto& [identity, entry] : eval_snapshot.entries) scope.insert(identity);
  }

  std::map<std::string, std::string> predictions;
  std::map<std::string, std::string> truth;
  for (const auto& [identity, entry] : eval_snapshot.entries) {
    if (analytics::is_c2_truth(entry, c2_sources)) truth[identity] = "c2";
    if (!entry.fingerprint.complete) continue;
    auto key = analytics::c2_key(entry.fingerprint, entry.http_server_header, augment);
    if (analytics::classify_c2(table, key, threshold)) predictions[identity] = "c2";
  }

  auto report = analytics::evaluate(predictions, truth, scope);
  print_stats("overall", report);
  return 0;
}

int cmd_compare(const GlobalFlags& g, const std::vector<std::string>& train_paths,
                const std::string& eval_path, const std::string& probes_path,
                std::optional<double> threshold,
                const std::vector<std::string>& c2_source_list, bool plot_data,
                const std::string& out_csv) {
  auto probes = pool_ids(spec_io::load_pool(probes_path));
  std::set<std::string> c2_sources(c2_source_list.begin(), c2_source_list.end());

  std::vector<analytics::FingerprintSnapshot> train;
  for (const auto& path : train_paths) train.push_back(load_snapshot(path, probes));
  auto eval_snapshot = load_snapshot(eval_path, probes);

  std::vector<analytics::ConfigSpec> configs{{"full", false, {}}, {"jarm", true, {}}};
  auto report = analytics::compare_configs(train, eval_snapshot, configs, threshold,
                                           c2_sources);

  std::string csv = "config,probe_count,unique,c2_only,c2_targets,precision,recall\n";
  for (const auto& config : report.configs) {
    std::printf("%s: unique=%zu c2_only=%zu c2_targets=%zu\n", config.name.c_str(),
                config.unique_fingerprints, config.c2_only_fingerprints,
                config.c2_targets);
    for (const auto& point : config.sweep) {
      const auto& s = point.stats;
      if (plot_data)
        std::printf("%s k=%zu precision=%s recall=%s\n", config.name.c_str(),
                    point.probe_count,
                    s.precision ? std::to_string(*s.precision).c_str() : "n/a",
                    s.recall ? std::to_string(*s.recall).c_str() : "n/a");
      csv += config.name + "," + std::to_string(point.probe_count) + "," +
             std::to_string(config.unique_fingerprints) + "," +
             std::to_string(config.c2_only_fingerprints) + "," +
             std::to_string(config.c2_targets) + "," +
             (s.precision ? std::to_string(*s.precision) : "") + "," +
             (s.recall ? std::to_string(*s.recall) : "") + "\n";
    }
  }
  if (!out_csv.empty()) util::write_file(out_path(g, out_csv), csv);
  return 0;
}

std::map<std::string, std::string> load_label_csv(const std::string& path) {
  std::map<std::string, std::string> out;
  auto lines = util::split_lines(util::read_file(path));
  for (size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty() || lines[i][0] == '#') continue;
    auto cells = util::csv_split(lines[i]);
    if (i == 0 && cells.size() >= 2 && util::lower(cells[0]) == "identity") continue;
    if (cells.size() < 2)
      throw pipeline::MalformedRow(i + 1, "need identity,label");
    out[cells[0]] = cells[1];
  }
  return out;
}

int cmd_eval(const GlobalFlags&, const std::string& predictions_path,
             const std::string& truth_path, const std::string& scope_path) {
  auto predictions = load_label_csv(predictions_path);
  auto truth = load_label_csv(truth_path);

  std::set<std::string> scope;
  if (scope_path.empty()) {
    for (const auto& [identity, label] : truth) scope.insert(identity);
    for (const auto& [identity, label] : predictions) scope.insert(identity);
  } else {
    for (const auto& line : util::split_lines(util::read_file(scope_path))) {
      std::string id = util::trim(line);
      if (!id.empty() && id[0] != '#') scope.insert(id);
    }
  }

  auto report = analytics::evaluate(predictions, truth, scope);
  print_stats("overall", report);
  for (const auto& [label, stats] : report.per_label)
    print_stats(("label " + label).c_str(), stats);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TLS stack fingerprinting toolkit"};
  app.require_subcommand(1);

  GlobalFlags g;
  app.add_option("--seed", g.seed, "seed for every randomized step");
  app.add_flag("--verbose", g.verbose, "progress chatter on stderr");
  app.add_option("--output-dir", g.output_dir, "directory for relative output paths");

  // probes-gen
  auto* probes_gen = app.add_subcommand("probes-gen", "generate a random probe pool");
  std::string pg_space = "scanner";
  size_t pg_count = 5000;
  std::string pg_out = "pool.json";
  probes_gen->add_option("--space", pg_space, "feature space: iana or scanner");
  probes_gen->add_option("--count", pg_count, "number of probes");
  probes_gen->add_option("--out", pg_out, "pool file")->required();

  // probes-select
  auto* probes_select =
      app.add_subcommand("probes-select", "greedy probe selection over a matrix");
  std::string ps_matrix;
  size_t ps_k = 10;
  size_t ps_shortlist = 0;
  std::string ps_out;
  probes_select->add_option("--matrix", ps_matrix, "response matrix CSV")->required();
  probes_select->add_option("--k", ps_k, "probes to select");
  probes_select->add_option("--shortlist", ps_shortlist,
                            "restrict to the top-N singleton performers first");
  probes_select->add_option("--out", ps_out, "write selected ids, one per line");

  // scan
  auto* scan = app.add_subcommand("scan", "probe live targets");
  std::vector<std::string> sc_targets;
  std::string sc_probes, sc_exclude, sc_snapshot = "snap-1", sc_resolver = "none";
  std::string sc_out = "records.jsonl", sc_manifest, sc_ca_dir, sc_keylog;
  double sc_rate = 10;
  int64_t sc_window = 60000;
  size_t sc_concurrency = 4;
  bool sc_http = false;
  scan->add_option("--targets", sc_targets, "target CSV files")->required();
  scan->add_option("--probes", sc_probes, "probe pool")->required();
  scan->add_option("--rate", sc_rate, "global probes per second");
  scan->add_option("--window", sc_window, "spreading window in ms");
  scan->add_option("--exclude", sc_exclude, "CIDR excludelist file");
  scan->add_option("--snapshot-id", sc_snapshot, "snapshot tag");
  scan->add_option("--resolver", sc_resolver, "system, hosts:<file>, or none");
  scan->add_option("--concurrency", sc_concurrency, "worker threads");
  scan->add_flag("--fetch-http-header", sc_http, "GET / after the handshake");
  scan->add_option("--out", sc_out, "record JSONL file");
  scan->add_option("--manifest", sc_manifest, "write a snapshot manifest");
  scan->add_option("--ca-dir", sc_ca_dir, "trust anchors directory");
  scan->add_option("--keylog", sc_keylog, "append TLS key log lines");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "scan a simulated population");
  std::string si_population, si_probes, si_snapshot = "snap-1";
  std::string si_out, si_save_population, si_targets_out, si_matrix_out;
  sim::PopulationKnobs si_knobs;
  double si_rate = 1000;
  int64_t si_window = 10000;
  size_t si_concurrency = 4;
  simulate->add_option("--population", si_population, "behavior models JSON");
  simulate->add_option("--probes", si_probes, "probe pool")->required();
  simulate->add_option("--snapshot-id", si_snapshot, "snapshot tag");
  simulate->add_option("--out", si_out, "record JSONL file");
  simulate->add_option("--save-population", si_save_population,
                       "write the generated population");
  simulate->add_option("--targets-out", si_targets_out, "write the target list");
  simulate->add_option("--matrix-out", si_matrix_out, "write the response matrix");
  simulate->add_option("--base", si_knobs.base_count, "organic behavior count");
  simulate->add_option("--alpn-pairs", si_knobs.alpn_only_pairs,
                       "pairs separable only via ALPN");
  simulate->add_option("--bernoulli", si_knobs.bernoulli_status,
                       "coin-flip status_request servers");
  simulate->add_option("--bernoulli-p", si_knobs.bernoulli_p, "coin bias");
  simulate->add_option("--c2-unique", si_knobs.c2_unique, "distinct c2 configs");
  simulate->add_option("--c2-cloned", si_knobs.c2_cloned, "clones of one c2 config");
  simulate->add_option("--cdn-count", si_knobs.cdn_count, "cdn fleets");
  simulate->add_option("--cdn-size", si_knobs.cdn_size, "servers per fleet");
  simulate->add_option("--header-split", si_knobs.header_split,
                       "same TLS config, different header");
  simulate->add_option("--silent", si_knobs.silent_count, "unresponsive endpoints");
  simulate->add_option("--rate", si_rate, "global probes per second");
  simulate->add_option("--window", si_window, "spreading window in ms");
  simulate->add_option("--concurrency", si_concurrency, "worker threads");

  // stability
  auto* stability = app.add_subcommand("stability", "fingerprint stability report");
  std::string st_prev, st_curr, st_probes;
  bool st_both = false;
  stability->add_option("--prev", st_prev, "earlier records JSONL")->required();
  stability->add_option("--curr", st_curr, "later records JSONL")->required();
  stability->add_option("--probes", st_probes, "probe pool")->required();
  stability->add_flag("--both-policies", st_both,
                      "also report with ext-5 stripping disabled");

  // classify-cdn
  auto* classify_cdn = app.add_subcommand("classify-cdn", "train and evaluate the CDN model");
  std::vector<std::string> cc_train;
  std::string cc_eval, cc_probes, cc_scope = "new";
  size_t cc_min_count = 10;
  classify_cdn->add_option("--train", cc_train, "training records JSONL")->required();
  classify_cdn->add_option("--eval", cc_eval, "evaluation records JSONL")->required();
  classify_cdn->add_option("--probes", cc_probes, "probe pool")->required();
  classify_cdn->add_option("--min-count", cc_min_count, "observation threshold");
  classify_cdn->add_option("--scope", cc_scope, "evaluate on: new or all");

  // classify-c2
  auto* classify_c2 = app.add_subcommand("classify-c2", "train and evaluate the C2 model");
  std::vector<std::string> c2_train;
  std::string c2_eval, c2_probes, c2_scope = "new";
  double c2_threshold = 0.8;
  std::vector<std::string> c2_sources{"blocklist"};
  bool c2_augment = false;
  classify_c2->add_option("--train", c2_train, "training records JSONL")->required();
  classify_c2->add_option("--eval", c2_eval, "evaluation records JSONL")->required();
  classify_c2->add_option("--probes", c2_probes, "probe pool")->required();
  classify_c2->add_option("--threshold", c2_threshold, "strict C2-rate threshold");
  classify_c2->add_option("--c2-source", c2_sources, "source names that mean c2");
  classify_c2->add_flag("--augment-http", c2_augment, "fold Server header into the key");
  classify_c2->add_option("--scope", c2_scope, "evaluate on: new or all");

  // compare
  auto* compare = app.add_subcommand("compare", "full vs projected feature configs");
  std::vector<std::string> cp_train;
  std::string cp_eval, cp_probes, cp_out_csv;
  double cp_threshold = -1;
  std::vector<std::string> cp_sources{"blocklist"};
  bool cp_plot = false;
  compare->add_option("--train", cp_train, "training records JSONL")->required();
  compare->add_option("--eval", cp_eval, "evaluation records JSONL")->required();
  compare->add_option("--probes", cp_probes, "probe pool")->required();
  compare->add_option("--threshold", cp_threshold,
                      "enable the probe-count sweep at this threshold");
  compare->add_option("--c2-source", cp_sources, "source names that mean c2");
  compare->add_flag("--plot-data", cp_plot, "print per-k series for plotting");
  compare->add_option("--out-csv", cp_out_csv, "write the per-config series");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "precision/recall from label files");
  std::string ev_pred, ev_truth, ev_scope;
  eval_cmd->add_option("--predictions", ev_pred, "identity,label CSV")->required();
  eval_cmd->add_option("--truth", ev_truth, "identity,label CSV")->required();
  eval_cmd->add_option("--scope", ev_scope, "identity-per-line file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (probes_gen->parsed())
      return cmd_probes_gen(g, pg_space, pg_count, pg_out);
    if (probes_select->parsed())
      return cmd_probes_select(g, ps_matrix, ps_k, ps_shortlist, ps_out);
    if (scan->parsed())
      return cmd_scan(g, sc_targets, sc_probes, sc_rate, sc_window, sc_exclude,
                      sc_snapshot, sc_resolver, sc_concurrency, sc_http, sc_out,
                      sc_manifest, sc_ca_dir, sc_keylog);
    if (simulate->parsed())
      return cmd_simulate(g, si_population, si_knobs, si_probes, si_snapshot, si_out,
                          si_save_population, si_targets_out, si_matrix_out, si_rate,
                          si_window, si_concurrency);
    if (stability->parsed())
      return cmd_stability(g, st_prev, st_curr, st_probes, st_both);
    if (classify_cdn->parsed())
      return cmd_classify_cdn(g, cc_train, cc_eval, cc_probes, cc_min_count, cc_scope);
    if (classify_c2->parsed())
      return cmd_classify_c2(g, c2_train, c2_eval, c2_probes, c2_threshold, c2_sources,
                             c2_augment, c2_scope);
    if (compare->parsed())
      return cmd_compare(g, cp_train, cp_eval, cp_probes,
                         cp_threshold >= 0 ? std::optional<double>(cp_threshold)
                                           : std::nullopt,
                         cp_sources, cp_plot, cp_out_csv);
    if (eval_cmd->parsed()) return cmd_eval(g, ev_pred, ev_truth, ev_scope);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
