#include "tlsfp/analytics.hpp"

#include <algorithm>

#include "tlsfp/forge.hpp"

namespace tlsfp::analytics {

std::string SnapshotEntry::identity() const {
  return ip + "|" + std::to_string(port) + "|" + domain.value_or("");
}

FingerprintSnapshot build_snapshot(const std::string& snapshot_id,
                                   const std::vector<pipeline::ScanRecord>& records,
                                   const std::vector<std::string>& probe_ids) {
  struct Partial {
    SnapshotEntry entry;
    std::vector<std::pair<std::string, std::optional<std::string>>> features;
  };
  std::map<std::string, Partial> grouped;

  for (const auto& record : records) {
    if (record.snapshot_id != snapshot_id) continue;
    auto& partial = grouped[record.target_identity()];
    SnapshotEntry& entry = partial.entry;
    entry.ip = record.ip;
    entry.port = record.port;
    entry.domain = record.domain;
    entry.source = record.source;
    for (const auto& [key, value] : record.labels) entry.labels[key] = value;
    partial.features.emplace_back(record.probe_id, record.feature);
    if (record.cert_validity)
      entry.cert_valid = entry.cert_valid.value_or(true) && record.cert_validity->valid;
    if (record.http_server_header) entry.http_server_header = record.http_server_header;
  }

  FingerprintSnapshot snapshot;
  snapshot.snapshot_id = snapshot_id;
  for (auto& [identity, partial] : grouped) {
    partial.entry.fingerprint =
        feature::assemble_fingerprint(probe_ids, partial.features);
    snapshot.entries.emplace(identity, std::move(partial.entry));
  }
  return snapshot;
}

FingerprintSnapshot apply_policy(const FingerprintSnapshot& snapshot,
                                 const std::set<uint16_t>& strip, bool jarm) {
  FingerprintSnapshot out;
  out.snapshot_id = snapshot.snapshot_id;
  for (const auto& [identity, entry] : snapshot.entries) {
    SnapshotEntry transformed = entry;
    for (auto& [probe, text] : transformed.fingerprint.entries) {
      text = feature::strip_ids_text(text, strip);
      if (jarm) text = feature::project_jarm_text(text);
    }
    out.entries.emplace(identity, std::move(transformed));
  }
  return out;
}

// --- stability --------------------------------------------------------------

namespace {

feature::ServerFingerprint stripped_fingerprint(
    const feature::ServerFingerprint& fp, const std::set<uint16_t>& strip) {
  feature::ServerFingerprint out = fp;
  if (strip.empty()) return out;
  for (auto& [probe, text] : out.entries)
    text = feature::strip_ids_text(text, strip);
  return out;
}

}  // namespace

StabilityReport stability_report(const FingerprintSnapshot& prev,
                                 const FingerprintSnapshot& curr,
                                 const std::set<uint16_t>& strip) {
  StabilityReport report;
  for (const auto& [identity, prev_entry] : prev.entries) {
    auto it = curr.entries.find(identity);
    if (it == curr.entries.end()) continue;
    ++report.shared_targets;
    if (stripped_fingerprint(prev_entry.fingerprint, strip) ==
        stripped_fingerprint(it->second.fingerprint, strip))
      ++report.identical;
  }
  if (report.shared_targets == 0)
    throw NoOverlap("snapshots share no target");
  report.ratio =
      static_cast<double>(report.identical) / static_cast<double>(report.shared_targets);
  return report;
}

// --- CDN ---------------------------------------------------------------

CdnModel train_cdn(const std::vector<FingerprintSnapshot>& snapshots,
                   size_t min_count) {
  std::map<std::string, std::map<std::string, size_t>> counts;  // fp -> cdn -> n
  bool any_label = false;

  for (const auto& snapshot : snapshots) {
    for (const auto& [identity, entry] : snapshot.entries) {
      auto label = entry.labels.find("cdn");
      if (label == entry.labels.end()) continue;
      any_label = true;
      if (!entry.fingerprint.complete) continue;
      if (!entry.cert_valid.value_or(false)) continue;
      ++counts[entry.fingerprint.canonical_text()][label->second];
    }
  }
  if (!any_label) throw NoLabels("no entry carries a cdn label");

  CdnModel model;
  model.min_count = min_count;
  for (const auto& [fingerprint, by_cdn] : counts) {
    std::vector<std::pair<std::string, size_t>> qualifying;
    for (const auto& [cdn, n] : by_cdn)
      if (n >= min_count) qualifying.emplace_back(cdn, n);
    if (qualifying.empty()) continue;
    if (qualifying.size() == 1) {
      model.by_fingerprint[fingerprint] = qualifying[0].first;
      continue;
    }
    std::string diag = fingerprint + ":";
    for (const auto& [cdn, n] : qualifying)
      diag += " " + cdn + "=" + std::to_string(n);
    model.conflicts.push_back(std::move(diag));
  }
  return model;
}

std::optional<std::string> predict_cdn(const CdnModel& model,
                                       const feature::ServerFingerprint& fingerprint) {
  auto it = model.by_fingerprint.find(fingerprint.canonical_text());
  if (it == model.by_fingerprint.end()) return std::nullopt;
  return it->second;
}

// --- C2 ----------------------------------------------------------------

std::string c2_key(const feature::ServerFingerprint& fingerprint,
                   const std::optional<std::string>& header, bool augmented) {
  std::string key = fingerprint.canonical_text();
  if (augmented) {
    key.push_back('\x1f');
    key += header.value_or("");
  }
  return key;
}

bool is_c2_truth(const SnapshotEntry& entry, const std::set<std::string>& c2_sources) {
  return c2_sources.count(entry.source) > 0 || entry.labels.count("c2") > 0;
}

C2RateTable train_c2(const std::vector<FingerprintSnapshot>& snapshots,
                     bool augment_http, const std::set<std::string>& c2_sources) {
  C2RateTable table;
  table.augmented = augment_http;
  for (const auto& snapshot : snapshots) {
    for (const auto& [identity, entry] : snapshot.entries) {
      if (!entry.fingerprint.complete) continue;
      auto& rate =
          table.rates[c2_key(entry.fingerprint, entry.http_server_header, augment_http)];
      ++rate.total_count;
      if (is_c2_truth(entry, c2_sources)) ++rate.c2_count;
    }
  }
  return table;
}

bool classify_c2(const C2RateTable& table, const std::string& key, double t) {
  auto it = table.rates.find(key);
  if (it == table.rates.end()) return false;
  return it->second.rate() > t;
}

// --- evaluation --------------------------------------------------------

namespace {

void finalize(LabelStats& stats) {
  if (stats.tp + stats.fp > 0)
    stats.precision = static_cast<double>(stats.tp) / static_cast<double>(stats.tp + stats.fp);
  if (stats.pp > 0)
    stats.recall = static_cast<double>(stats.tp) / static_cast<double>(stats.pp);
}

}  // namespace

EvalReport evaluate(const std::map<std::string, std::string>& predictions,
                    const std::map<std::string, std::string>& truth,
                    const std::set<std::string>& scope) {
  if (scope.empty()) throw EmptyScope("evaluation scope is empty");

  EvalReport report;
  for (const auto& identity : scope) {
    auto pred = predictions.find(identity);
    auto actual = truth.find(identity);
    if (actual != truth.end()) {
      ++report.pp;
      ++report.per_label[actual->second].pp;
    }
    if (pred == predictions.end()) continue;
    bool hit = actual != truth.end() && actual->second == pred->second;
    if (hit) {
      ++report.tp;
      ++report.per_label[pred->second].tp;
    } else {
      ++report.fp;
      ++report.per_label[pred->second].fp;
    }
  }
  finalize(report);
  for (auto& [label, stats] : report.per_label) finalize(stats);
  return report;
}

std::set<std::string> new_identities(const std::vector<FingerprintSnapshot>& training,
                                     const FingerprintSnapshot& week) {
  std::set<std::string> out;
  for (const auto& [identity, entry] : week.entries) {
    bool seen = false;
    for (const auto& snapshot : training)
      if (snapshot.entries.count(identity)) {
        seen = true;
        break;
      }
    if (!seen) out.insert(identity);
  }
  return out;
}

// --- comparison --------------------------------------------------------

namespace {

feature::ServerFingerprint project_to_probes(
    const feature::ServerFingerprint& fp, const std::vector<std::string>& probes) {
  feature::ServerFingerprint out;
  out.complete = true;
  for (const auto& probe : probes) {
    auto it = fp.entries.find(probe);
    if (it == fp.entries.end()) {
      out.complete = false;
      continue;
    }
    out.entries.emplace(it->first, it->second);
  }
  if (probes.empty()) out.complete = false;
  return out;
}

}  // namespace

ComparisonReport compare_configs(const std::vector<FingerprintSnapshot>& training,
                                 const FingerprintSnapshot& eval_snapshot,
                                 const std::vector<ConfigSpec>& configs,
                                 std::optional<double> threshold,
                                 const std::set<std::string>& c2_sources) {
  std::vector<const FingerprintSnapshot*> all;
  for (const auto& snapshot : training) all.push_back(&snapshot);
  all.push_back(&eval_snapshot);

  std::set<std::string> dataset_probes;
  size_t dataset_entries = 0;
  for (const auto* snapshot : all) {
    dataset_entries += snapshot->entries.size();
    for (const auto& [identity, entry] : snapshot->entries)
      for (const auto& [probe, text] : entry.fingerprint.entries)
        dataset_probes.insert(probe);
  }
  if (dataset_entries == 0) throw MissingProbeData("dataset has no entries");

  ComparisonReport report;
  for (const auto& config : configs) {
    std::vector<std::string> probes = config.probe_subset;
    if (probes.empty())
      probes.assign(dataset_probes.begin(), dataset_probes.end());
    for (const auto& probe : probes)
      if (!dataset_probes.count(probe))
        throw MissingProbeData("no data for probe: " + probe);

    // Default stripping first so the projected mode is a function of the
    // full mode.
    std::vector<FingerprintSnapshot> train_view;
    train_view.reserve(training.size());
    for (const auto& snapshot : training)
      train_view.push_back(apply_policy(snapshot, {5}, config.jarm_projection));
    FingerprintSnapshot eval_view =
        apply_policy(eval_snapshot, {5}, config.jarm_projection);

    ConfigResult result;
    result.name = config.name;

    std::map<std::string, std::pair<bool, bool>> seen_from;  // fp -> (c2, benign)
    std::set<std::string> c2_identities;
    auto tally = [&](const FingerprintSnapshot& snapshot) {
      for (const auto& [identity, entry] : snapshot.entries) {
        auto projected = project_to_probes(entry.fingerprint, probes);
        if (!projected.complete) continue;
        bool c2 = is_c2_truth(entry, c2_sources);
        auto& flags = seen_from[projected.canonical_text()];
        (c2 ? flags.first : flags.second) = true;
        if (c2) c2_identities.insert(identity);
      }
    };
    for (const auto& snapshot : train_view) tally(snapshot);
    tally(eval_view);

    result.unique_fingerprints = seen_from.size();
    for (const auto& [fingerprint, flags] : seen_from)
      if (flags.first && !flags.second) ++result.c2_only_fingerprints;
    result.c2_targets = c2_identities.size();

    if (threshold) {
      // Greedy probe order from the training matrix.
      forge::ResponseMatrix matrix;
      matrix.columns = probes;
      for (const auto& snapshot : train_view) {
        for (const auto& [identity, entry] : snapshot.entries) {
          matrix.row_ids.push_back(snapshot.snapshot_id + "/" + identity);
          std::vector<std::optional<std::string>> row;
          for (const auto& probe : probes) {
            auto it = entry.fingerprint.entries.find(probe);
            if (it == entry.fingerprint.entries.end())
              row.push_back(std::nullopt);
            else
              row.push_back(it->second);
          }
          matrix.cells.push_back(std::move(row));
        }
      }
      auto order = forge::greedy_select(matrix, matrix.columns.size());
      auto scope = new_identities(training, eval_snapshot);

      for (size_t k = 1; k <= order.size(); ++k) {
        std::vector<std::string> subset(order.begin(), order.begin() + k);

        C2RateTable table;
        for (const auto& snapshot : train_view) {
          for (const auto& [identity, entry] : snapshot.entries) {
            auto projected = project_to_probes(entry.fingerprint, subset);
            if (!projected.complete) continue;
            auto& rate = table.rates[c2_key(projected, std::nullopt, false)];
            ++rate.total_count;
            if (is_c2_truth(entry, c2_sources)) ++rate.c2_count;
          }
        }

        std::map<std::string, std::string> predictions;
        std::map<std::string, std::string> truth;
        for (const auto& [identity, entry] : eval_view.entries) {
          if (is_c2_truth(entry, c2_sources)) truth[identity] = "c2";
          auto projected = project_to_probes(entry.fingerprint, subset);
          if (!projected.complete) continue;
          if (classify_c2(table, c2_key(projected, std::nullopt, false), *threshold))
            predictions[identity] = "c2";
        }

        SweepPoint point;
        point.probe_count = k;
        if (!scope.empty()) {
          EvalReport eval = evaluate(predictions, truth, scope);
          point.stats = static_cast<LabelStats&>(eval);
        }
        result.sweep.push_back(std::move(point));
      }
    }

    report.configs.push_back(std::move(result));
  }
  return report;
}

}  // namespace tlsfp::analytics
