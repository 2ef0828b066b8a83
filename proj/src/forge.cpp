#include "tlsfp/forge.hpp"

#include <algorithm>
#include <map>
#include <unordered_set>

namespace tlsfp::forge {

namespace {

std::vector<uint16_t> without_excluded(const std::vector<uint16_t>& pool,
                                       const std::set<uint16_t>& excluded) {
  std::vector<uint16_t> out;
  for (uint16_t v : pool)
    if (!excluded.count(v)) out.push_back(v);
  return out;
}

}  // namespace

void FeatureSpace::validate() const {
  if (versions.empty()) throw EmptySpace("no versions in feature space");
  if (ciphers.empty()) throw EmptySpace("no ciphers in feature space");
  for (const auto& choice : extensions) {
    bool pool_ok = true;
    switch (choice.body) {
      case ExtensionChoice::Body::Literal:
        pool_ok = !choice.literal_pool.empty();
        break;
      case ExtensionChoice::Body::SupportedVersions:
        pool_ok = !version_pool.empty();
        break;
      case ExtensionChoice::Body::KeyShare:
      case ExtensionChoice::Body::SupportedGroups:
        pool_ok = !without_excluded(group_pool, excluded_groups).empty();
        break;
      case ExtensionChoice::Body::Alpn:
        pool_ok = !alpn_pool.empty();
        break;
      case ExtensionChoice::Body::SignatureAlgorithms:
        pool_ok = !sigalg_pool.empty();
        break;
      case ExtensionChoice::Body::EcPointFormats:
        pool_ok = !point_format_pool.empty();
        break;
      default:
        break;
    }
    if (choice.mandatory && !pool_ok)
      throw EmptySpace("mandatory extension " + std::to_string(choice.ext_id) +
                       " has an empty value pool");
  }
}

FeatureSpace FeatureSpace::iana() {
  FeatureSpace space;
  space.versions = {0x0300, 0x0301, 0x0302, 0x0303, 0x0304};
  space.ciphers = {
      // TLS 1.3
      0x1301, 0x1302, 0x1303, 0x1304, 0x1305,
      // ECDHE
      0xc02b, 0xc02c, 0xc02f, 0xc030, 0xc009, 0xc00a, 0xc013, 0xc014, 0xc023,
      0xc024, 0xc027, 0xc028, 0xcca8, 0xcca9,
      // DHE / RSA
      0x0033, 0x0039, 0x0067, 0x006b, 0x009e, 0x009f, 0xccaa, 0x002f, 0x0035,
      0x003c, 0x003d, 0x009c, 0x009d, 0x000a,
      // Legacy oddities worth probing with
      0x0004, 0x0005, 0x00ff,
  };
  space.version_pool = {0x0304, 0x0303, 0x0302, 0x0301};
  space.group_pool = {23, 24, 25, 29, 30, 256, 257};
  space.sigalg_pool = {0x0403, 0x0503, 0x0603, 0x0804, 0x0805, 0x0806,
                       0x0401, 0x0501, 0x0601, 0x0201, 0x0203};
  space.alpn_pool = {"h2", "http/1.1", "http/1.0", "h3", "spdy/3.1"};
  space.point_format_pool = {0, 1, 2};

  using Body = ExtensionChoice::Body;
  space.extensions = {
      {0, Body::Sni, {}, false},
      {5, Body::Literal, {Bytes{0x01, 0x00, 0x00, 0x00, 0x00}}, false},
      {10, Body::SupportedGroups, {}, false},
      {11, Body::EcPointFormats, {}, false},
      {13, Body::SignatureAlgorithms, {}, false},
      {15, Body::Literal, {Bytes{0x01}, Bytes{0x02}}, false},
      {16, Body::Alpn, {}, false},
      {22, Body::Empty, {}, false},
      {23, Body::Empty, {}, false},
      {27, Body::Literal, {Bytes{0x02, 0x00, 0x02}, Bytes{0x02, 0x00, 0x01}}, false},
      {35, Body::Empty, {}, false},
      {43, Body::SupportedVersions, {}, false},
      {45, Body::Literal, {Bytes{0x01, 0x01}, Bytes{0x01, 0x00}, Bytes{0x02, 0x00, 0x01}}, false},
      {51, Body::KeyShare, {}, false},
      {21, Body::Literal, {Bytes(16, 0), Bytes(2, 0)}, false},
      {65281, Body::Literal, {Bytes{0x00}}, false},
  };
  return space;
}

FeatureSpace FeatureSpace::scanner() {
  FeatureSpace space = iana();
  space.versions = {0x0301, 0x0302, 0x0303, 0x0304};
  space.ciphers = {0x1301, 0x1302, 0x1303, 0xc02b, 0xc02c, 0xc02f, 0xc030,
                   0xcca8, 0xcca9, 0xc013, 0xc014, 0x009c, 0x009d, 0x002f,
                   0x0035, 0x003c};
  space.group_pool = {23, 24, 25, 29, 30};
  return space;
}

wire::ClientHelloSpec random_client_hello(const FeatureSpace& space, uint64_t seed) {
  space.validate();
  util::Rng rng(util::derive_seed(seed, "client-hello"));

  wire::ClientHelloSpec spec;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "ch-%016llx",
                  static_cast<unsigned long long>(seed));
    spec.id = buf;
  }
  spec.legacy_version = rng.pick(space.versions);

  size_t cipher_hi = std::min(space.max_ciphers, space.ciphers.size());
  size_t cipher_lo = std::min(space.min_ciphers, cipher_hi);
  size_t n_ciphers = rng.range(static_cast<uint32_t>(cipher_lo),
                               static_cast<uint32_t>(cipher_hi));
  spec.cipher_suites = rng.sample(space.ciphers, std::max<size_t>(1, n_ciphers));

  spec.compression_methods = {0};
  spec.session_id_policy = rng.chance(0.5) ? wire::SessionIdPolicy::Random32
                                           : wire::SessionIdPolicy::Empty;

  auto groups = without_excluded(space.group_pool, space.excluded_groups);
  auto list_len = [&](size_t pool_size) {
    size_t hi = std::min(space.max_list, pool_size);
    size_t lo = std::min(space.min_list, hi);
    return static_cast<size_t>(
        rng.range(static_cast<uint32_t>(lo), static_cast<uint32_t>(hi)));
  };

  std::vector<uint16_t> key_share_groups;
  std::vector<wire::ExtensionTemplate> chosen;
  for (const auto& choice : space.extensions) {
    if (!choice.mandatory && !rng.chance(0.5)) continue;
    wire::ExtensionTemplate tmpl;
    tmpl.ext_id = choice.ext_id;
    using Body = ExtensionChoice::Body;
    switch (choice.body) {
      case Body::Empty:
        tmpl.payload = wire::ExtensionTemplate::Empty{};
        break;
      case Body::Literal:
        tmpl.payload =
            wire::ExtensionTemplate::Literal{rng.pick(choice.literal_pool)};
        break;
      case Body::SupportedVersions: {
        auto versions = rng.sample(space.version_pool,
                                   std::max<size_t>(1, list_len(space.version_pool.size())));
        tmpl.payload = wire::ExtensionTemplate::SupportedVersions{versions};
        break;
      }
      case Body::KeyShare: {
        if (groups.empty()) continue;
        size_t n = std::min<size_t>(groups.size(), 1 + rng.below(3));
        key_share_groups = rng.sample(groups, n);
        tmpl.payload = wire::ExtensionTemplate::KeyShare{key_share_groups};
        break;
      }
      case Body::Sni:
        tmpl.payload = wire::ExtensionTemplate::SniPlaceholder{};
        break;
      case Body::Alpn: {
        auto protos = rng.sample(space.alpn_pool,
                                 std::max<size_t>(1, list_len(space.alpn_pool.size())));
        tmpl.payload = wire::ExtensionTemplate::Alpn{protos};
        break;
      }
      case Body::SignatureAlgorithms: {
        auto algs = rng.sample(space.sigalg_pool,
                               std::max<size_t>(1, list_len(space.sigalg_pool.size())));
        tmpl.payload = wire::ExtensionTemplate::SignatureAlgorithms{algs};
        break;
      }
      case Body::SupportedGroups: {
        auto listed = rng.sample(groups, std::max<size_t>(1, list_len(groups.size())));
        tmpl.payload = wire::ExtensionTemplate::SupportedGroups{listed};
        break;
      }
      case Body::EcPointFormats: {
        auto formats =
            rng.sample(space.point_format_pool,
                       std::max<size_t>(1, list_len(space.point_format_pool.size())));
        tmpl.payload = wire::ExtensionTemplate::EcPointFormats{formats};
        break;
      }
    }
    chosen.push_back(std::move(tmpl));
  }

  // Key shares must be announced in supported_groups or many stacks balk;
  // prepend missing ones.
  if (!key_share_groups.empty()) {
    for (auto& tmpl : chosen) {
      if (auto* sg = std::get_if<wire::ExtensionTemplate::SupportedGroups>(
              &tmpl.payload)) {
        for (uint16_t g : key_share_groups)
          if (std::find(sg->groups.begin(), sg->groups.end(), g) == sg->groups.end())
            sg->groups.insert(sg->groups.begin(), g);
      }
    }
  }

  rng.shuffle(chosen);
  spec.extensions = std::move(chosen);
  return spec;
}

std::vector<std::vector<size_t>> assign_round_robin(size_t target_count,
                                                    size_t pool_size, size_t k) {
  if (k > pool_size) throw KTooLarge("per-target probe count exceeds pool size");
  std::vector<std::vector<size_t>> out(target_count);
  for (size_t i = 0; i < target_count; ++i) {
    out[i].reserve(k);
    for (size_t j = 0; j < k; ++j) out[i].push_back((i * k + j) % pool_size);
  }
  return out;
}

bool ResponseMatrix::row_complete(size_t row) const {
  for (const auto& cell : cells[row])
    if (!cell) return false;
  return true;
}

size_t ResponseMatrix::complete_rows() const {
  size_t n = 0;
  for (size_t r = 0; r < cells.size(); ++r)
    if (row_complete(r)) ++n;
  return n;
}

size_t ResponseMatrix::column_index(const std::string& probe_id) const {
  for (size_t c = 0; c < columns.size(); ++c)
    if (columns[c] == probe_id) return c;
  throw UnknownColumn("probe id not in matrix: " + probe_id);
}

std::string ResponseMatrix::to_csv() const {
  std::string out;
  std::vector<std::string> header{"server"};
  header.insert(header.end(), columns.begin(), columns.end());
  out += util::csv_join(header);
  out += '\n';
  for (size_t r = 0; r < row_ids.size(); ++r) {
    std::vector<std::string> row{row_ids[r]};
    for (const auto& cell : cells[r]) row.push_back(cell.value_or(""));
    out += util::csv_join(row);
    out += '\n';
  }
  return out;
}

ResponseMatrix ResponseMatrix::from_csv(const std::string& text) {
  auto lines = util::split_lines(text);
  if (lines.empty()) throw MatrixFormatError("empty matrix file");
  auto header = util::csv_split(lines[0]);
  if (header.empty() || header[0] != "server")
    throw MatrixFormatError("matrix header must start with 'server'");

  ResponseMatrix m;
  m.columns.assign(header.begin() + 1, header.end());
  for (size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto row = util::csv_split(lines[i]);
    if (row.size() != header.size())
      throw MatrixFormatError("row " + std::to_string(i + 1) +
                              " has wrong column count");
    m.row_ids.push_back(row[0]);
    std::vector<std::optional<std::string>> cells;
    for (size_t c = 1; c < row.size(); ++c) {
      if (row[c].empty()) {
        cells.push_back(std::nullopt);
      } else {
        cells.push_back(row[c]);
      }
    }
    m.cells.push_back(std::move(cells));
  }
  return m;
}

namespace {

std::vector<size_t> subset_indices(const ResponseMatrix& matrix,
                                   const std::vector<std::string>& subset) {
  std::vector<size_t> idx;
  idx.reserve(subset.size());
  for (const auto& id : subset) idx.push_back(matrix.column_index(id));
  std::sort(idx.begin(), idx.end());  // tuple order = matrix column order
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

size_t distinct_over_indices(const ResponseMatrix& matrix,
                             const std::vector<size_t>& idx) {
  std::unordered_set<std::string> tuples;
  bool any_complete = false;
  for (size_t r = 0; r < matrix.cells.size(); ++r) {
    if (!matrix.row_complete(r)) continue;
    any_complete = true;
    std::string key;
    for (size_t c : idx) {
      key += *matrix.cells[r][c];
      key += '\x1f';
    }
    tuples.insert(std::move(key));
  }
  if (idx.empty()) return any_complete ? 1 : 0;
  return tuples.size();
}

}  // namespace

size_t distinct_behavior_count(const ResponseMatrix& matrix,
                               const std::vector<std::string>& subset) {
  return distinct_over_indices(matrix, subset_indices(matrix, subset));
}

std::vector<std::string> greedy_select(const ResponseMatrix& matrix, size_t k) {
  if (k > matrix.columns.size())
    throw KTooLarge("selection size exceeds column count");

  std::vector<std::string> selected;
  std::vector<size_t> selected_idx;
  std::vector<bool> used(matrix.columns.size(), false);

  for (size_t round = 0; round < k; ++round) {
    size_t best_count = 0;
    size_t best_col = matrix.columns.size();
    for (size_t c = 0; c < matrix.columns.size(); ++c) {
      if (used[c]) continue;
      std::vector<size_t> candidate = selected_idx;
      candidate.push_back(c);
      std::sort(candidate.begin(), candidate.end());
      size_t count = distinct_over_indices(matrix, candidate);
      bool better = count > best_count;
      bool tie_smaller = count == best_count && best_col < matrix.columns.size() &&
                         matrix.columns[c] < matrix.columns[best_col];
      if (best_col == matrix.columns.size() || better || tie_smaller) {
        best_count = count;
        best_col = c;
      }
    }
    used[best_col] = true;
    selected_idx.push_back(best_col);
    selected.push_back(matrix.columns[best_col]);
  }
  return selected;
}

SubsetOptimum best_subset_exhaustive(const ResponseMatrix& matrix, size_t k) {
  if (k > matrix.columns.size())
    throw KTooLarge("subset size exceeds column count");

  SubsetOptimum best;
  // Enumerates all k-combinations of column indices.
  std::vector<size_t> comb(k);
  for (size_t i = 0; i < k; ++i) comb[i] = i;
  if (k == 0) {
    best.count = distinct_over_indices(matrix, {});
    return best;
  }
  while (true) {
    size_t count = distinct_over_indices(matrix, comb);
    if (count > best.count) {
      best.count = count;
      best.subset.clear();
      for (size_t c : comb) best.subset.push_back(matrix.columns[c]);
    }
    // next combination
    size_t i = k;
    while (i > 0) {
      --i;
      if (comb[i] != i + matrix.columns.size() - k) break;
      if (i == 0) return best;
    }
    if (comb[i] == i + matrix.columns.size() - k) return best;
    ++comb[i];
    for (size_t j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
}

std::vector<std::string> rank_singletons(const ResponseMatrix& matrix) {
  std::vector<std::pair<size_t, std::string>> scored;
  for (size_t c = 0; c < matrix.columns.size(); ++c) {
    // Per-column presence, not full-row completeness: round-robin scans
    // leave most cells empty, and a probe's discriminating power is judged
    // on the rows it was actually sent to. Equals the singleton
    // distinct-behavior count whenever the matrix is complete.
    std::unordered_set<std::string> values;
    for (size_t r = 0; r < matrix.cells.size(); ++r)
      if (matrix.cells[r][c]) values.insert(*matrix.cells[r][c]);
    scored.emplace_back(values.size(), matrix.columns[c]);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (auto& [count, id] : scored) out.push_back(id);
  return out;
}

}  // namespace tlsfp::forge
