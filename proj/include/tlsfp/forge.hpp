// Probe generation from a parameterized feature space, round-robin probe
// assignment, and greedy probe-subset selection over a response matrix.
#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlsfp/util.hpp"
#include "tlsfp/wire.hpp"

namespace tlsfp::forge {

struct EmptySpace : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct KTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownColumn : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MatrixFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One candidate extension and how to draw its body.
struct ExtensionChoice {
  uint16_t ext_id = 0;
  enum class Body {
    Empty,
    Literal,             // pick one of literal_pool
    SupportedVersions,   // drawn from version_pool
    KeyShare,            // 1..3 groups from group_pool minus exclusions
    Sni,
    Alpn,
    SignatureAlgorithms,
    SupportedGroups,
    EcPointFormats,
  } body = Body::Empty;
  std::vector<Bytes> literal_pool;
  bool mandatory = false;  // always present when the space is sampled
};

struct FeatureSpace {
  std::vector<uint16_t> versions;  // legacy_version candidates
  std::vector<uint16_t> ciphers;
  std::vector<ExtensionChoice> extensions;
  std::vector<uint16_t> version_pool;  // supported_versions contents
  std::vector<uint16_t> group_pool;
  std::vector<uint16_t> sigalg_pool;
  std::vector<std::string> alpn_pool;
  std::vector<uint8_t> point_format_pool;
  size_t min_ciphers = 1;
  size_t max_ciphers = 16;
  size_t min_list = 1;
  size_t max_list = 8;
  // Code points never emitted, anywhere a group is drawn. The 512-bit
  // curve is out by default: servers selecting it are disproportionally
  // expensive to probe.
  std::set<uint16_t> excluded_groups = {25};

  // Everything IANA defines that this toolkit can express.
  static FeatureSpace iana();
  // Restricted to parameters the probe engine can complete handshakes with.
  static FeatureSpace scanner();

  void validate() const;  // throws EmptySpace
};

// Deterministic per (space, seed); the result always renders.
wire::ClientHelloSpec random_client_hello(const FeatureSpace& space, uint64_t seed);

// Target i receives pool indices {(i*k + j) mod pool_size : j in [0,k)}.
// Throws KTooLarge when k > pool_size.
std::vector<std::vector<size_t>> assign_round_robin(size_t target_count,
                                                    size_t pool_size, size_t k);

struct ResponseMatrix {
  std::vector<std::string> columns;  // probe ids, fixed order
  std::vector<std::string> row_ids;  // server identifiers
  // cells[row][col]: feature text, absent when no fingerprint was obtained.
  std::vector<std::vector<std::optional<std::string>>> cells;

  bool row_complete(size_t row) const;
  size_t complete_rows() const;
  size_t column_index(const std::string& probe_id) const;  // throws UnknownColumn

  std::string to_csv() const;
  static ResponseMatrix from_csv(const std::string& text);  // throws MatrixFormatError
};

// Distinct reaction tuples over complete rows, projected onto `subset`
// (tuple order = matrix column order). Empty subset: 1 if any complete row.
size_t distinct_behavior_count(const ResponseMatrix& matrix,
                               const std::vector<std::string>& subset);

// Iteratively adds the column with the highest distinct count; ties break
// toward the lexicographically smallest probe id. Prefixes of the result
// are the greedy solutions for smaller k.
std::vector<std::string> greedy_select(const ResponseMatrix& matrix, size_t k);

// Exhaustive subset optimum; exponential, oracle for tests and small sweeps.
struct SubsetOptimum {
  size_t count = 0;
  std::vector<std::string> subset;
};
SubsetOptimum best_subset_exhaustive(const ResponseMatrix& matrix, size_t k);

// Columns ranked by how many distinct values each shows over the rows it
// was answered on, descending, ties toward the lexicographically smaller
// id; the shortlist rule between scanning phases. Coincides with the
// singleton distinct-behavior count when every row is complete.
std::vector<std::string> rank_singletons(const ResponseMatrix& matrix);

}  // namespace tlsfp::forge
