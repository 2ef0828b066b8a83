// Small shared helpers: byte formatting, seeding, CSV framing, file IO.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tlsfp {

using Bytes = std::vector<uint8_t>;

namespace util {

std::string to_hex(std::span<const uint8_t> data);
std::optional<Bytes> from_hex(std::string_view hex);

// Standard-alphabet base64 without padding ("AwQ" for 0x03 0x04).
std::string base64_unpadded(std::span<const uint8_t> data);
std::optional<Bytes> base64_decode_unpadded(std::string_view text);

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view s);

// Deterministic sub-seed for a (seed, name...) scope.
uint64_t derive_seed(uint64_t seed, std::string_view a);
uint64_t derive_seed(uint64_t seed, std::string_view a, std::string_view b);
uint64_t derive_seed(uint64_t seed, std::string_view a, std::string_view b, uint64_t n);

// Minimal RFC-4180-style CSV. Quotes only when needed.
std::string csv_join(const std::vector<std::string>& fields);
std::vector<std::string> csv_split(std::string_view line);

// Deterministic generator with identical output on every platform; std::
// engines are avoided because distribution algorithms vary per toolchain.
struct Rng {
  uint64_t state = 0;
  explicit Rng(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t out = splitmix64(state);
    state += 0x9e3779b97f4a7c15ULL;
    return out;
  }
  uint32_t below(uint32_t n) { return n == 0 ? 0 : static_cast<uint32_t>(next() % n); }
  // Uniform in [lo, hi] inclusive.
  uint32_t range(uint32_t lo, uint32_t hi) { return lo + below(hi - lo + 1); }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(static_cast<uint32_t>(v.size()))];
  }
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(static_cast<uint32_t>(i))]);
  }
  // Distinct sample of n elements, order randomized.
  template <typename T>
  std::vector<T> sample(const std::vector<T>& v, size_t n) {
    std::vector<T> copy = v;
    shuffle(copy);
    if (n < copy.size()) copy.resize(n);
    return copy;
  }
};

std::string read_file(const std::string& path);                 // throws on failure
void write_file(const std::string& path, std::string_view data);
std::vector<std::string> split_lines(std::string_view text);

std::string lower(std::string_view s);
std::string trim(std::string_view s);

}  // namespace util
}  // namespace tlsfp
