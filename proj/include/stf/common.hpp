#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stf {

// Error taxonomy shared across the library. `validation` and `configuration`
// map to CLI exit code 1, everything else to 2.
enum class ErrKind {
  validation,
  structural,
  format,
  training,
  vocabulary,
  masking_infeasible,
  loss_undefined,
  oracle_invalid,
  version_incompatible,
  corruption,
  configuration,
  degenerate_labels,
  undefined_metric,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrKind kind() const { return kind_; }

  static Error validation(const std::string& m) { return {ErrKind::validation, m}; }
  static Error structural(const std::string& m) { return {ErrKind::structural, m}; }
  static Error format(const std::string& m) { return {ErrKind::format, m}; }
  static Error training(const std::string& m) { return {ErrKind::training, m}; }
  static Error vocabulary(const std::string& m) { return {ErrKind::vocabulary, m}; }
  static Error masking_infeasible(const std::string& m) { return {ErrKind::masking_infeasible, m}; }
  static Error loss_undefined(const std::string& m) { return {ErrKind::loss_undefined, m}; }
  static Error oracle_invalid(const std::string& m) { return {ErrKind::oracle_invalid, m}; }
  static Error version_incompatible(const std::string& m) { return {ErrKind::version_incompatible, m}; }
  static Error corruption(const std::string& m) { return {ErrKind::corruption, m}; }
  static Error configuration(const std::string& m) { return {ErrKind::configuration, m}; }
  static Error degenerate_labels(const std::string& m) { return {ErrKind::degenerate_labels, m}; }
  static Error undefined_metric(const std::string& m) { return {ErrKind::undefined_metric, m}; }
  static Error io(const std::string& m) { return {ErrKind::io, m}; }

 private:
  ErrKind kind_;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent RNG stream id from a base seed and counters
// (epoch, step, layer, ...). Used so that resumed runs replay the exact
// randomness of the uninterrupted run without persisting RNG state.
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t h = 0x243f6a8885a308d3ull;
  for (uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

// Deterministic RNG. Distribution sampling is hand-rolled on top of the
// raw engine so results do not depend on the standard library's
// implementation-defined std::*_distribution algorithms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0, 1)
  double uniform() { return double(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller, one value per pair cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer in [0, n).
  int64_t randint(int64_t n) {
    if (n <= 0) throw Error::structural("randint: n must be positive");
    uint64_t un = uint64_t(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return int64_t(x % un);
  }

  template <typename V>
  void shuffle(V& v) {
    for (int64_t i = int64_t(v.size()) - 1; i > 0; --i) {
      int64_t j = randint(i + 1);
      std::swap(v[size_t(i)], v[size_t(j)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace stf
