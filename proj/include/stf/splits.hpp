#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "stf/common.hpp"

namespace stf {

enum class SplitMode { random, chronological };

inline std::string to_string(SplitMode m) {
  return m == SplitMode::random ? "random" : "chronological";
}

inline SplitMode split_mode_from_string(const std::string& s) {
  if (s == "random") return SplitMode::random;
  if (s == "chronological") return SplitMode::chronological;
  throw Error::validation("unknown split mode '" + s + "' (expected random|chronological)");
}

enum class SplitPart { train = 0, valid = 1, test = 2 };

struct SplitSpec {
  std::array<double, 3> ratios{0.8, 0.1, 0.1};
  SplitMode mode = SplitMode::random;
  uint64_t seed = 0;
  std::vector<int> assignment;  // per segment index: 0 train, 1 valid, 2 test

  std::vector<int64_t> part(SplitPart p) const {
    std::vector<int64_t> idx;
    for (size_t i = 0; i < assignment.size(); ++i)
      if (assignment[i] == int(p)) idx.push_back(int64_t(i));
    return idx;
  }
};

// Deterministic total partition of [0, n_segments). Valid/test counts are
// floor-allocated, the remainder goes to train. Chronological mode assigns
// the earliest contiguous block to train, then valid, then test.
inline SplitSpec make_splits(int64_t n_segments, std::array<double, 3> ratios, SplitMode mode,
                             uint64_t seed) {
  if (n_segments < 3)
    throw Error::validation("make_splits: need at least 3 segments, got " + std::to_string(n_segments));
  for (double r : ratios)
    if (r <= 0.0) throw Error::validation("make_splits: ratios must be positive");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) throw Error::validation("make_splits: ratios must sum to 1");

  int64_t n_valid = int64_t(std::floor(ratios[1] * double(n_segments)));
  int64_t n_test = int64_t(std::floor(ratios[2] * double(n_segments)));
  int64_t n_train = n_segments - n_valid - n_test;

  std::vector<int64_t> order(size_t(n_segments));
  std::iota(order.begin(), order.end(), 0);
  if (mode == SplitMode::random) {
    Rng rng(seed);
    rng.shuffle(order);
  }

  SplitSpec spec;
  spec.ratios = ratios;
  spec.mode = mode;
  spec.seed = seed;
  spec.assignment.assign(size_t(n_segments), 0);
  for (int64_t k = 0; k < n_segments; ++k) {
    int part = k < n_train ? 0 : (k < n_train + n_valid ? 1 : 2);
    spec.assignment[size_t(order[size_t(k)])] = part;
  }
  return spec;
}

}  // namespace stf
