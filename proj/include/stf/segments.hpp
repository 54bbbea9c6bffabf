#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "stf/tensor.hpp"

namespace stf {

// One z-scored window of a recording. `values` is C x T_seg in the
// session's canonical channel order.
struct Segment {
  int64_t start_sample = 0;
  Tensor<float> values;
  std::optional<int> label;
};

struct Segmentation {
  std::vector<Segment> segments;
  bool seg_len_warning = false;  // set when seg_len exceeded the recording
};

// Z-scores each row in place with an epsilon guard on the denominator, so
// flat channels come out as all zeros rather than NaN.
inline void zscore_rows(Tensor<float>& m, double eps = 1e-8) {
  int64_t R = m.dim(0), C = m.dim(1);
  for (int64_t i = 0; i < R; ++i) {
    float* row = &m.data[size_t(i * C)];
    double mean = 0.0;
    for (int64_t j = 0; j < C; ++j) mean += double(row[j]);
    mean /= double(C);
    double var = 0.0;
    for (int64_t j = 0; j < C; ++j) {
      double d = double(row[j]) - mean;
      var += d * d;
    }
    double sd = std::max(std::sqrt(var / double(C)), eps);
    for (int64_t j = 0; j < C; ++j) row[j] = float((double(row[j]) - mean) / sd);
  }
}

// Cuts windows at starts 0, stride, 2*stride, ... and z-scores each window
// per channel. A trailing partial window is dropped. stride == seg_len
// gives non-overlapping segments.
inline Segmentation segment_recording(const Tensor<float>& recording, int64_t seg_len, int64_t stride) {
  if (recording.rank() != 2) throw Error::structural("segment_recording: expected C x T input");
  if (stride < 1) throw Error::validation("segment_recording: stride must be >= 1");
  if (seg_len < 1) throw Error::validation("segment_recording: seg_len must be >= 1");
  int64_t C = recording.dim(0), T = recording.dim(1);
  Segmentation out;
  if (seg_len > T) {
    out.seg_len_warning = true;
    return out;
  }
  for (int64_t start = 0; start + seg_len <= T; start += stride) {
    Segment seg;
    seg.start_sample = start;
    seg.values = Tensor<float>::zeros({C, seg_len});
    for (int64_t c = 0; c < C; ++c)
      for (int64_t t = 0; t < seg_len; ++t) seg.values.at(c, t) = recording.at(c, start + t);
    zscore_rows(seg.values);
    out.segments.push_back(std::move(seg));
  }
  return out;
}

// Temporal patches of one segment: patches[i][j] is the i-th length-L
// slice of channel j, stored n x C x L. Flattened in row-major order the
// patch rows already follow the interleaved sequence slot order
// (i-1)*C + (j-1).
struct PatchGrid {
  Tensor<float> patches;
  int64_t n = 0, C = 0, L = 0;
};

inline PatchGrid patchify(const Segment& seg, int64_t L) {
  int64_t C = seg.values.dim(0), T = seg.values.dim(1);
  if (L < 1 || T % L != 0)
    throw Error::structural("patchify: patch length " + std::to_string(L) +
                            " does not divide segment length " + std::to_string(T));
  PatchGrid g;
  g.n = T / L;
  g.C = C;
  g.L = L;
  g.patches = Tensor<float>::zeros({g.n, C, L});
  for (int64_t i = 0; i < g.n; ++i)
    for (int64_t j = 0; j < C; ++j)
      for (int64_t l = 0; l < L; ++l) g.patches.at(i, j, l) = seg.values.at(j, i * L + l);
  return g;
}

}  // namespace stf
