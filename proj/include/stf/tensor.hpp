#pragma once

#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "stf/common.hpp"

namespace stf {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// Dense row-major tensor. Training runs use T=float; gradient-oracle runs
// instantiate T=double.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != int64_t(data.size()))
      throw Error::structural("tensor: shape " + shape_str(shape) + " does not match data length " +
                              std::to_string(data.size()));
    for (int64_t e : shape)
      if (e <= 0) throw Error::structural("tensor: non-positive extent in " + shape_str(shape));
  }

  static Tensor zeros(Shape s) { return full(std::move(s), T(0)); }

  static Tensor full(Shape s, T v) {
    for (int64_t e : s)
      if (e <= 0) throw Error::structural("tensor: non-positive extent in " + shape_str(s));
    size_t n = size_t(shape_numel(s));
    return Tensor(std::move(s), std::vector<T>(n, v));
  }

  static Tensor randn(Shape s, Rng& rng, T stddev) {
    Tensor t = zeros(std::move(s));
    for (auto& v : t.data) v = T(rng.normal()) * stddev;
    return t;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  int64_t numel() const { return int64_t(data.size()); }
  int rank() const { return int(shape.size()); }
  bool empty() const { return data.empty(); }
  int64_t dim(int i) const { return shape[size_t(i)]; }

  // rank-2 accessors
  T& at(int64_t i, int64_t j) { return data[size_t(i * shape[1] + j)]; }
  T at(int64_t i, int64_t j) const { return data[size_t(i * shape[1] + j)]; }
  // rank-3 accessors
  T& at(int64_t i, int64_t j, int64_t k) { return data[size_t((i * shape[1] + j) * shape[2] + k)]; }
  T at(int64_t i, int64_t j, int64_t k) const {
    return data[size_t((i * shape[1] + j) * shape[2] + k)];
  }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = U(data[i]);
    return out;
  }
};

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b))
    throw Error::structural(std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " +
                            shape_str(b.shape));
}

}  // namespace stf
