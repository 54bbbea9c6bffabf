#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stf/tensor.hpp"

namespace stf {

// A named, trainable tensor. Gradients accumulate here when a tape with a
// leaf for this parameter runs backward.
template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, Tensor<T> v, bool train = true)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.shape)), trainable(train) {}

  void zero_grad() { grad.fill(T(0)); }
};

namespace detail {

template <typename T>
inline T gelu_fwd(T x) {
  double xd = double(x);
  return T(xd * 0.5 * (1.0 + std::erf(xd * 0.70710678118654752440)));
}

template <typename T>
inline T gelu_bwd(T x) {
  double xd = double(x);
  double phi = 0.5 * (1.0 + std::erf(xd * 0.70710678118654752440));
  double pdf = std::exp(-0.5 * xd * xd) * 0.39894228040143267794;
  return T(phi + xd * pdf);
}

}  // namespace detail

// Reverse-mode tape over whole-tensor operations. Nodes are appended in
// execution order, so the reverse sweep is a plain backwards iteration.
// One tape is built per forward pass and cleared afterwards; parameters
// live outside the tape and receive gradients through leaf nodes.
//
// Order-sensitive forward reductions (dot products, softmax sums, norms)
// accumulate in double regardless of T, which keeps results stable under
// row/column permutations of the inputs.
template <typename T>
class Tape {
 public:
  using Id = int32_t;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated on first accumulation
    bool needs_grad = false;
    std::function<void(Tape&)> back;
  };

  void clear() { nodes_.clear(); }
  size_t size() const { return nodes_.size(); }

  const Tensor<T>& val(Id id) const { return nodes_[size_t(id)].value; }
  bool needs_grad(Id id) const { return nodes_[size_t(id)].needs_grad; }
  bool has_grad(Id id) const { return !nodes_[size_t(id)].grad.empty(); }

  Tensor<T>& grad_of(Id id) {
    Node& n = nodes_[size_t(id)];
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape);
    return n.grad;
  }

  // ---- leaves ----

  Id constant(Tensor<T> v) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = false;
    return push(std::move(n));
  }

  // Leaf for a parameter; backward adds the node gradient into p.grad.
  // Non-trainable params behave as constants (stop-gradient).
  Id leaf(Param<T>& p) {
    if (!p.trainable) return constant(p.value);
    Node n;
    n.value = p.value;
    n.needs_grad = true;
    Param<T>* pp = &p;
    Id id = Id(nodes_.size());
    n.back = [id, pp](Tape& t) {
      const Tensor<T>& g = t.nodes_[size_t(id)].grad;
      for (size_t i = 0; i < g.data.size(); ++i) pp->grad.data[i] += g.data[i];
    };
    return push(std::move(n));
  }

  // ---- elementwise ----

  Id add(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    check_same_shape(A, B, "add");
    Tensor<T> out = A;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += B.data[i];
    return make(std::move(out), {a, b}, [a, b](Tape& t, const Tensor<T>& g) {
      if (t.needs_grad(a)) t.accum_into(a, g.data.data(), g.data.size());
      if (t.needs_grad(b)) t.accum_into(b, g.data.data(), g.data.size());
    });
  }

  Id sub(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    check_same_shape(A, B, "sub");
    Tensor<T> out = A;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= B.data[i];
    return make(std::move(out), {a, b}, [a, b](Tape& t, const Tensor<T>& g) {
      if (t.needs_grad(a)) t.accum_into(a, g.data.data(), g.data.size());
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad_of(b);
        for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] -= g.data[i];
      }
    });
  }

  Id mul(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    check_same_shape(A, B, "mul");
    Tensor<T> out = A;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= B.data[i];
    return make(std::move(out), {a, b}, [a, b](Tape& t, const Tensor<T>& g) {
      const Tensor<T>&A2 = t.val(a), &B2 = t.val(b);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.grad_of(a);
        for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * B2.data[i];
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad_of(b);
        for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * A2.data[i];
      }
    });
  }

  Id scale(Id a, T s) {
    Tensor<T> out = val(a);
    for (auto& v : out.data) v *= s;
    return make(std::move(out), {a}, [a, s](Tape& t, const Tensor<T>& g) {
      Tensor<T>& ga = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * s;
    });
  }

  Id gelu(Id a) {
    Tensor<T> out = val(a);
    for (auto& v : out.data) v = detail::gelu_fwd(v);
    return make(std::move(out), {a}, [a](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& A = t.val(a);
      Tensor<T>& ga = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * detail::gelu_bwd(A.data[i]);
    });
  }

  Id sin_op(Id a) {  // used by gradient-oracle tests
    Tensor<T> out = val(a);
    for (auto& v : out.data) v = T(std::sin(double(v)));
    return make(std::move(out), {a}, [a](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& A = t.val(a);
      Tensor<T>& ga = t.grad_of(a);
      for (size_t i = 0; i < g.data.size(); ++i)
        ga.data[i] += g.data[i] * T(std::cos(double(A.data[i])));
    });
  }

  // ---- shape ----

  Id reshape(Id a, Shape s) {
    const Tensor<T>& A = val(a);
    if (shape_numel(s) != A.numel())
      throw Error::structural("reshape: numel mismatch " + shape_str(A.shape) + " -> " + shape_str(s));
    Tensor<T> out(std::move(s), A.data);
    return make(std::move(out), {a}, [a](Tape& t, const Tensor<T>& g) {
      t.accum_into(a, g.data.data(), g.data.size());
    });
  }

  Id slice_cols(Id a, int64_t c0, int64_t w) {
    const Tensor<T>& A = val(a);
    require_rank(A, 2, "slice_cols");
    int64_t R = A.dim(0), C = A.dim(1);
    if (c0 < 0 || w <= 0 || c0 + w > C) throw Error::structural("slice_cols: range out of bounds");
    Tensor<T> out = Tensor<T>::zeros({R, w});
    for (int64_t i = 0; i < R; ++i)
      for (int64_t j = 0; j < w; ++j) out.at(i, j) = A.at(i, c0 + j);
    return make(std::move(out), {a}, [a, c0, w](Tape& t, const Tensor<T>& g) {
      Tensor<T>& ga = t.grad_of(a);
      int64_t R = g.dim(0);
      for (int64_t i = 0; i < R; ++i)
        for (int64_t j = 0; j < w; ++j) ga.at(i, c0 + j) += g.at(i, j);
    });
  }

  Id concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw Error::structural("concat_cols: empty");
    int64_t R = val(parts[0]).dim(0);
    int64_t W = 0;
    for (Id p : parts) {
      require_rank(val(p), 2, "concat_cols");
      if (val(p).dim(0) != R) throw Error::structural("concat_cols: row mismatch");
      W += val(p).dim(1);
    }
    Tensor<T> out = Tensor<T>::zeros({R, W});
    int64_t off = 0;
    for (Id p : parts) {
      const Tensor<T>& P = val(p);
      int64_t w = P.dim(1);
      for (int64_t i = 0; i < R; ++i)
        for (int64_t j = 0; j < w; ++j) out.at(i, off + j) = P.at(i, j);
      off += w;
    }
    std::vector<Id> ps = parts;
    return make(std::move(out), parts, [ps](Tape& t, const Tensor<T>& g) {
      int64_t R = g.dim(0);
      int64_t off = 0;
      for (Id p : ps) {
        int64_t w = t.val(p).dim(1);
        if (t.needs_grad(p)) {
          Tensor<T>& gp = t.grad_of(p);
          for (int64_t i = 0; i < R; ++i)
            for (int64_t j = 0; j < w; ++j) gp.at(i, j) += g.at(i, off + j);
        }
        off += w;
      }
    });
  }

  // out[r] = a[rows[r]]; repeated indices accumulate gradient on the same row.
  Id gather_rows(Id a, std::vector<int64_t> rows) {
    const Tensor<T>& A = val(a);
    require_rank(A, 2, "gather_rows");
    int64_t C = A.dim(1);
    Tensor<T> out = Tensor<T>::zeros({int64_t(rows.size()), C});
    for (size_t r = 0; r < rows.size(); ++r) {
      if (rows[r] < 0 || rows[r] >= A.dim(0)) throw Error::structural("gather_rows: index out of range");
      for (int64_t j = 0; j < C; ++j) out.at(int64_t(r), j) = A.at(rows[r], j);
    }
    return make(std::move(out), {a}, [a, rows = std::move(rows)](Tape& t, const Tensor<T>& g) {
      Tensor<T>& ga = t.grad_of(a);
      int64_t C = g.dim(1);
      for (size_t r = 0; r < rows.size(); ++r)
        for (int64_t j = 0; j < C; ++j) ga.at(rows[r], j) += g.at(int64_t(r), j);
    });
  }

  // ---- linear algebra ----

  Id matmul(Id a, Id b) {
    const Tensor<T>&A = val(a), &B = val(b);
    require_rank(A, 2, "matmul");
    require_rank(B, 2, "matmul");
    if (A.dim(1) != B.dim(0))
      throw Error::structural("matmul: inner dim mismatch " + shape_str(A.shape) + " x " +
                              shape_str(B.shape));
    int64_t M = A.dim(0), K = A.dim(1), N = B.dim(1);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    std::vector<double> acc(size_t(N));
    for (int64_t i = 0; i < M; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const T* arow = &A.data[size_t(i * K)];
      for (int64_t k = 0; k < K; ++k) {
        double av = double(arow[k]);
        const T* brow = &B.data[size_t(k * N)];
        for (int64_t j = 0; j < N; ++j) acc[size_t(j)] += av * double(brow[j]);
      }
      T* orow = &out.data[size_t(i * N)];
      for (int64_t j = 0; j < N; ++j) orow[j] = T(acc[size_t(j)]);
    }
    return make(std::move(out), {a, b}, [a, b](Tape& t, const Tensor<T>& g) {
      const Tensor<T>&A2 = t.val(a), &B2 = t.val(b);
      int64_t M = A2.dim(0), K = A2.dim(1), N = B2.dim(1);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.grad_of(a);  // dA = g . B^T
        for (int64_t i = 0; i < M; ++i) {
          const T* grow = &g.data[size_t(i * N)];
          T* garow = &ga.data[size_t(i * K)];
          for (int64_t k = 0; k < K; ++k) {
            const T* brow = &B2.data[size_t(k * N)];
            double s = 0.0;
            for (int64_t j = 0; j < N; ++j) s += double(grow[j]) * double(brow[j]);
            garow[k] += T(s);
          }
        }
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad_of(b);  // dB = A^T . g
        for (int64_t i = 0; i < M; ++i) {
          const T* arow = &A2.data[size_t(i * K)];
          const T* grow = &g.data[size_t(i * N)];
          for (int64_t k = 0; k < K; ++k) {
            T av = arow[k];
            if (av == T(0)) continue;
            T* gbrow = &gb.data[size_t(k * N)];
            for (int64_t j = 0; j < N; ++j) gbrow[j] += av * grow[j];
          }
        }
      }
    });
  }

  // alpha * A . B^T with A (m x k), B (n x k).
  Id matmul_nt(Id a, Id b, T alpha = T(1)) {
    const Tensor<T>&A = val(a), &B = val(b);
    require_rank(A, 2, "matmul_nt");
    require_rank(B, 2, "matmul_nt");
    if (A.dim(1) != B.dim(1))
      throw Error::structural("matmul_nt: inner dim mismatch " + shape_str(A.shape) + " x " +
                              shape_str(B.shape));
    int64_t M = A.dim(0), K = A.dim(1), N = B.dim(0);
    Tensor<T> out = Tensor<T>::zeros({M, N});
    for (int64_t i = 0; i < M; ++i) {
      const T* arow = &A.data[size_t(i * K)];
      T* orow = &out.data[size_t(i * N)];
      for (int64_t j = 0; j < N; ++j) {
        const T* brow = &B.data[size_t(j * K)];
        double s = 0.0;
        for (int64_t k = 0; k < K; ++k) s += double(arow[k]) * double(brow[k]);
        orow[j] = T(s * double(alpha));
      }
    }
    return make(std::move(out), {a, b}, [a, b, alpha](Tape& t, const Tensor<T>& g) {
      const Tensor<T>&A2 = t.val(a), &B2 = t.val(b);
      int64_t M = A2.dim(0), K = A2.dim(1), N = B2.dim(0);
      if (t.needs_grad(a)) {
        Tensor<T>& ga = t.grad_of(a);  // dA = alpha * g . B
        for (int64_t i = 0; i < M; ++i) {
          const T* grow = &g.data[size_t(i * N)];
          T* garow = &ga.data[size_t(i * K)];
          for (int64_t j = 0; j < N; ++j) {
            T gv = grow[j] * alpha;
            if (gv == T(0)) continue;
            const T* brow = &B2.data[size_t(j * K)];
            for (int64_t k = 0; k < K; ++k) garow[k] += gv * brow[k];
          }
        }
      }
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad_of(b);  // dB = alpha * g^T . A
        for (int64_t i = 0; i < M; ++i) {
          const T* grow = &g.data[size_t(i * N)];
          const T* arow = &A2.data[size_t(i * K)];
          for (int64_t j = 0; j < N; ++j) {
            T gv = grow[j] * alpha;
            if (gv == T(0)) continue;
            T* gbrow = &gb.data[size_t(j * K)];
            for (int64_t k = 0; k < K; ++k) gbrow[k] += gv * arow[k];
          }
        }
      }
    });
  }

  // x (R x C) + b (C), broadcast over rows.
  Id add_bias(Id x, Id b) {
    const Tensor<T>&X = val(x), &B = val(b);
    require_rank(X, 2, "add_bias");
    if (B.rank() != 1 || B.dim(0) != X.dim(1))
      throw Error::structural("add_bias: bias shape " + shape_str(B.shape) + " vs x " +
                              shape_str(X.shape));
    int64_t R = X.dim(0), C = X.dim(1);
    Tensor<T> out = X;
    for (int64_t i = 0; i < R; ++i)
      for (int64_t j = 0; j < C; ++j) out.at(i, j) += B.data[size_t(j)];
    return make(std::move(out), {x, b}, [x, b](Tape& t, const Tensor<T>& g) {
      if (t.needs_grad(x)) t.accum_into(x, g.data.data(), g.data.size());
      if (t.needs_grad(b)) {
        Tensor<T>& gb = t.grad_of(b);
        int64_t R = g.dim(0), C = g.dim(1);
        for (int64_t i = 0; i < R; ++i)
          for (int64_t j = 0; j < C; ++j) gb.data[size_t(j)] += g.at(i, j);
      }
    });
  }

  // ---- normalization / attention ----

  // y = gain (*) x / sqrt(mean(x^2) + eps), per row over the last dim.
  Id rms_norm(Id x, Id gain, T eps) {
    const Tensor<T>&X = val(x), &G = val(gain);
    require_rank(X, 2, "rms_norm");
    int64_t R = X.dim(0), C = X.dim(1);
    if (G.rank() != 1 || G.dim(0) != C) throw Error::structural("rms_norm: gain width mismatch");
    Tensor<T> out = Tensor<T>::zeros({R, C});
    std::vector<T> inv(size_t(R));
    for (int64_t i = 0; i < R; ++i) {
      const T* xr = &X.data[size_t(i * C)];
      double ms = 0.0;
      for (int64_t j = 0; j < C; ++j) ms += double(xr[j]) * double(xr[j]);
      ms = ms / double(C);
      T r = T(1.0 / std::sqrt(ms + double(eps)));
      inv[size_t(i)] = r;
      T* orow = &out.data[size_t(i * C)];
      for (int64_t j = 0; j < C; ++j) orow[j] = G.data[size_t(j)] * xr[j] * r;
    }
    return make(std::move(out), {x, gain},
                [x, gain, inv = std::move(inv)](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>&X2 = t.val(x), &G2 = t.val(gain);
                  int64_t R = X2.dim(0), C = X2.dim(1);
                  if (t.needs_grad(gain)) {
                    Tensor<T>& gg = t.grad_of(gain);
                    for (int64_t i = 0; i < R; ++i) {
                      T r = inv[size_t(i)];
                      for (int64_t j = 0; j < C; ++j)
                        gg.data[size_t(j)] += g.at(i, j) * X2.at(i, j) * r;
                    }
                  }
                  if (t.needs_grad(x)) {
                    Tensor<T>& gx = t.grad_of(x);
                    for (int64_t i = 0; i < R; ++i) {
                      T r = inv[size_t(i)];
                      double s = 0.0;
                      for (int64_t j = 0; j < C; ++j)
                        s += double(g.at(i, j)) * double(G2.data[size_t(j)]) * double(X2.at(i, j));
                      double coef = double(r) * double(r) * double(r) * s / double(C);
                      for (int64_t j = 0; j < C; ++j)
                        gx.at(i, j) += T(double(g.at(i, j)) * double(G2.data[size_t(j)]) * double(r) -
                                         double(X2.at(i, j)) * coef);
                    }
                  }
                });
  }

  // Row-wise softmax with max subtraction. If `groups` is non-empty it must
  // give one group id per row/column of a square input; entries whose row
  // and column group ids differ are excluded (output exactly 0), which is
  // how the separated-attention variant restricts attention.
  Id softmax_rows(Id x, std::vector<int> groups = {}) {
    const Tensor<T>& X = val(x);
    require_rank(X, 2, "softmax_rows");
    int64_t R = X.dim(0), C = X.dim(1);
    if (!groups.empty() && (R != C || int64_t(groups.size()) != R))
      throw Error::structural("softmax_rows: group vector must match square input");
    Tensor<T> out = Tensor<T>::zeros({R, C});
    for (int64_t i = 0; i < R; ++i) {
      const T* xr = &X.data[size_t(i * C)];
      T* orow = &out.data[size_t(i * C)];
      double mx = -1e300;
      for (int64_t j = 0; j < C; ++j) {
        if (!groups.empty() && groups[size_t(j)] != groups[size_t(i)]) continue;
        mx = std::max(mx, double(xr[j]));
      }
      double denom = 0.0;
      for (int64_t j = 0; j < C; ++j) {
        if (!groups.empty() && groups[size_t(j)] != groups[size_t(i)]) continue;
        denom += std::exp(double(xr[j]) - mx);
      }
      for (int64_t j = 0; j < C; ++j) {
        if (!groups.empty() && groups[size_t(j)] != groups[size_t(i)]) continue;
        orow[j] = T(std::exp(double(xr[j]) - mx) / denom);
      }
    }
    return make(std::move(out), {x}, [x, this_id = Id(nodes_.size())](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& Y = t.val(this_id);
      Tensor<T>& gx = t.grad_of(x);
      int64_t R = Y.dim(0), C = Y.dim(1);
      for (int64_t i = 0; i < R; ++i) {
        double s = 0.0;
        for (int64_t j = 0; j < C; ++j) s += double(g.at(i, j)) * double(Y.at(i, j));
        for (int64_t j = 0; j < C; ++j)
          gx.at(i, j) += T(double(Y.at(i, j)) * (double(g.at(i, j)) - s));
      }
    });
  }

  // Inverted dropout; keep probability 1-p, kept entries scaled by 1/(1-p).
  Id dropout(Id x, T p, uint64_t seed) {
    if (!(p >= T(0) && p < T(1))) throw Error::structural("dropout: p must be in [0,1)");
    const Tensor<T>& X = val(x);
    Tensor<T> out = X;
    auto mask = std::make_shared<std::vector<uint8_t>>(X.data.size());
    Rng rng(seed);
    T sc = T(1) / (T(1) - p);
    for (size_t i = 0; i < out.data.size(); ++i) {
      bool keep = rng.uniform() >= double(p);
      (*mask)[i] = keep ? 1 : 0;
      out.data[i] = keep ? out.data[i] * sc : T(0);
    }
    return make(std::move(out), {x}, [x, mask, sc](Tape& t, const Tensor<T>& g) {
      Tensor<T>& gx = t.grad_of(x);
      for (size_t i = 0; i < g.data.size(); ++i)
        if ((*mask)[i]) gx.data[i] += g.data[i] * sc;
    });
  }

  // Rotary position embedding over consecutive dimension pairs of each row:
  // pair k rotated by angle pos[i] * base^(-2k/width). Width must be even.
  Id rope_rows(Id x, std::vector<int> positions, T base) {
    const Tensor<T>& X = val(x);
    require_rank(X, 2, "rope_rows");
    int64_t R = X.dim(0), W = X.dim(1);
    if (W % 2 != 0) throw Error::structural("rope_rows: width must be even");
    if (int64_t(positions.size()) != R) throw Error::structural("rope_rows: positions size mismatch");
    for (int p : positions)
      if (p < 0) throw Error::structural("rope_rows: positions must be non-negative");
    std::vector<double> theta(size_t(W / 2));
    for (int64_t k = 0; k < W / 2; ++k)
      theta[size_t(k)] = std::pow(double(base), -2.0 * double(k) / double(W));
    Tensor<T> out = Tensor<T>::zeros({R, W});
    for (int64_t i = 0; i < R; ++i) {
      for (int64_t k = 0; k < W / 2; ++k) {
        double ang = double(positions[size_t(i)]) * theta[size_t(k)];
        double c = std::cos(ang), s = std::sin(ang);
        double a = double(X.at(i, 2 * k)), b = double(X.at(i, 2 * k + 1));
        out.at(i, 2 * k) = T(a * c - b * s);
        out.at(i, 2 * k + 1) = T(a * s + b * c);
      }
    }
    return make(std::move(out), {x},
                [x, positions = std::move(positions), theta = std::move(theta)](Tape& t, const Tensor<T>& g) {
                  Tensor<T>& gx = t.grad_of(x);
                  int64_t R = g.dim(0), W = g.dim(1);
                  for (int64_t i = 0; i < R; ++i) {
                    for (int64_t k = 0; k < W / 2; ++k) {
                      double ang = double(positions[size_t(i)]) * theta[size_t(k)];
                      double c = std::cos(ang), s = std::sin(ang);
                      double ga = double(g.at(i, 2 * k)), gb = double(g.at(i, 2 * k + 1));
                      gx.at(i, 2 * k) += T(ga * c + gb * s);
                      gx.at(i, 2 * k + 1) += T(-ga * s + gb * c);
                    }
                  }
                });
  }

  // 1-D convolution over the last axis with symmetric zero padding
  // (same-length output). x (B,Cin,L), w (Cout,Cin,k), bias (Cout).
  Id conv1d(Id x, Id w, Id bias, int dilation) {
    const Tensor<T>&X = val(x), &W = val(w), &Bi = val(bias);
    require_rank(X, 3, "conv1d");
    require_rank(W, 3, "conv1d");
    if (dilation < 1) throw Error::structural("conv1d: dilation must be >= 1");
    int64_t B = X.dim(0), Cin = X.dim(1), L = X.dim(2);
    int64_t Cout = W.dim(0), k = W.dim(2);
    if (W.dim(1) != Cin) throw Error::structural("conv1d: weight Cin mismatch");
    if (k % 2 == 0) throw Error::structural("conv1d: kernel width must be odd");
    if (Bi.rank() != 1 || Bi.dim(0) != Cout) throw Error::structural("conv1d: bias shape mismatch");
    int64_t ctr = (k - 1) / 2;
    Tensor<T> out = Tensor<T>::zeros({B, Cout, L});
    for (int64_t b = 0; b < B; ++b) {
      for (int64_t co = 0; co < Cout; ++co) {
        T* orow = &out.data[size_t((b * Cout + co) * L)];
        for (int64_t t0 = 0; t0 < L; ++t0) orow[t0] = Bi.data[size_t(co)];
        for (int64_t ci = 0; ci < Cin; ++ci) {
          const T* xr = &X.data[size_t((b * Cin + ci) * L)];
          for (int64_t u = 0; u < k; ++u) {
            T wv = W.at(co, ci, u);
            int64_t off = (u - ctr) * dilation;
            int64_t t_lo = std::max<int64_t>(0, -off);
            int64_t t_hi = std::min<int64_t>(L, L - off);
            for (int64_t t0 = t_lo; t0 < t_hi; ++t0) orow[t0] += wv * xr[t0 + off];
          }
        }
      }
    }
    return make(std::move(out), {x, w, bias}, [x, w, bias, dilation](Tape& t, const Tensor<T>& g) {
      const Tensor<T>&X2 = t.val(x), &W2 = t.val(w);
      int64_t B = X2.dim(0), Cin = X2.dim(1), L = X2.dim(2);
      int64_t Cout = W2.dim(0), k = W2.dim(2);
      int64_t ctr = (k - 1) / 2;
      if (t.needs_grad(bias)) {
        Tensor<T>& gb = t.grad_of(bias);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t co = 0; co < Cout; ++co) {
            const T* grow = &g.data[size_t((b * Cout + co) * L)];
            double s = 0.0;
            for (int64_t t0 = 0; t0 < L; ++t0) s += double(grow[t0]);
            gb.data[size_t(co)] += T(s);
          }
      }
      if (t.needs_grad(w)) {
        Tensor<T>& gw = t.grad_of(w);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t co = 0; co < Cout; ++co) {
            const T* grow = &g.data[size_t((b * Cout + co) * L)];
            for (int64_t ci = 0; ci < Cin; ++ci) {
              const T* xr = &X2.data[size_t((b * Cin + ci) * L)];
              for (int64_t u = 0; u < k; ++u) {
                int64_t off = (u - ctr) * dilation;
                int64_t t_lo = std::max<int64_t>(0, -off);
                int64_t t_hi = std::min<int64_t>(L, L - off);
                double s = 0.0;
                for (int64_t t0 = t_lo; t0 < t_hi; ++t0) s += double(grow[t0]) * double(xr[t0 + off]);
                gw.at(co, ci, u) += T(s);
              }
            }
          }
      }
      if (t.needs_grad(x)) {
        Tensor<T>& gx = t.grad_of(x);
        for (int64_t b = 0; b < B; ++b)
          for (int64_t co = 0; co < Cout; ++co) {
            const T* grow = &g.data[size_t((b * Cout + co) * L)];
            for (int64_t ci = 0; ci < Cin; ++ci) {
              T* gxr = &gx.data[size_t((b * Cin + ci) * L)];
              for (int64_t u = 0; u < k; ++u) {
                T wv = W2.at(co, ci, u);
                int64_t off = (u - ctr) * dilation;
                int64_t t_lo = std::max<int64_t>(0, -off);
                int64_t t_hi = std::min<int64_t>(L, L - off);
                for (int64_t t0 = t_lo; t0 < t_hi; ++t0) gxr[t0 + off] += wv * grow[t0];
              }
            }
          }
      }
    });
  }

  // Layer normalization over the (channel, position) extent of each sample,
  // with learned per-channel gain and bias. x (B,C,L), gain/bias (C).
  Id patch_layer_norm(Id x, Id gain, Id bias, T eps) {
    const Tensor<T>&X = val(x), &G = val(gain), &Bi = val(bias);
    require_rank(X, 3, "patch_layer_norm");
    int64_t B = X.dim(0), C = X.dim(1), L = X.dim(2);
    if (G.rank() != 1 || G.dim(0) != C || Bi.rank() != 1 || Bi.dim(0) != C)
      throw Error::structural("patch_layer_norm: gain/bias must have one entry per channel");
    int64_t N = C * L;
    Tensor<T> out = Tensor<T>::zeros({B, C, L});
    std::vector<T> means(size_t(B)), invs(size_t(B));
    for (int64_t b = 0; b < B; ++b) {
      const T* xs = &X.data[size_t(b * N)];
      double mu = 0.0;
      for (int64_t i = 0; i < N; ++i) mu += double(xs[i]);
      mu /= double(N);
      double var = 0.0;
      for (int64_t i = 0; i < N; ++i) {
        double d = double(xs[i]) - mu;
        var += d * d;
      }
      var /= double(N);
      double inv = 1.0 / std::sqrt(var + double(eps));
      means[size_t(b)] = T(mu);
      invs[size_t(b)] = T(inv);
      T* os = &out.data[size_t(b * N)];
      for (int64_t c = 0; c < C; ++c)
        for (int64_t l = 0; l < L; ++l)
          os[c * L + l] = G.data[size_t(c)] * T((double(xs[c * L + l]) - mu) * inv) + Bi.data[size_t(c)];
    }
    return make(std::move(out), {x, gain, bias},
                [x, gain, bias, means = std::move(means), invs = std::move(invs)](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>&X2 = t.val(x), &G2 = t.val(gain);
                  int64_t B = X2.dim(0), C = X2.dim(1), L = X2.dim(2);
                  int64_t N = C * L;
                  for (int64_t b = 0; b < B; ++b) {
                    const T* xs = &X2.data[size_t(b * N)];
                    const T* gs = &g.data[size_t(b * N)];
                    double mu = double(means[size_t(b)]), inv = double(invs[size_t(b)]);
                    if (t.needs_grad(gain)) {
                      Tensor<T>& gg = t.grad_of(gain);
                      for (int64_t c = 0; c < C; ++c) {
                        double s = 0.0;
                        for (int64_t l = 0; l < L; ++l)
                          s += double(gs[c * L + l]) * (double(xs[c * L + l]) - mu) * inv;
                        gg.data[size_t(c)] += T(s);
                      }
                    }
                    if (t.needs_grad(bias)) {
                      Tensor<T>& gb = t.grad_of(bias);
                      for (int64_t c = 0; c < C; ++c) {
                        double s = 0.0;
                        for (int64_t l = 0; l < L; ++l) s += double(gs[c * L + l]);
                        gb.data[size_t(c)] += T(s);
                      }
                    }
                    if (t.needs_grad(x)) {
                      Tensor<T>& gx = t.grad_of(x);
                      // dxhat = gain[c] * dy; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                      double m1 = 0.0, m2 = 0.0;
                      for (int64_t c = 0; c < C; ++c)
                        for (int64_t l = 0; l < L; ++l) {
                          double dxh = double(gs[c * L + l]) * double(G2.data[size_t(c)]);
                          double xh = (double(xs[c * L + l]) - mu) * inv;
                          m1 += dxh;
                          m2 += dxh * xh;
                        }
                      m1 /= double(N);
                      m2 /= double(N);
                      T* gxs = &gx.data[size_t(b * N)];
                      for (int64_t c = 0; c < C; ++c)
                        for (int64_t l = 0; l < L; ++l) {
                          double dxh = double(gs[c * L + l]) * double(G2.data[size_t(c)]);
                          double xh = (double(xs[c * L + l]) - mu) * inv;
                          gxs[c * L + l] += T(inv * (dxh - m1 - xh * m2));
                        }
                    }
                  }
                });
  }

  // Builds a full slot matrix from observed-token rows and a shared mask
  // vector: out[obs_slots[r]] = obs[r], out[s] = mask_vec for s in
  // masked_slots. The two index lists must partition [0, total_rows).
  Id rows_mix(Id obs, std::vector<int64_t> obs_slots, Id mask_vec, std::vector<int64_t> masked_slots,
              int64_t total_rows) {
    const Tensor<T>& O = val(obs);
    const Tensor<T>& M = val(mask_vec);
    require_rank(O, 2, "rows_mix");
    int64_t D = O.dim(1);
    if (M.numel() != D) throw Error::structural("rows_mix: mask token width mismatch");
    if (int64_t(obs_slots.size()) != O.dim(0)) throw Error::structural("rows_mix: slot count mismatch");
    if (int64_t(obs_slots.size() + masked_slots.size()) != total_rows)
      throw Error::structural("rows_mix: slots do not partition the sequence");
    std::vector<uint8_t> seen(size_t(total_rows), 0);
    for (int64_t s : obs_slots) seen.at(size_t(s))++;
    for (int64_t s : masked_slots) seen.at(size_t(s))++;
    for (uint8_t c : seen)
      if (c != 1) throw Error::structural("rows_mix: slots overlap or leave gaps");
    Tensor<T> out = Tensor<T>::zeros({total_rows, D});
    for (size_t r = 0; r < obs_slots.size(); ++r)
      for (int64_t j = 0; j < D; ++j) out.at(obs_slots[r], j) = O.at(int64_t(r), j);
    for (int64_t s : masked_slots)
      for (int64_t j = 0; j < D; ++j) out.at(s, j) = M.data[size_t(j)];
    return make(std::move(out), {obs, mask_vec},
                [obs, mask_vec, obs_slots = std::move(obs_slots),
                 masked_slots = std::move(masked_slots)](Tape& t, const Tensor<T>& g) {
                  int64_t D = g.dim(1);
                  if (t.needs_grad(obs)) {
                    Tensor<T>& go = t.grad_of(obs);
                    for (size_t r = 0; r < obs_slots.size(); ++r)
                      for (int64_t j = 0; j < D; ++j) go.at(int64_t(r), j) += g.at(obs_slots[r], j);
                  }
                  if (t.needs_grad(mask_vec)) {
                    Tensor<T>& gm = t.grad_of(mask_vec);
                    for (int64_t s : masked_slots)
                      for (int64_t j = 0; j < D; ++j) gm.data[size_t(j)] += g.at(s, j);
                  }
                });
  }

  // ---- reductions / losses ----

  Id sum_all(Id a) {
    const Tensor<T>& A = val(a);
    double s = 0.0;
    for (T v : A.data) s += double(v);
    return make(Tensor<T>::scalar(T(s)), {a}, [a](Tape& t, const Tensor<T>& g) {
      Tensor<T>& ga = t.grad_of(a);
      for (auto& v : ga.data) v += g.data[0];
    });
  }

  Id mean_all(Id a) {
    const Tensor<T>& A = val(a);
    double s = 0.0;
    for (T v : A.data) s += double(v);
    T inv = T(1.0 / double(A.numel()));
    return make(Tensor<T>::scalar(T(s / double(A.numel()))), {a}, [a, inv](Tape& t, const Tensor<T>& g) {
      Tensor<T>& ga = t.grad_of(a);
      for (auto& v : ga.data) v += g.data[0] * inv;
    });
  }

  // Mean over rows of the squared Euclidean distance between pred and
  // target rows: (1/R) * sum_ij (pred_ij - target_ij)^2.
  Id mean_sq_err_rows(Id pred, Id target) {
    const Tensor<T>&P = val(pred), &Tg = val(target);
    require_rank(P, 2, "mean_sq_err_rows");
    check_same_shape(P, Tg, "mean_sq_err_rows");
    if (P.dim(0) == 0) throw Error::loss_undefined("mean_sq_err_rows: empty row set");
    double s = 0.0;
    for (size_t i = 0; i < P.data.size(); ++i) {
      double d = double(P.data[i]) - double(Tg.data[i]);
      s += d * d;
    }
    int64_t R = P.dim(0);
    return make(Tensor<T>::scalar(T(s / double(R))), {pred, target},
                [pred, target, R](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>&P2 = t.val(pred), &T2 = t.val(target);
                  T c = g.data[0] * T(2.0 / double(R));
                  if (t.needs_grad(pred)) {
                    Tensor<T>& gp = t.grad_of(pred);
                    for (size_t i = 0; i < P2.data.size(); ++i)
                      gp.data[i] += c * (P2.data[i] - T2.data[i]);
                  }
                  if (t.needs_grad(target)) {
                    Tensor<T>& gt = t.grad_of(target);
                    for (size_t i = 0; i < P2.data.size(); ++i)
                      gt.data[i] -= c * (P2.data[i] - T2.data[i]);
                  }
                });
  }

  // Mean binary cross-entropy over logits (numerically stable form).
  Id bce_with_logits(Id logits, std::vector<T> labels) {
    const Tensor<T>& Z = val(logits);
    if (Z.numel() != int64_t(labels.size()))
      throw Error::structural("bce_with_logits: logits/labels size mismatch");
    double s = 0.0;
    for (size_t i = 0; i < labels.size(); ++i) {
      double z = double(Z.data[i]), y = double(labels[i]);
      s += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    }
    int64_t B = Z.numel();
    return make(Tensor<T>::scalar(T(s / double(B))), {logits},
                [logits, labels = std::move(labels), B](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>& Z2 = t.val(logits);
                  Tensor<T>& gz = t.grad_of(logits);
                  T c = g.data[0] / T(double(B));
                  for (size_t i = 0; i < labels.size(); ++i) {
                    double z = double(Z2.data[i]);
                    double sig = 1.0 / (1.0 + std::exp(-z));
                    gz.data[i] += c * T(sig - double(labels[i]));
                  }
                });
  }

  // ---- backward ----

  void backward(Id root, T seed = T(1)) {
    Node& r = nodes_[size_t(root)];
    if (r.value.numel() != 1) throw Error::structural("backward: root must be scalar");
    if (!r.needs_grad) return;
    grad_of(root).data[0] += seed;
    for (int64_t i = root; i >= 0; --i) {
      Node& n = nodes_[size_t(i)];
      if (n.back && n.needs_grad && !n.grad.empty()) n.back(*this);
    }
  }

 private:
  std::vector<Node> nodes_;

  void require_rank(const Tensor<T>& t, int r, const char* op) const {
    if (t.rank() != r)
      throw Error::structural(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                              shape_str(t.shape));
  }

  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return Id(nodes_.size() - 1);
  }

  void accum_into(Id id, const T* src, size_t n) {
    Tensor<T>& g = grad_of(id);
    for (size_t i = 0; i < n; ++i) g.data[i] += src[i];
  }

  // Wraps an op's backward body: it receives the tape and this node's
  // gradient. needs_grad is the OR over parents.
  template <typename F>
  Id make(Tensor<T> value, const std::vector<Id>& parents, F&& back_body) {
    Node n;
    n.value = std::move(value);
    for (Id p : parents) n.needs_grad = n.needs_grad || nodes_[size_t(p)].needs_grad;
    Id id = Id(nodes_.size());
    if (n.needs_grad) {
      n.back = [id, body = std::forward<F>(back_body)](Tape& t) {
        body(t, t.nodes_[size_t(id)].grad);
      };
    }
    return push(std::move(n));
  }
};

}  // namespace stf
