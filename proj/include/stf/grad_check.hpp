#pragma once

#include <functional>
#include <string>
#include <vector>

#include "stf/tape.hpp"

namespace stf {

template <typename T>
struct GradCheckEntry {
  std::string name;
  T max_rel_err = T(0);
  int64_t worst_index = -1;
  T analytic = T(0);
  T numeric = T(0);
};

template <typename T>
struct GradCheckReport {
  std::vector<GradCheckEntry<T>> per_param;
  T max_rel_err = T(0);
  std::string worst_param;
};

// Compares reverse-mode gradients against central finite differences.
// loss_fn(want_grad) must run a deterministic forward pass (dropout off),
// accumulate gradients into the params when want_grad is true, and return
// the scalar loss. Meant to run with T=double.
template <typename T>
GradCheckReport<T> grad_check(const std::function<T(bool)>& loss_fn,
                              const std::vector<Param<T>*>& params, T eps) {
  for (Param<T>* p : params) p->zero_grad();
  T base = loss_fn(true);
  T replay = loss_fn(false);
  if (base != replay)
    throw Error::oracle_invalid("grad_check: two forward passes disagree (" + std::to_string(double(base)) +
                                " vs " + std::to_string(double(replay)) + "); loss_fn is not deterministic");

  std::vector<Tensor<T>> analytic;
  analytic.reserve(params.size());
  for (Param<T>* p : params) analytic.push_back(p->grad);

  GradCheckReport<T> report;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param<T>& p = *params[pi];
    GradCheckEntry<T> entry;
    entry.name = p.name;
    for (size_t i = 0; i < p.value.data.size(); ++i) {
      T saved = p.value.data[i];
      p.value.data[i] = saved + eps;
      T fp = loss_fn(false);
      p.value.data[i] = saved - eps;
      T fm = loss_fn(false);
      p.value.data[i] = saved;
      T fd = (fp - fm) / (T(2) * eps);
      T a = analytic[pi].data[i];
      T denom = std::max(std::max(std::abs(double(a)), std::abs(double(fd))), 1e-8);
      T rel = T(std::abs(double(a) - double(fd)) / denom);
      if (rel > entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = int64_t(i);
        entry.analytic = a;
        entry.numeric = fd;
      }
    }
    if (entry.max_rel_err > report.max_rel_err) {
      report.max_rel_err = entry.max_rel_err;
      report.worst_param = entry.name;
    }
    report.per_param.push_back(std::move(entry));
  }
  return report;
}

}  // namespace stf
