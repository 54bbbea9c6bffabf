#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stf/tape.hpp"

namespace stf {

// Learning-rate schedule: linear warm-up over `warmup_epochs` epochs
// (starting at target/warmup, reaching target at epoch warmup-1), then
// exponential decay by `decay_gamma` per epoch. Epochs are 0-based.
struct ScheduleCfg {
  double target_lr = 1e-3;
  int warmup_epochs = 5;
  double decay_gamma = 0.99;
};

inline double lr_schedule(int epoch, const ScheduleCfg& cfg) {
  if (epoch < 0) throw Error::structural("lr_schedule: negative epoch");
  if (cfg.warmup_epochs <= 0) throw Error::validation("lr_schedule: warmup_epochs must be positive");
  if (!(cfg.decay_gamma > 0.0 && cfg.decay_gamma <= 1.0))
    throw Error::validation("lr_schedule: decay_gamma must be in (0,1]");
  if (epoch < cfg.warmup_epochs)
    return cfg.target_lr * double(epoch + 1) / double(cfg.warmup_epochs);
  return cfg.target_lr * std::pow(cfg.decay_gamma, double(epoch - cfg.warmup_epochs + 1));
}

template <typename T>
struct AdamWCfg {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(1e-2);
};

// Decoupled-weight-decay Adam over one parameter group. Weight decay is
// applied first, independently of the adaptive step.
template <typename T>
class AdamW {
 public:
  AdamW(std::vector<Param<T>*> params, AdamWCfg<T> cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    for (Param<T>* p : params_) {
      moments_m_.push_back(Tensor<T>::zeros(p->value.shape));
      moments_v_.push_back(Tensor<T>::zeros(p->value.shape));
    }
  }

  int64_t step_count() const { return t_; }
  const AdamWCfg<T>& cfg() const { return cfg_; }
  const std::vector<Param<T>*>& params() const { return params_; }

  // State accessors for checkpointing.
  Tensor<T>& moment_m(size_t i) { return moments_m_[i]; }
  Tensor<T>& moment_v(size_t i) { return moments_v_[i]; }
  void set_step_count(int64_t t) { t_ = t; }

  void step(T lr) {
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Param<T>& p = *params_[pi];
      if (p.value.shape != p.grad.shape)
        throw Error::structural("adamw: grad shape mismatch for " + p.name);
      for (T g : p.grad.data)
        if (!std::isfinite(double(g)))
          throw Error::training("adamw: non-finite gradient in parameter " + p.name);
    }
    t_ += 1;
    double bc1 = 1.0 - std::pow(double(cfg_.beta1), double(t_));
    double bc2 = 1.0 - std::pow(double(cfg_.beta2), double(t_));
    for (size_t pi = 0; pi < params_.size(); ++pi) {
      Param<T>& p = *params_[pi];
      Tensor<T>& m = moments_m_[pi];
      Tensor<T>& v = moments_v_[pi];
      for (size_t i = 0; i < p.value.data.size(); ++i) {
        T g = p.grad.data[i];
        p.value.data[i] -= lr * cfg_.weight_decay * p.value.data[i];
        m.data[i] = cfg_.beta1 * m.data[i] + (T(1) - cfg_.beta1) * g;
        v.data[i] = cfg_.beta2 * v.data[i] + (T(1) - cfg_.beta2) * g * g;
        double mhat = double(m.data[i]) / bc1;
        double vhat = double(v.data[i]) / bc2;
        p.value.data[i] -= T(double(lr) * mhat / (std::sqrt(vhat) + double(cfg_.eps)));
      }
    }
  }

 private:
  std::vector<Param<T>*> params_;
  AdamWCfg<T> cfg_;
  std::vector<Tensor<T>> moments_m_;
  std::vector<Tensor<T>> moments_v_;
  int64_t t_ = 0;
};

template <typename T>
inline void zero_grads(const std::vector<Param<T>*>& params) {
  for (Param<T>* p : params) p->zero_grad();
}

// Scales all gradients so their global L2 norm is at most max_norm.
// Returns the pre-clip norm.
template <typename T>
inline double clip_global_norm(const std::vector<Param<T>*>& params, double max_norm) {
  double sq = 0.0;
  for (Param<T>* p : params)
    for (T g : p->grad.data) sq += double(g) * double(g);
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    T s = T(max_norm / norm);
    for (Param<T>* p : params)
      for (T& g : p->grad.data) g *= s;
  }
  return norm;
}

}  // namespace stf
