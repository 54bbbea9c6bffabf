#include "stf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stf {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw Error::structural("auc: scores/labels size mismatch");
  int64_t n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw Error::validation("auc: labels must be 0 or 1");
    (y == 1 ? n_pos : n_neg)++;
  }
  if (n_pos == 0 || n_neg == 0)
    throw Error::undefined_metric("auc: undefined, only one class present");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midrank assignment over tied score groups, then the Mann-Whitney form.
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    double midrank = 0.5 * (double(i + 1) + double(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j + 1;
  }
  double u = pos_rank_sum - double(n_pos) * (double(n_pos) + 1.0) / 2.0;
  return u / (double(n_pos) * double(n_neg));
}

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw Error::structural("mse: size mismatch or empty input");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double d = pred[i] - truth[i];
    s += d * d;
  }
  return s / double(pred.size());
}

double r_squared(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw Error::structural("r_squared: size mismatch or empty input");
  double mu = mean(truth);
  double sse = 0.0, sst = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    double e = truth[i] - pred[i];
    double d = truth[i] - mu;
    sse += e * e;
    sst += d * d;
  }
  if (sst <= 0.0) throw Error::undefined_metric("r_squared: truth has zero variance");
  return 1.0 - sse / sst;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error::structural("percentile: empty input");
  if (q < 0.0 || q > 1.0) throw Error::structural("percentile: q must be in [0,1]");
  std::sort(values.begin(), values.end());
  if (values.size() == 1) return values[0];
  double rank = q * double(values.size() - 1);
  size_t lo = size_t(rank);
  double frac = rank - double(lo);
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw Error::structural("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double sem(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  double sd = std::sqrt(ss / double(v.size() - 1));
  return sd / std::sqrt(double(v.size()));
}

}  // namespace stf
