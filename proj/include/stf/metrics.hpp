#pragma once

#include <vector>

#include "stf/common.hpp"

namespace stf {

// ROC-AUC of scores against binary labels, trapezoidal over all
// thresholds; tied scores are handled by midrank. Throws when only one
// class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Coefficient of determination 1 - SSE/SST (SST about the mean of
// `truth`). May be negative; throws when truth has zero variance.
double r_squared(const std::vector<double>& pred, const std::vector<double>& truth);

double mean_squared_error(const std::vector<double>& pred, const std::vector<double>& truth);

// Percentile in [0,1] with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

double mean(const std::vector<double>& v);

// Standard error of the mean: sample std (n-1 denominator) / sqrt(n).
double sem(const std::vector<double>& v);

}  // namespace stf
