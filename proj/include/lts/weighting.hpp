#pragma once

#include "lts/common.hpp"

#include <span>
#include <variant>
#include <vector>

namespace lts {

struct HistogramDensity {
  std::size_t bins = 100;
};

/// Gaussian kernel in label units, reflected at 0 and 1.
struct KernelDensity {
  double bandwidth = 0.05;
};

struct WeightParams {
  double alpha = 1.0;
  double epsilon = 1e-6;
  std::variant<HistogramDensity, KernelDensity> density = HistogramDensity{};

  void validate() const;
};

/// Density of the label distribution over [0, 1], evaluated on a regular
/// grid (bin centres for the histogram).
class LabelDensity {
public:
  LabelDensity(std::vector<double> values, bool piecewise_constant)
      : values_(std::move(values)), piecewise_constant_(piecewise_constant) {}

  double operator()(double label) const;
  std::span<const double> grid() const { return values_; }

private:
  std::vector<double> values_;
  bool piecewise_constant_;
};

/// Estimates the label density. Needs at least two labels, all in [0, 1].
LabelDensity label_density(std::span<const double> labels, const WeightParams& params = {});

/**
 * Density-based sample weights: rare labels get larger weights.
 *
 *   p'(y) = (p(y) - min p) / (max p - min p)   over the observed labels
 *   w(y)  = max(1 - alpha p'(y), eps) / mean_i max(1 - alpha p'(y_i), eps)
 *
 * p' is taken as 0 when the density is flat over the observed labels, which
 * gives unit weights. The weights average to 1.
 */
std::vector<double> dense_weights(std::span<const double> labels, const WeightParams& params = {});

/// sqrt(mean_i w_i (pred_i - truth_i)^2)
double weighted_rmse(std::span<const double> pred, std::span<const double> truth,
                     std::span<const double> weights);

double rmse(std::span<const double> pred, std::span<const double> truth);

}  // namespace lts
