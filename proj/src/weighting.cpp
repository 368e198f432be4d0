#include "lts/weighting.hpp"

#include <algorithm>
#include <cmath>

namespace lts {

namespace {

constexpr std::size_t kKernelGrid = 1024;

std::size_t bin_of(double label, std::size_t bins) {
  return std::min(static_cast<std::size_t>(label * static_cast<double>(bins)), bins - 1);
}

}  // namespace

void WeightParams::validate() const {
  if (!(alpha >= 0.0)) throw Error("alpha must be >= 0");
  if (!(epsilon > 0.0)) throw Error("epsilon must be positive");
  if (const auto* h = std::get_if<HistogramDensity>(&density); h && h->bins < 1)
    throw Error("histogram needs at least one bin");
  if (const auto* k = std::get_if<KernelDensity>(&density); k && !(k->bandwidth > 0.0))
    throw Error("kernel bandwidth must be positive");
}

double LabelDensity::operator()(double label) const {
  const std::size_t n = values_.size();
  const double x = std::clamp(label, 0.0, 1.0);
  if (piecewise_constant_) return values_[bin_of(x, n)];
  // Linear interpolation between cell centres.
  const double pos = std::clamp(x * static_cast<double>(n) - 0.5, 0.0, static_cast<double>(n - 1));
  const auto i0 = std::min(static_cast<std::size_t>(pos), n - 2);
  const double t = pos - static_cast<double>(i0);
  return (1.0 - t) * values_[i0] + t * values_[i0 + 1];
}

LabelDensity label_density(std::span<const double> labels, const WeightParams& params) {
  params.validate();
  if (labels.size() < 2) throw Error("density estimation needs at least two labels");
  for (double y : labels)
    if (!(y >= 0.0 && y <= 1.0)) throw Error("label outside [0, 1]");
  const double n = static_cast<double>(labels.size());

  if (const auto* h = std::get_if<HistogramDensity>(&params.density)) {
    std::vector<double> density(h->bins, 0.0);
    for (double y : labels) density[bin_of(y, h->bins)] += 1.0;
    const double scale = static_cast<double>(h->bins) / n;  // count / (n * width)
    for (double& d : density) d *= scale;
    return LabelDensity(std::move(density), true);
  }

  // Binned Gaussian KDE, reflected at both ends of [0, 1].
  const double bandwidth = std::get<KernelDensity>(params.density).bandwidth;
  const std::size_t g = kKernelGrid;
  const double width = 1.0 / static_cast<double>(g);
  std::vector<double> counts(g, 0.0);
  for (double y : labels) counts[bin_of(y, g)] += 1.0;

  std::vector<double> density(g, 0.0);
  const double norm = 1.0 / (n * bandwidth * std::sqrt(2.0 * M_PI));
  const auto reach = static_cast<long>(std::ceil(5.0 * bandwidth / width));
  for (std::size_t i = 0; i < g; ++i) {
    const double xi = (static_cast<double>(i) + 0.5) * width;
    double acc = 0.0;
    const long lo = std::max(0L, static_cast<long>(i) - reach);
    const long hi = std::min(static_cast<long>(g) - 1, static_cast<long>(i) + reach);
    for (long j = lo; j <= hi; ++j) {
      if (counts[static_cast<std::size_t>(j)] == 0.0) continue;
      const double xj = (static_cast<double>(j) + 0.5) * width;
      double k = 0.0;
      for (double mirror : {xj, -xj, 2.0 - xj}) {
        const double u = (xi - mirror) / bandwidth;
        k += std::exp(-0.5 * u * u);
      }
      acc += counts[static_cast<std::size_t>(j)] * k;
    }
    density[i] = acc * norm;
  }
  return LabelDensity(std::move(density), false);
}

std::vector<double> dense_weights(std::span<const double> labels, const WeightParams& params) {
  params.validate();
  if (labels.empty()) throw Error("no labels to weight");
  if (params.alpha == 0.0 || labels.size() < 2) return std::vector<double>(labels.size(), 1.0);

  const LabelDensity density = label_density(labels, params);
  std::vector<double> p(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) p[i] = density(labels[i]);
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  const double p_min = *lo, p_range = *hi - *lo;

  std::vector<double> w(labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double normalized = p_range > 0.0 ? (p[i] - p_min) / p_range : 0.0;
    w[i] = std::max(1.0 - params.alpha * normalized, params.epsilon);
    total += w[i];
  }
  const double mean = total / static_cast<double>(w.size());
  for (double& v : w) v /= mean;
  return w;
}

double weighted_rmse(std::span<const double> pred, std::span<const double> truth,
                     std::span<const double> weights) {
  if (pred.size() != truth.size() || pred.size() != weights.size()) throw Error("length mismatch");
  if (pred.empty()) throw Error("no samples");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (weights[i] < 0.0) throw Error("negative weight");
    const double r = pred[i] - truth[i];
    sum += weights[i] * r * r;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw Error("length mismatch");
  const std::vector<double> ones(pred.size(), 1.0);
  return weighted_rmse(pred, truth, ones);
}

}  // namespace lts
