#include "lts/metrics.hpp"

#include "lts/labelling.hpp"
#include "lts/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lts {

RocCurve roc_curve(std::span<const double> scores, std::span<const StabilityClass> truth) {
  if (scores.size() != truth.size()) throw Error("length mismatch");
  const auto positives = static_cast<std::size_t>(
      std::count(truth.begin(), truth.end(), StabilityClass::kDynamic));
  const std::size_t negatives = truth.size() - positives;
  if (positives == 0 || negatives == 0) throw Error("degenerate ROC");
  for (double s : scores)
    if (std::isnan(s)) throw Error("NaN score");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == threshold; ++i)
      (truth[order[i]] == StabilityClass::kDynamic ? tp : fp) += 1;
    curve.points.push_back({threshold, static_cast<double>(tp) / static_cast<double>(positives),
                            static_cast<double>(fp) / static_cast<double>(negatives)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return std::clamp(area, 0.0, 1.0);
}

GmeanThreshold optimal_threshold_gmean(const RocCurve& curve) {
  if (curve.points.size() < 2) throw Error("ROC curve has no finite thresholds");
  GmeanThreshold best{std::numeric_limits<double>::infinity(), -1.0};
  // Ascending threshold order so equal g-means keep the smallest threshold.
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    if (std::isinf(it->threshold)) continue;
    const double g = std::sqrt(it->tpr * (1.0 - it->fpr));
    if (g > best.gmean) best = {it->threshold, g};
  }
  return best;
}

std::vector<StabilityClass> classify(std::span<const double> scores, double threshold) {
  std::vector<StabilityClass> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = scores[i] >= threshold ? StabilityClass::kDynamic : StabilityClass::kStable;
  return out;
}

IouResult miou(std::span<const StabilityClass> pred, std::span<const StabilityClass> truth) {
  if (pred.size() != truth.size()) throw Error("length mismatch");
  std::array<std::size_t, 2> inter{}, uni{};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = static_cast<std::size_t>(pred[i]);
    const auto g = static_cast<std::size_t>(truth[i]);
    if (p > 1 || g > 1) throw Error("class outside {stable, dynamic}");
    if (p == g) {
      ++inter[p];
      ++uni[p];
    } else {
      ++uni[p];
      ++uni[g];
    }
  }
  IouResult out{};
  for (std::size_t c = 0; c < 2; ++c)
    out.per_class[c] = uni[c] == 0 ? 1.0 : static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
  out.miou = (out.per_class[0] + out.per_class[1]) / 2.0;
  return out;
}

EvaluationReport evaluate(std::span<const double> scores, std::span<const StabilityClass> truth,
                          double lambda, std::optional<double> fixed_threshold,
                          std::span<const double> reference_labels) {
  if (scores.size() != truth.size()) throw Error("length mismatch");
  if (!reference_labels.empty() && reference_labels.size() != scores.size())
    throw Error("reference label count does not match score count");

  std::vector<double> s, ref;
  std::vector<StabilityClass> t;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) continue;
    s.push_back(scores[i]);
    t.push_back(truth[i]);
    if (!reference_labels.empty()) ref.push_back(reference_labels[i]);
  }

  EvaluationReport report;
  report.points = s.size();
  report.skipped = scores.size() - s.size();
  report.lambda = lambda;
  const RocCurve curve = roc_curve(s, t);
  report.auc = auc(curve);
  const auto best = optimal_threshold_gmean(curve);
  report.optimal_threshold = best.threshold;
  report.gmean = best.gmean;
  report.optimal_threshold_meters = best.threshold < 1.0 ? label_to_distance(std::max(best.threshold, 0.0), lambda)
                                                         : std::numeric_limits<double>::infinity();
  report.applied_threshold = fixed_threshold.value_or(best.threshold);
  const auto iou = miou(classify(s, report.applied_threshold), t);
  report.miou = iou.miou;
  report.per_class_iou = iou.per_class;
  if (!ref.empty()) report.rmse = rmse(s, ref);
  return report;
}

}  // namespace lts
