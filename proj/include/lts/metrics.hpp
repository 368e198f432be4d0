#pragma once

#include "lts/cloud.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace lts {

/// ROC over every distinct score; a point is called dynamic iff
/// score >= threshold. Dynamic is the positive class.
struct RocCurve {
  struct Point {
    double threshold;  // +inf for the (0, 0) start
    double tpr;
    double fpr;
  };
  std::vector<Point> points;  // threshold descending, fpr and tpr ascending
};

RocCurve roc_curve(std::span<const double> scores, std::span<const StabilityClass> truth);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

struct GmeanThreshold {
  double threshold;
  double gmean;
};

/// Threshold maximising sqrt(TPR * (1 - FPR)); ties go to the smallest.
GmeanThreshold optimal_threshold_gmean(const RocCurve& curve);

std::vector<StabilityClass> classify(std::span<const double> scores, double threshold);

struct IouResult {
  double miou;
  std::array<double, 2> per_class;  // indexed by StabilityClass
};

/// Mean intersection-over-union over {stable, dynamic}. A class absent from
/// both prediction and truth scores 1.
IouResult miou(std::span<const StabilityClass> pred, std::span<const StabilityClass> truth);

struct EvaluationReport {
  std::size_t points = 0;   // evaluated (covered) points
  std::size_t skipped = 0;  // uncovered points excluded
  double lambda = 0.5;
  double auc = 0.0;
  double optimal_threshold = 0.0;
  double optimal_threshold_meters = 0.0;
  double gmean = 0.0;
  /// Threshold actually applied for mIoU: a fixed one if given, else optimal.
  double applied_threshold = 0.0;
  double miou = 0.0;
  std::array<double, 2> per_class_iou{};
  std::optional<double> rmse;  // against reference labels, when supplied
};

/**
 * Scores a map against binary ground truth. NaN scores mark uncovered points
 * and are excluded. `reference_labels` enables the RMSE column.
 */
EvaluationReport evaluate(std::span<const double> scores, std::span<const StabilityClass> truth,
                          double lambda, std::optional<double> fixed_threshold = std::nullopt,
                          std::span<const double> reference_labels = {});

}  // namespace lts
