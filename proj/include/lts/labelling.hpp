#pragma once

#include "lts/cloud.hpp"
#include "lts/registration.hpp"

#include <span>
#include <vector>

namespace lts {

struct LabellingParams {
  double lambda = 0.5;  // 1/m
  std::size_t reference_index = 0;
};

/// A registered map with one stability score per point: ~0 persistent across
/// sessions, ~1 dynamic.
struct LabelledCloud {
  PointCloud cloud;
  std::vector<double> labels;
  std::vector<double> d_max;  // m

  std::size_t size() const { return cloud.size(); }
  void validate() const;
};

/// Row i holds, for point i of `target`, its distance to the closest point of
/// each map in `others` (in order).
std::vector<std::vector<double>> distance_features(const PointCloud& target,
                                                   std::span<const SpatialIndex> others);

/// 1 - exp(-lambda * max(d)).
double stability_label(std::span<const double> d, double lambda);

/// Inverse of the label mapping for a single distance: -ln(1 - l) / lambda.
double label_to_distance(double label, double lambda);

/// Labels the map at `params.reference_index` against every other map.
LabelledCloud label_map(std::span<const RegisteredMap> maps, const LabellingParams& params = {});

}  // namespace lts
