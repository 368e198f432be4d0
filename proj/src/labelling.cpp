#include "lts/labelling.hpp"

#include <algorithm>
#include <cmath>

namespace lts {

void LabelledCloud::validate() const {
  cloud.validate();
  if (labels.size() != cloud.size()) throw Error("label count does not match point count");
  if (!d_max.empty() && d_max.size() != cloud.size())
    throw Error("d_max count does not match point count");
  for (double l : labels)
    if (!(l >= 0.0 && l <= 1.0)) throw Error("label outside [0, 1]");
}

std::vector<std::vector<double>> distance_features(const PointCloud& target,
                                                   std::span<const SpatialIndex> others) {
  if (others.empty()) throw Error("need at least two observations");
  std::vector<std::vector<double>> features(target.size(), std::vector<double>(others.size()));
  for (std::size_t i = 0; i < target.size(); ++i)
    for (std::size_t j = 0; j < others.size(); ++j)
      features[i][j] = nearest_distance(others[j], target.positions[i]);
  return features;
}

double stability_label(std::span<const double> d, double lambda) {
  if (d.empty()) throw Error("empty distance vector");
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  double largest = 0.0;
  for (double v : d) {
    if (!(v >= 0.0)) throw Error("invalid distance");
    largest = std::max(largest, v);
  }
  return -std::expm1(-lambda * largest);
}

double label_to_distance(double label, double lambda) {
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  if (!(label >= 0.0)) throw Error("label must be non-negative");
  if (label >= 1.0) throw Error("unbounded distance");
  return -std::log1p(-label) / lambda;
}

LabelledCloud label_map(std::span<const RegisteredMap> maps, const LabellingParams& params) {
  if (maps.size() < 2) throw Error("need at least two observations");
  if (params.reference_index >= maps.size()) throw Error("reference_index out of range");
  if (!(params.lambda > 0.0)) throw Error("lambda must be positive");

  std::vector<SpatialIndex> others;
  others.reserve(maps.size() - 1);
  for (std::size_t j = 0; j < maps.size(); ++j)
    if (j != params.reference_index) others.push_back(build_index(maps[j].cloud()));

  LabelledCloud out;
  out.cloud = maps[params.reference_index].cloud();
  const auto features = distance_features(out.cloud, others);
  out.labels.reserve(features.size());
  out.d_max.reserve(features.size());
  for (const auto& d : features) {
    out.d_max.push_back(*std::max_element(d.begin(), d.end()));
    out.labels.push_back(stability_label(d, params.lambda));
  }
  return out;
}

}  // namespace lts
