#pragma once

#include "lts/cloud.hpp"

#include <vector>

namespace lts {

/// Cloth simulation ground filter parameters.
struct CsfParams {
  double cloth_resolution = 0.5;  // m
  int rigidness = 2;              // 1 (soft) .. 3 (stiff)
  int iterations = 500;
  double class_threshold = 0.5;  // m
  double time_step = 0.65;

  void validate() const;
};

struct SorParams {
  std::size_t k = 12;
  double std_multiplier = 1.0;

  void validate() const;
};

struct GroundSplit {
  PointCloud offground;
  PointCloud ground;
  std::vector<std::size_t> offground_indices;
  std::vector<std::size_t> ground_indices;
};

/// Splits a cloud into ground and off-ground points by draping a simulated
/// cloth over the upside-down cloud. Deterministic.
GroundSplit remove_ground_csf(const PointCloud& cloud, const CsfParams& params = {});

struct SorResult {
  PointCloud cloud;
  std::vector<std::size_t> kept_indices;
};

/// Statistical outlier removal: keeps a point iff its mean distance to its k
/// nearest neighbours is at most mean + std_multiplier * stddev over the cloud.
SorResult remove_outliers_sor(const PointCloud& cloud, const SorParams& params = {});

}  // namespace lts
