#pragma once

#include "lts/cloud.hpp"
#include "lts/labelling.hpp"
#include "lts/preprocess.hpp"
#include "lts/registration.hpp"
#include "lts/tiling.hpp"
#include "lts/weighting.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lts {

/// Every tunable of the labelling pipeline, in stage order.
struct PipelineConfig {
  CsfParams csf;
  SorParams sor;
  NormalParams normals;
  IcpParams icp = [] {
    IcpParams p;
    p.align_centroids = true;
    p.refine_correspondence_dist = 0.3;
    return p;
  }();
  MultistartParams icp_starts;
  double lambda = 0.5;
  TilingParams tiling;
  WeightParams weights;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SessionRole { kReference, kOther };

struct SessionEntry {
  std::string id;
  std::string cloud_path;
  SessionRole role = SessionRole::kOther;
};

/// Pipeline input: the session clouds (one reference) plus parameters.
struct SessionManifest {
  std::vector<SessionEntry> sessions;
  PipelineConfig config;

  /// Index of the single reference session; throws unless exactly one.
  std::size_t reference_index() const;
  void validate() const;
};

}  // namespace lts
