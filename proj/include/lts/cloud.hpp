#pragma once

#include "lts/common.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lts {

/// Ground-truth stability class. Values match the on-disk `gt` column.
enum class StabilityClass : std::uint8_t { kStable = 0, kDynamic = 1 };

struct Point {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> normal;
};

/**
 * Ordered point set of one session.
 *
 * Stored as parallel channels. `positions` is mandatory; `normals` and
 * `ground_truth` are either empty or have one entry per point. Every
 * filtering operation carries all present channels along.
 */
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  std::vector<StabilityClass> ground_truth;
  std::string frame_id;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_normals() const { return !normals.empty(); }
  bool has_ground_truth() const { return !ground_truth.empty(); }

  Point point(std::size_t i) const;
  void push_back(const Point& p);

  /// Copy of the points at `indices`, in that order, with all channels.
  PointCloud select(std::span<const std::size_t> indices) const;

  /// Throws Error if channel sizes disagree, a coordinate is not finite or a
  /// normal is not unit length.
  void validate() const;
};

/**
 * Exact nearest-neighbour index (static kd-tree) over a fixed point set.
 * Immutable after construction; queries are const and thread-safe.
 */
class SpatialIndex {
public:
  struct Neighbor {
    std::size_t index;
    double squared_distance;
  };

  explicit SpatialIndex(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  Neighbor nearest(const Vec3& query) const;

  /// The k closest points sorted by distance (ties by index). Returns fewer
  /// when the index holds fewer than k points.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k) const;

private:
  struct Node {
    // Leaf when axis < 0: [begin, end) into order_.
    int axis = -1;
    double split = 0.0;
    std::uint32_t left = 0, right = 0;
    std::uint32_t begin = 0, end = 0;
  };

  std::uint32_t build(std::uint32_t begin, std::uint32_t end);
  template <typename Visitor>
  void search(std::uint32_t node, const Vec3& q, Visitor& visit) const;

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

SpatialIndex build_index(const PointCloud& cloud);

/// Euclidean distance from q to the closest indexed point.
double nearest_distance(const SpatialIndex& index, const Vec3& q);

struct NormalParams {
  std::size_t k = 16;
  /// Normals are flipped to face this point. Defaults to centroid + 1 km up.
  std::optional<Vec3> viewpoint;
};

struct NormalEstimate {
  PointCloud cloud;
  /// Points whose neighbourhood was coincident or collinear; normal is +Z.
  std::vector<std::size_t> degenerate;
};

/// PCA normals: least-variance direction of each point and its k nearest
/// neighbours. Requires at least k + 1 points and k >= 3.
NormalEstimate estimate_normals(const PointCloud& cloud, const NormalParams& params = {});

}  // namespace lts
