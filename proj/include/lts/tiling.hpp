#pragma once

#include "lts/labelling.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lts {

struct TilingParams {
  double submap_size_xy = 10.0;  // m
  double stride_fraction = 0.5;
  std::size_t points_per_submap = 4096;
  std::size_t min_points = 64;
  std::uint64_t seed = 0;

  double stride() const { return stride_fraction * submap_size_xy; }
  void validate() const;
};

/// Fixed-size sample of one tile. Positions are shifted so the tile's point
/// centroid sits at x = y = 0; z is untouched.
struct Submap {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;  // empty when the source map has none
  std::vector<double> labels;
  std::vector<std::size_t> source_indices;
  Eigen::Vector2d tile_origin = Eigen::Vector2d::Zero();  // lower-left corner
  Eigen::Vector2d center = Eigen::Vector2d::Zero();       // xy shift applied

  std::size_t size() const { return positions.size(); }
};

struct TileGrid {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  double size = 0.0;
  double stride = 0.0;
  int nx = 0, ny = 0;

  Eigen::Vector2d origin(int ix, int iy) const {
    return min + Eigen::Vector2d(ix * stride, iy * stride);
  }
  /// Footprints are half-open, except the last tile on each axis which also
  /// takes the upper bound of the map.
  bool contains(int ix, int iy, const Vec3& p) const;
};

/// Regular grid of candidate tile origins covering the map's xy bounding box.
TileGrid tile_grid(const PointCloud& cloud, const TilingParams& params);

/// Point indices falling in each candidate tile, row-major (iy * nx + ix).
std::vector<std::vector<std::size_t>> tile_members(const PointCloud& cloud, const TileGrid& grid);

std::vector<Submap> tile_submaps(const LabelledCloud& map, const TilingParams& params);

/// Per-source-point running sum and count of predictions.
class VoteAccumulator {
public:
  explicit VoteAccumulator(std::size_t map_size) : sum_(map_size, 0.0), count_(map_size, 0) {}

  std::size_t map_size() const { return sum_.size(); }
  double sum(std::size_t i) const { return sum_.at(i); }
  std::size_t count(std::size_t i) const { return count_.at(i); }

  /// Adds one vote per distinct source point of `submap`; duplicate samples
  /// of a point contribute their mean as that single vote.
  void add(const Submap& submap, std::span<const double> predictions);
  void add(std::span<const std::size_t> source_indices, std::span<const double> predictions);

  void merge(const VoteAccumulator& other);

private:
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
};

VoteAccumulator accumulate_votes(VoteAccumulator acc, const Submap& submap,
                                 std::span<const double> predictions);

struct ResolvedScores {
  std::vector<double> scores;  // NaN where uncovered
  std::vector<std::uint8_t> covered;

  double covered_fraction() const;
};

ResolvedScores resolve_votes(const VoteAccumulator& acc, std::size_t map_size);

}  // namespace lts
