#include "lts/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lts {

void TilingParams::validate() const {
  if (!(submap_size_xy > 0.0)) throw Error("submap_size_xy must be positive");
  if (!(stride_fraction > 0.0 && stride_fraction <= 1.0))
    throw Error("stride_fraction must be in (0, 1]");
  if (points_per_submap < 1) throw Error("points_per_submap must be >= 1");
}

bool TileGrid::contains(int ix, int iy, const Vec3& p) const {
  const Eigen::Vector2d o = origin(ix, iy);
  const auto inside = [&](double v, double lo, bool last) {
    return v >= lo && (v < lo + size || (last && v <= lo + size));
  };
  return inside(p.x(), o.x(), ix == nx - 1) && inside(p.y(), o.y(), iy == ny - 1);
}

TileGrid tile_grid(const PointCloud& cloud, const TilingParams& params) {
  params.validate();
  if (cloud.empty()) throw Error("empty input cloud");
  Eigen::Vector2d lo = cloud.positions.front().head<2>(), hi = lo;
  for (const auto& p : cloud.positions) {
    lo = lo.cwiseMin(p.head<2>());
    hi = hi.cwiseMax(p.head<2>());
  }
  TileGrid grid;
  grid.min = lo;
  grid.size = params.submap_size_xy;
  grid.stride = params.stride();
  const auto count = [&](double extent) {
    if (extent <= grid.size) return 1;
    // Slack keeps exact multiples (e.g. 30 m / 5 m) from gaining a tile.
    return static_cast<int>(std::ceil((extent - grid.size) / grid.stride - 1e-9)) + 1;
  };
  grid.nx = count(hi.x() - lo.x());
  grid.ny = count(hi.y() - lo.y());
  return grid;
}

std::vector<std::vector<std::size_t>> tile_members(const PointCloud& cloud, const TileGrid& grid) {
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(grid.nx) * grid.ny);
  const auto range = [&](double offset, int n) {
    const int hi = std::min(n - 1, static_cast<int>(std::floor(offset / grid.stride)));
    const int lo = std::max(0, static_cast<int>(std::floor((offset - grid.size) / grid.stride)));
    return std::pair{lo, hi};
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const auto [x0, x1] = range(p.x() - grid.min.x(), grid.nx);
    const auto [y0, y1] = range(p.y() - grid.min.y(), grid.ny);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix)
        if (grid.contains(ix, iy, p)) members[static_cast<std::size_t>(iy) * grid.nx + ix].push_back(i);
  }
  return members;
}

std::vector<Submap> tile_submaps(const LabelledCloud& map, const TilingParams& params) {
  if (map.cloud.empty()) throw Error("empty input cloud");
  if (map.labels.size() != map.cloud.size()) throw Error("label count does not match point count");
  const TileGrid grid = tile_grid(map.cloud, params);
  const auto members = tile_members(map.cloud, grid);
  const std::size_t n = params.points_per_submap;

  std::vector<Submap> out;
  for (std::size_t tile = 0; tile < members.size(); ++tile) {
    const auto& pts = members[tile];
    if (pts.empty() || pts.size() < params.min_points) continue;
    Rng rng(derive_seed(params.seed, tile));

    std::vector<std::size_t> sample;
    sample.reserve(n);
    if (pts.size() >= n) {
      std::vector<std::size_t> pool = pts;
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + rng.index(pool.size() - i);
        std::swap(pool[i], pool[j]);
      }
      sample.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n));
    } else {
      // Every member once, remainder drawn with replacement, then shuffled.
      sample = pts;
      while (sample.size() < n) sample.push_back(pts[rng.index(pts.size())]);
      for (std::size_t i = sample.size() - 1; i > 0; --i) std::swap(sample[i], sample[rng.index(i + 1)]);
    }

    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    for (auto i : pts) center += map.cloud.positions[i].head<2>();
    center /= static_cast<double>(pts.size());

    Submap sm;
    sm.tile_origin = grid.origin(static_cast<int>(tile % grid.nx), static_cast<int>(tile / grid.nx));
    sm.center = center;
    sm.source_indices = sample;
    sm.positions.reserve(n);
    sm.labels.reserve(n);
    for (auto i : sample) {
      Vec3 p = map.cloud.positions[i];
      p.head<2>() -= center;
      sm.positions.push_back(p);
      sm.labels.push_back(map.labels[i]);
      if (map.cloud.has_normals()) sm.normals.push_back(map.cloud.normals[i]);
    }
    out.push_back(std::move(sm));
  }
  return out;
}

void VoteAccumulator::add(std::span<const std::size_t> source_indices, std::span<const double> predictions) {
  if (source_indices.size() != predictions.size()) throw Error("prediction count does not match submap size");
  for (auto idx : source_indices)
    if (idx >= sum_.size()) throw Error("source index out of range");

  std::vector<std::size_t> order(source_indices.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return source_indices[a] < source_indices[b]; });
  for (std::size_t i = 0; i < order.size();) {
    const auto idx = source_indices[order[i]];
    double s = 0.0;
    std::size_t k = 0;
    for (; i < order.size() && source_indices[order[i]] == idx; ++i, ++k) s += predictions[order[i]];
    sum_[idx] += k == 1 ? s : s / static_cast<double>(k);
    ++count_[idx];
  }
}

void VoteAccumulator::add(const Submap& submap, std::span<const double> predictions) {
  add(submap.source_indices, predictions);
}

void VoteAccumulator::merge(const VoteAccumulator& other) {
  if (other.map_size() != map_size()) throw Error("accumulator size mismatch");
  for (std::size_t i = 0; i < sum_.size(); ++i) {
    sum_[i] += other.sum_[i];
    count_[i] += other.count_[i];
  }
}

VoteAccumulator accumulate_votes(VoteAccumulator acc, const Submap& submap,
                                 std::span<const double> predictions) {
  acc.add(submap, predictions);
  return acc;
}

double ResolvedScores::covered_fraction() const {
  if (covered.empty()) return 0.0;
  const auto n = std::count(covered.begin(), covered.end(), std::uint8_t{1});
  return static_cast<double>(n) / static_cast<double>(covered.size());
}

ResolvedScores resolve_votes(const VoteAccumulator& acc, std::size_t map_size) {
  if (map_size != acc.map_size()) throw Error("accumulator size does not match map size");
  ResolvedScores out;
  out.scores.assign(map_size, std::numeric_limits<double>::quiet_NaN());
  out.covered.assign(map_size, 0);
  for (std::size_t i = 0; i < map_size; ++i) {
    if (acc.count(i) == 0) continue;
    out.scores[i] = acc.sum(i) / static_cast<double>(acc.count(i));
    out.covered[i] = 1;
  }
  return out;
}

}  // namespace lts
