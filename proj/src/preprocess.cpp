#include "lts/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace lts {

void CsfParams::validate() const {
  if (!(cloth_resolution > 0.0)) throw Error("cloth_resolution must be positive");
  if (rigidness < 1 || rigidness > 3) throw Error("rigidness must be 1, 2 or 3");
  if (iterations < 1) throw Error("iterations must be >= 1");
  if (!(class_threshold > 0.0)) throw Error("class_threshold must be positive");
  if (!(time_step > 0.0)) throw Error("time_step must be positive");
}

void SorParams::validate() const {
  if (k < 1) throw Error("SOR k must be >= 1");
  if (!(std_multiplier > 0.0)) throw Error("std_multiplier must be positive");
}

namespace {

constexpr double kGravity = 0.2;
constexpr double kDamping = 0.01;
constexpr int kBuffer = 2;  // extra cloth nodes beyond the bounding box
constexpr double kSettledMove = 1e-5;

// Grid of cloth particles in the inverted frame, where height grows downward
// into the original cloud. Nodes fall under gravity, are held together by
// springs and stick once they touch the inverted surface.
class Cloth {
public:
  Cloth(const PointCloud& cloud, const CsfParams& params) : params_(params) {
    Vec3 lo = cloud.positions.front(), hi = lo;
    for (const auto& p : cloud.positions) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double res = params.cloth_resolution;
    origin_x_ = lo.x() - kBuffer * res;
    origin_y_ = lo.y() - kBuffer * res;
    nx_ = static_cast<int>(std::ceil((hi.x() - lo.x()) / res)) + 2 * kBuffer + 1;
    ny_ = static_cast<int>(std::ceil((hi.y() - lo.y()) / res)) + 2 * kBuffer + 1;

    const std::size_t n = static_cast<std::size_t>(nx_) * ny_;
    surface_.assign(n, -std::numeric_limits<double>::infinity());
    for (const auto& p : cloud.positions) {
      const auto node = nearest_node(p.x(), p.y());
      surface_[node] = std::max(surface_[node], -p.z());
    }
    fill_empty_surface();

    const double start = -lo.z() + 0.05;
    height_.assign(n, start);
    previous_.assign(n, start);
    movable_.assign(n, 1);
  }

  void simulate() {
    // Spring correction factors for one movable end / two movable ends.
    const double single_move = 1.0 - std::pow(0.7, params_.rigidness);
    const double double_move = 0.5 * (1.0 - std::pow(0.4, params_.rigidness));
    const double drop = kGravity * params_.time_step * params_.time_step;

    for (int it = 0; it < params_.iterations; ++it) {
      const std::vector<double> before = height_;
      for (std::size_t i = 0; i < height_.size(); ++i) {
        if (!movable_[i]) continue;
        const double h = height_[i];
        height_[i] = h + (h - previous_[i]) * (1.0 - kDamping) - drop;
        previous_[i] = h;
      }
      for (int y = 0; y < ny_; ++y) {
        for (int x = 0; x < nx_; ++x) {
          if (x + 1 < nx_) relax(at(x, y), at(x + 1, y), single_move, double_move);
          if (y + 1 < ny_) relax(at(x, y), at(x, y + 1), single_move, double_move);
        }
      }
      bool any_movable = false;
      double max_move = 0.0;
      for (std::size_t i = 0; i < height_.size(); ++i) {
        if (!movable_[i]) continue;
        if (height_[i] <= surface_[i]) {
          height_[i] = surface_[i];
          previous_[i] = surface_[i];
          movable_[i] = 0;
        } else {
          any_movable = true;
        }
        max_move = std::max(max_move, std::abs(height_[i] - before[i]));
      }
      if (!any_movable || (it > 0 && max_move < kSettledMove)) break;
    }
  }

  /// Bilinear cloth height at (x, y), inverted frame.
  double height_at(double x, double y) const {
    const double res = params_.cloth_resolution;
    const double fx = std::clamp((x - origin_x_) / res, 0.0, nx_ - 1.0);
    const double fy = std::clamp((y - origin_y_) / res, 0.0, ny_ - 1.0);
    const int x0 = std::min(static_cast<int>(fx), nx_ - 2);
    const int y0 = std::min(static_cast<int>(fy), ny_ - 2);
    const double tx = fx - x0, ty = fy - y0;
    return (1 - tx) * (1 - ty) * height_[at(x0, y0)] + tx * (1 - ty) * height_[at(x0 + 1, y0)] +
           (1 - tx) * ty * height_[at(x0, y0 + 1)] + tx * ty * height_[at(x0 + 1, y0 + 1)];
  }

private:
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * nx_ + x; }

  std::size_t nearest_node(double px, double py) const {
    const double res = params_.cloth_resolution;
    const int x = std::clamp(static_cast<int>(std::lround((px - origin_x_) / res)), 0, nx_ - 1);
    const int y = std::clamp(static_cast<int>(std::lround((py - origin_y_) / res)), 0, ny_ - 1);
    return at(x, y);
  }

  void relax(std::size_t a, std::size_t b, double single_move, double double_move) {
    const double diff = height_[b] - height_[a];
    if (movable_[a] && movable_[b]) {
      height_[a] += double_move * diff;
      height_[b] -= double_move * diff;
    } else if (movable_[a]) {
      height_[a] += single_move * diff;
    } else if (movable_[b]) {
      height_[b] -= single_move * diff;
    }
  }

  // Nodes without points take the surface of the nearest filled node along
  // their row, falling back to their column.
  void fill_empty_surface() {
    const auto empty = [](double v) { return std::isinf(v); };
    std::vector<double> filled = surface_;
    double lowest = std::numeric_limits<double>::infinity();
    for (double v : surface_)
      if (!empty(v)) lowest = std::min(lowest, v);
    for (int y = 0; y < ny_; ++y) {
      for (int x = 0; x < nx_; ++x) {
        if (!empty(surface_[at(x, y)])) continue;
        double value = lowest;
        bool found = false;
        for (int d = 1; d < std::max(nx_, ny_) && !found; ++d) {
          for (auto [cx, cy] : {std::pair{x - d, y}, std::pair{x + d, y}}) {
            if (cx >= 0 && cx < nx_ && !empty(surface_[at(cx, cy)])) {
              value = found ? std::max(value, surface_[at(cx, cy)]) : surface_[at(cx, cy)];
              found = true;
            }
          }
        }
        for (int d = 1; d < ny_ && !found; ++d) {
          for (int cy : {y - d, y + d}) {
            if (cy >= 0 && cy < ny_ && !empty(surface_[at(x, cy)])) {
              value = found ? std::max(value, surface_[at(x, cy)]) : surface_[at(x, cy)];
              found = true;
            }
          }
        }
        filled[at(x, y)] = value;
      }
    }
    surface_ = std::move(filled);
  }

  CsfParams params_;
  double origin_x_ = 0.0, origin_y_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<double> surface_;
  std::vector<double> height_;
  std::vector<double> previous_;
  std::vector<char> movable_;
};

}  // namespace

GroundSplit remove_ground_csf(const PointCloud& cloud, const CsfParams& params) {
  params.validate();
  if (cloud.size() < 4) throw Error("too small for ground estimation");

  Cloth cloth(cloud, params);
  cloth.simulate();

  GroundSplit split;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.positions[i];
    const double gap = std::abs(cloth.height_at(p.x(), p.y()) - (-p.z()));
    (gap <= params.class_threshold ? split.ground_indices : split.offground_indices).push_back(i);
  }
  split.ground = cloud.select(split.ground_indices);
  split.offground = cloud.select(split.offground_indices);
  return split;
}

SorResult remove_outliers_sor(const PointCloud& cloud, const SorParams& params) {
  params.validate();
  if (cloud.size() <= params.k) throw Error("insufficient points for SOR");

  const SpatialIndex index = build_index(cloud);
  std::vector<double> mean_dist(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto neighbors = index.knn(cloud.positions[i], params.k + 1);
    // Drop the query itself (or a coincident duplicate, same distance).
    double sum = 0.0;
    for (std::size_t j = 1; j < neighbors.size(); ++j) sum += std::sqrt(neighbors[j].squared_distance);
    mean_dist[i] = sum / static_cast<double>(params.k);
  }

  double mean = 0.0;
  for (double d : mean_dist) mean += d;
  mean /= static_cast<double>(mean_dist.size());
  double var = 0.0;
  for (double d : mean_dist) var += (d - mean) * (d - mean);
  const double stddev = std::sqrt(var / static_cast<double>(mean_dist.size()));
  // Relative slack absorbs rounding when every neighbourhood is identical.
  const double gate = mean + params.std_multiplier * stddev + 1e-9 * mean;

  SorResult out;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (mean_dist[i] <= gate) out.kept_indices.push_back(i);
  out.cloud = cloud.select(out.kept_indices);
  return out;
}

}  // namespace lts
