#include "lts/cloud.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>
#include <queue>

namespace lts {

namespace {

constexpr std::uint32_t kLeafSize = 8;

}  // namespace

Point PointCloud::point(std::size_t i) const {
  Point p{positions.at(i), std::nullopt};
  if (has_normals()) p.normal = normals[i];
  return p;
}

void PointCloud::push_back(const Point& p) {
  if (!empty() && p.normal.has_value() != has_normals())
    throw Error("cannot mix points with and without normals");
  positions.push_back(p.position);
  if (p.normal) normals.push_back(*p.normal);
}

PointCloud PointCloud::select(std::span<const std::size_t> indices) const {
  PointCloud out;
  out.frame_id = frame_id;
  out.positions.reserve(indices.size());
  for (auto i : indices) out.positions.push_back(positions.at(i));
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals[i]);
  }
  if (has_ground_truth()) {
    out.ground_truth.reserve(indices.size());
    for (auto i : indices) out.ground_truth.push_back(ground_truth[i]);
  }
  return out;
}

void PointCloud::validate() const {
  if (has_normals() && normals.size() != positions.size())
    throw Error("normal channel size does not match point count");
  if (has_ground_truth() && ground_truth.size() != positions.size())
    throw Error("ground truth channel size does not match point count");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite())
      throw Error("non-finite coordinate at point " + std::to_string(i));
    if (has_normals() && std::abs(normals[i].norm() - 1.0) > 1e-6)
      throw Error("normal is not unit length at point " + std::to_string(i));
  }
}

SpatialIndex::SpatialIndex(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error("empty input cloud");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 1);
  build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t SpatialIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  if (end - begin <= kLeafSize) {
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  Vec3 lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] - lo[axis] <= 0.0) {  // all coincident
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    return id;
  }
  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

// Visitor exposes `double bound() const` and `void offer(index, d2)`.
template <typename Visitor>
void SpatialIndex::search(std::uint32_t node_id, const Vec3& q, Visitor& visit) const {
  const Node& node = nodes_[node_id];
  if (node.axis < 0) {
    for (auto i = node.begin; i < node.end; ++i) {
      const auto idx = order_[i];
      visit.offer(idx, (points_[idx] - q).squaredNorm());
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const auto near = diff < 0.0 ? node.left : node.right;
  const auto far = diff < 0.0 ? node.right : node.left;
  search(near, q, visit);
  if (diff * diff <= visit.bound()) search(far, q, visit);
}

SpatialIndex::Neighbor SpatialIndex::nearest(const Vec3& q) const {
  struct Best {
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    double bound() const { return best.squared_distance; }
    void offer(std::size_t i, double d2) {
      if (d2 < best.squared_distance || (d2 == best.squared_distance && i < best.index))
        best = {i, d2};
    }
  } visit;
  search(0, q, visit);
  return visit.best;
}

std::vector<SpatialIndex::Neighbor> SpatialIndex::knn(const Vec3& q, std::size_t k) const {
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.squared_distance < b.squared_distance ||
           (a.squared_distance == b.squared_distance && a.index < b.index);
  };
  struct Heap {
    std::size_t k;
    decltype(closer) cmp;
    std::vector<Neighbor> heap;  // max-heap on (d2, index)
    double bound() const {
      return heap.size() < k ? std::numeric_limits<double>::infinity()
                             : heap.front().squared_distance;
    }
    void offer(std::size_t i, double d2) {
      Neighbor n{i, d2};
      if (heap.size() < k) {
        heap.push_back(n);
        std::push_heap(heap.begin(), heap.end(), cmp);
      } else if (cmp(n, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        heap.back() = n;
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    }
  } visit{k, closer, {}};
  if (k == 0) return {};
  visit.heap.reserve(k);
  search(0, q, visit);
  std::sort(visit.heap.begin(), visit.heap.end(), closer);
  return std::move(visit.heap);
}

SpatialIndex build_index(const PointCloud& cloud) {
  if (cloud.empty()) throw Error("empty input cloud");
  return SpatialIndex(cloud.positions);
}

double nearest_distance(const SpatialIndex& index, const Vec3& q) {
  return std::sqrt(index.nearest(q).squared_distance);
}

NormalEstimate estimate_normals(const PointCloud& cloud, const NormalParams& params) {
  if (params.k < 3) throw Error("normal estimation needs k >= 3");
  if (cloud.size() < params.k + 1)
    throw Error("normal estimation needs at least k + 1 points");

  Vec3 viewpoint;
  if (params.viewpoint) {
    viewpoint = *params.viewpoint;
  } else {
    Vec3 centroid = Vec3::Zero();
    for (const auto& p : cloud.positions) centroid += p;
    centroid /= static_cast<double>(cloud.size());
    viewpoint = centroid + Vec3(0.0, 0.0, 1000.0);
  }

  const SpatialIndex index = build_index(cloud);
  NormalEstimate out{cloud, {}};
  out.cloud.normals.assign(cloud.size(), Vec3::UnitZ());

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    // Self plus k neighbours.
    const auto neighbors = index.knn(cloud.positions[i], params.k + 1);
    Vec3 mean = Vec3::Zero();
    for (const auto& n : neighbors) mean += index.point(n.index);
    mean /= static_cast<double>(neighbors.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& n : neighbors) {
      const Vec3 d = index.point(n.index) - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(neighbors.size());

    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 ev = eig.eigenvalues();  // ascending
    // Coincident: spread is zero. Collinear: two vanishing eigenvalues.
    if (ev[2] <= 1e-24 || ev[1] <= 1e-10 * ev[2]) {
      out.degenerate.push_back(i);
      continue;
    }
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if (normal.dot(viewpoint - cloud.positions[i]) < 0.0) normal = -normal;
    out.cloud.normals[i] = normal;
  }
  return out;
}

}  // namespace lts
