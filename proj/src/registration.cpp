#include "lts/registration.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <optional>

namespace lts {

RigidTransform RigidTransform::inverse() const {
  RigidTransform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return {rotation * rhs.rotation, rotation * rhs.translation + translation};
}

void RigidTransform::validate(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) throw Error("non-finite transform");
  if (((rotation.transpose() * rotation) - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
    throw Error("rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > tol) throw Error("rotation determinant is not +1");
}

double rotation_angle_between(const RigidTransform& a, const RigidTransform& b) {
  const Mat3 rel = a.rotation.transpose() * b.rotation;
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

void IcpParams::validate() const {
  if (max_iterations < 1) throw Error("max_iterations must be >= 1");
  if (!(max_correspondence_dist > 0.0)) throw Error("max_correspondence_dist must be positive");
  if (!(convergence_eps >= 0.0)) throw Error("convergence_eps must be non-negative");
  initial_guess.validate(1e-6);
}

RigidTransform best_rigid_transform(std::span<const Correspondence> pairs) {
  if (pairs.size() < 3) throw Error("degenerate correspondence set");
  Vec3 src_mean = Vec3::Zero(), dst_mean = Vec3::Zero();
  for (const auto& [s, d] : pairs) {
    src_mean += s;
    dst_mean += d;
  }
  src_mean /= static_cast<double>(pairs.size());
  dst_mean /= static_cast<double>(pairs.size());

  Mat3 cross = Mat3::Zero();
  Mat3 src_spread = Mat3::Zero();
  for (const auto& [s, d] : pairs) {
    cross += (s - src_mean) * (d - dst_mean).transpose();
    src_spread += (s - src_mean) * (s - src_mean).transpose();
  }
  const Eigen::JacobiSVD<Mat3> spread(src_spread);
  const Vec3 sv = spread.singularValues();
  if (sv[0] <= 0.0 || sv[1] <= 1e-12 * sv[0]) throw Error("degenerate correspondence set");

  const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 fix = Mat3::Identity();
  fix(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  RigidTransform t;
  t.rotation = v * fix * u.transpose();
  t.translation = dst_mean - t.rotation * src_mean;
  return t;
}

namespace {

constexpr int kStallLimit = 5;

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return c / static_cast<double>(pts.size());
}

}  // namespace

IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpParams& params) {
  params.validate();
  if (source.size() < 3 || target.size() < 3) throw Error("registration degenerate");

  const SpatialIndex index = build_index(target);
  RigidTransform current = params.initial_guess;
  if (params.align_centroids) {
    std::vector<Vec3> moved;
    moved.reserve(source.size());
    for (const auto& p : source.positions) moved.push_back(current.apply(p));
    current.translation += centroid(target.positions) - centroid(moved);
  }

  IcpResult result;
  result.transform = current;
  double best = std::numeric_limits<double>::infinity();
  std::vector<Correspondence> pairs;
  pairs.reserve(source.size());

  std::vector<double> gates{params.max_correspondence_dist};
  if (params.refine_correspondence_dist > 0.0 && params.refine_correspondence_dist < params.max_correspondence_dist)
    gates.push_back(params.refine_correspondence_dist);

  for (const double gate : gates) {
    const double gate2 = gate * gate;
    current = result.transform;
    int stall = 0;
    for (int it = 0; it < params.max_iterations; ++it) {
      ++result.iterations;
      pairs.clear();
      double sum2 = 0.0;
      for (const auto& p : source.positions) {
        const Vec3 q = current.apply(p);
        const auto nn = index.nearest(q);
        if (nn.squared_distance > gate2) continue;
        pairs.emplace_back(q, index.point(nn.index));
        sum2 += nn.squared_distance;
      }
      if (pairs.size() < 3) throw Error("registration degenerate");
      const double residual = std::sqrt(sum2 / static_cast<double>(pairs.size()));

      if (residual < best) {
        const double gain = best - residual;
        best = residual;
        result.transform = current;
        result.residual_rmse = residual;
        result.accepted_residuals.push_back(residual);
        stall = 0;
        if (gain < params.convergence_eps) break;
      } else {
        if (best - residual > -params.convergence_eps && stall == 0) break;  // flat
        if (++stall >= kStallLimit) {
          result.stalled = true;
          break;
        }
      }

      RigidTransform step;
      try {
        step = best_rigid_transform(pairs);
      } catch (const Error&) {
        throw Error("registration degenerate");
      }
      current = step * current;
    }
  }
  return result;
}

double inlier_fraction(const PointCloud& source, const SpatialIndex& target, const RigidTransform& t, double gate) {
  if (source.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : source.positions)
    if (target.nearest(t.apply(p)).squared_distance <= gate * gate) ++hits;
  return static_cast<double>(hits) / static_cast<double>(source.size());
}

void MultistartParams::validate() const {
  if (yaw_offsets_deg.empty() || shift_offsets.empty()) throw Error("multistart needs at least one start");
  for (double v : yaw_offsets_deg)
    if (!std::isfinite(v)) throw Error("invalid yaw offset");
  for (double v : shift_offsets)
    if (!std::isfinite(v)) throw Error("invalid shift offset");
  if (!(accept_fraction >= 0.0 && accept_fraction <= 1.0)) throw Error("accept_fraction must be in [0, 1]");
}

IcpResult icp_align_multistart(const PointCloud& source, const PointCloud& target, const IcpParams& params,
                               const MultistartParams& starts) {
  params.validate();
  starts.validate();
  if (source.empty() || target.empty()) throw Error("registration degenerate");
  const SpatialIndex index = build_index(target);
  const double gate = params.refine_correspondence_dist > 0.0
                          ? std::min(params.refine_correspondence_dist, params.max_correspondence_dist)
                          : params.max_correspondence_dist;
  const Vec3 c = centroid(source.positions);

  RigidTransform base = params.initial_guess;
  if (params.align_centroids) base.translation += centroid(target.positions) - base.apply(c);

  std::optional<IcpResult> best;
  double best_score = -1.0;
  for (const double sx : starts.shift_offsets) {
    for (const double sy : starts.shift_offsets) {
      for (const double yaw : starts.yaw_offsets_deg) {
        RigidTransform spin;
        spin.rotation = Eigen::AngleAxisd(yaw * M_PI / 180.0, Vec3::UnitZ()).toRotationMatrix();
        spin.translation = c - spin.rotation * c;
        IcpParams start = params;
        start.align_centroids = false;
        start.initial_guess = base * spin;
        start.initial_guess.translation += Vec3(sx, sy, 0.0);
        IcpResult run = icp_align(source, target, start);
        const double score = inlier_fraction(source, index, run.transform, gate);
        if (!best || score > best_score || (score == best_score && run.residual_rmse < best->residual_rmse)) {
          best = std::move(run);
          best_score = score;
        }
        if (best_score >= starts.accept_fraction) return *best;
      }
    }
  }
  return *best;
}

PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out = cloud;
  if (t.rotation == Mat3::Identity() && t.translation == Vec3::Zero()) return out;
  for (auto& p : out.positions) p = t.apply(p);
  for (auto& n : out.normals) n = t.rotation * n;
  return out;
}

RegisteredMap RegisteredMap::register_cloud(const PointCloud& cloud, const RigidTransform& to_reference) {
  return {apply_transform(to_reference, cloud), to_reference};
}

RegisteredMap RegisteredMap::reference(PointCloud cloud) {
  return {std::move(cloud), RigidTransform::identity()};
}

RegisteredMap RegisteredMap::already_registered(PointCloud cloud, const RigidTransform& to_reference) {
  to_reference.validate(1e-6);
  return {std::move(cloud), to_reference};
}

}  // namespace lts
