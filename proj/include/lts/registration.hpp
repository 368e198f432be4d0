#pragma once

#include "lts/cloud.hpp"

#include <span>
#include <utility>
#include <vector>

namespace lts {

/// Proper rigid motion p -> R p + t.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  RigidTransform inverse() const;
  /// (*this) after `rhs`: x -> this(rhs(x)).
  RigidTransform operator*(const RigidTransform& rhs) const;

  /// Throws unless R is orthonormal with det +1 within `tol`.
  void validate(double tol = 1e-9) const;
};

/// Rotation angle of the relative motion between two transforms, radians.
double rotation_angle_between(const RigidTransform& a, const RigidTransform& b);

struct IcpParams {
  int max_iterations = 50;
  double max_correspondence_dist = 2.0;  // m
  double convergence_eps = 1e-5;         // m
  RigidTransform initial_guess;
  /// Shift the initial guess so the cloud centroids coincide before matching.
  bool align_centroids = false;
  /// When > 0, a second pass restarts from the converged result with this
  /// tighter gate, shedding moved objects that still fell inside the first.
  double refine_correspondence_dist = 0.0;  // m

  void validate() const;
};

struct IcpResult {
  RigidTransform transform;
  double residual_rmse = 0.0;  // m, inlier correspondences of the best iterate
  int iterations = 0;
  /// Set when the residual stopped improving and the best iterate was kept.
  bool stalled = false;
  /// Residual of each accepted (improving) iterate, in order.
  std::vector<double> accepted_residuals;
};

using Correspondence = std::pair<Vec3, Vec3>;  // (source, target)

/// Closed-form least-squares rigid fit (SVD of the cross-covariance) with
/// reflection correction.
RigidTransform best_rigid_transform(std::span<const Correspondence> pairs);

/// Point-to-point ICP of `source` onto `target`.
IcpResult icp_align(const PointCloud& source, const PointCloud& target, const IcpParams& params = {});

/// Fraction of `source` points within `gate` of `target` after applying `t`.
double inlier_fraction(const PointCloud& source, const SpatialIndex& target, const RigidTransform& t, double gate);

/// Starting poses tried by `icp_align_multistart`, relative to the initial guess.
struct MultistartParams {
  std::vector<double> yaw_offsets_deg{0.0, -8.0, 8.0, -16.0, 16.0};  // about the source centroid
  std::vector<double> shift_offsets{0.0, -2.0, 2.0};                  // m, every (x, y) pair
  /// Stop at the first start whose inlier fraction reaches this.
  double accept_fraction = 0.5;

  void validate() const;
};

/// ICP restarted from a grid of yaw and planar shift offsets; keeps the run
/// with the largest inlier fraction at the final gate, then the lowest
/// residual.
IcpResult icp_align_multistart(const PointCloud& source, const PointCloud& target, const IcpParams& params,
                               const MultistartParams& starts = {});

/// Positions are moved rigidly; normals are rotated only.
PointCloud apply_transform(const RigidTransform& t, const PointCloud& cloud);

/**
 * A cloud expressed in the reference session frame. Only obtainable by
 * stating the transform that produced it, so unregistered clouds cannot be
 * labelled by accident.
 */
class RegisteredMap {
public:
  /// Applies `to_reference` to a session cloud.
  static RegisteredMap register_cloud(const PointCloud& cloud, const RigidTransform& to_reference);
  /// The reference session itself (identity transform, cloud kept as is).
  static RegisteredMap reference(PointCloud cloud);
  /// A cloud already moved by `to_reference`, e.g. re-read from disk.
  static RegisteredMap already_registered(PointCloud cloud, const RigidTransform& to_reference);

  const PointCloud& cloud() const { return cloud_; }
  const RigidTransform& to_reference() const { return transform_; }

private:
  RegisteredMap(PointCloud cloud, const RigidTransform& t) : cloud_(std::move(cloud)), transform_(t) {}

  PointCloud cloud_;
  RigidTransform transform_;
};

}  // namespace lts
