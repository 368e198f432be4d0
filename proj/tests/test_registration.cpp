#include "lts/registration.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <Eigen/Geometry>
#include <doctest.h>

using namespace lts;

namespace {

RigidTransform make_transform(double angle_deg, const Vec3& axis, const Vec3& t) {
  RigidTransform out;
  out.rotation = Eigen::AngleAxisd(angle_deg * M_PI / 180.0, axis.normalized()).toRotationMatrix();
  out.translation = t;
  return out;
}

RigidTransform random_transform(Rng& rng, double max_deg = 180.0, double max_t = 5.0) {
  const Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  return make_transform(rng.uniform(-max_deg, max_deg), axis,
                        Vec3(rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t), rng.uniform(-max_t, max_t)));
}

// Asymmetric structure: an L of walls, a low block and a few poles.
std::vector<Vec3> structure(Rng& rng, std::size_t n) {
  std::vector<Vec3> pts;
  while (pts.size() < n) {
    switch (rng.index(4)) {
      case 0: pts.emplace_back(rng.uniform(-8, 6), 5.0, rng.uniform(0, 3)); break;
      case 1: pts.emplace_back(-8.0, rng.uniform(-4, 5), rng.uniform(0, 2)); break;
      case 2: pts.emplace_back(rng.uniform(1, 3), rng.uniform(-3, -2), rng.uniform(0, 1.2)); break;
      default: {
        const Vec3 bases[] = {Vec3(4, 0, 0), Vec3(-3, -1, 0), Vec3(0, 3, 0)};
        const Vec3& b = bases[rng.index(3)];
        const double t = rng.uniform(0, 2 * M_PI);
        pts.emplace_back(b.x() + 0.15 * std::cos(t), b.y() + 0.15 * std::sin(t), rng.uniform(0, 4));
      }
    }
  }
  return pts;
}

double angle_deg(const RigidTransform& a, const RigidTransform& b) {
  return rotation_angle_between(a, b) * 180.0 / M_PI;
}

void check_monotone(const IcpResult& r) {
  for (std::size_t i = 1; i < r.accepted_residuals.size(); ++i)
    CHECK(r.accepted_residuals[i] <= r.accepted_residuals[i - 1]);
}

}  // namespace

TEST_SUITE("registration") {

TEST_CASE("transform algebra") {
  Rng rng(1);
  const auto a = random_transform(rng), b = random_transform(rng);
  const Vec3 p(0.3, -2, 7);
  CHECK(((a * b).apply(p) - a.apply(b.apply(p))).norm() < 1e-12);
  CHECK((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
  CHECK_NOTHROW(a.validate());
  RigidTransform bad;
  bad.rotation = -Mat3::Identity();
  CHECK_THROWS_AS(bad.validate(), Error);
  bad.rotation = 2.0 * Mat3::Identity();
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK(angle_deg(make_transform(30, Vec3::UnitZ(), Vec3::Zero()), RigidTransform{}) == doctest::Approx(30.0));
}

TEST_CASE("rigid fit of identical pairs is the identity") {
  Rng rng(2);
  std::vector<Correspondence> pairs;
  for (const auto& p : support::random_points(rng, 10)) pairs.emplace_back(p, p);
  const auto t = best_rigid_transform(pairs);
  CHECK((t.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(t.translation.norm() < 1e-12);
}

TEST_CASE("rigid fit recovers a known motion exactly") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto truth = random_transform(rng);
    std::vector<Correspondence> pairs;
    for (const auto& p : support::random_points(rng, 4)) pairs.emplace_back(p, truth.apply(p));
    const auto t = best_rigid_transform(pairs);
    CHECK((t.rotation - truth.rotation).norm() < 1e-10);
    CHECK((t.translation - truth.translation).norm() < 1e-10);
    CHECK(t.rotation.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("rigid fit agrees with the quaternion solution and is optimal") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto truth = random_transform(rng);
    std::vector<Correspondence> pairs;
    for (const auto& p : support::random_points(rng, 30))
      pairs.emplace_back(p, truth.apply(p) + Vec3(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3)));
    const auto t = best_rigid_transform(pairs);
    const auto h = oracle::horn(pairs);
    CHECK((t.rotation - h.rotation).norm() < 1e-9);
    CHECK((t.translation - h.translation).norm() < 1e-9);
    const double e = oracle::squared_error(t, pairs);
    for (int k = 0; k < 100; ++k) {
      auto other = random_transform(rng, 5.0, 0.5) * t;
      CHECK(e <= oracle::squared_error(other, pairs) + 1e-9);
    }
  }
}

TEST_CASE("mirror pairing yields a proper rotation") {
  // Planar points and their reflections through the y-z plane.
  std::vector<Correspondence> pairs;
  for (const Vec3& p : {Vec3(1, 0, 0), Vec3(2, 1, 0), Vec3(0.5, 2, 0), Vec3(3, -1, 0), Vec3(-1, 0.5, 0)})
    pairs.emplace_back(p, Vec3(-p.x(), p.y(), p.z()));
  const auto t = best_rigid_transform(pairs);
  CHECK(t.rotation.determinant() == doctest::Approx(1.0));
  CHECK_NOTHROW(t.validate());
  const auto h = oracle::horn(pairs);
  CHECK(oracle::squared_error(t, pairs) <= oracle::squared_error(h, pairs) + 1e-9);
}

TEST_CASE("rigid fit rejects degenerate sets") {
  std::vector<Correspondence> collinear;
  for (int i = 0; i < 5; ++i) collinear.emplace_back(Vec3(i, 0, 0), Vec3(i, 1, 0));
  CHECK_THROWS_WITH_AS(best_rigid_transform(collinear), "degenerate correspondence set", Error);
  std::vector<Correspondence> two{{Vec3::Zero(), Vec3::Zero()}, {Vec3::UnitX(), Vec3::UnitX()}};
  CHECK_THROWS_WITH_AS(best_rigid_transform(two), "degenerate correspondence set", Error);
}

TEST_CASE("icp self alignment") {
  Rng rng(5);
  const auto cloud = support::cloud_of(structure(rng, 2000));
  const auto r = icp_align(cloud, cloud);
  CHECK((r.transform.rotation - Mat3::Identity()).norm() < 1e-12);
  CHECK(r.transform.translation.norm() < 1e-12);
  CHECK(r.residual_rmse == 0.0);
}

TEST_CASE("icp recovers a small known motion") {
  Rng rng(6);
  const auto source = support::cloud_of(structure(rng, 3000));
  const auto truth = make_transform(5.0, Vec3::UnitZ(), Vec3(0.3, -0.2, 0.0));
  const auto target = apply_transform(truth, source);
  const auto r = icp_align(source, target);
  CHECK(rotation_angle_between(r.transform, truth) <= 1e-3);
  CHECK((r.transform.translation - truth.translation).norm() <= 1e-3);
  check_monotone(r);
}

TEST_CASE("icp with partial overlap and noise") {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    Rng rng(seed);
    const auto source = support::cloud_of(structure(rng, 3000));
    const auto truth = make_transform(rng.uniform(-5, 5), Vec3::UnitZ(), Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0));
    PointCloud target = apply_transform(truth, source);
    for (auto& p : target.positions) p += Vec3(rng.normal(0, 0.01), rng.normal(0, 0.01), rng.normal(0, 0.01));
    for (int i = 0; i < 900; ++i)  // 30% extra structure absent from the source
      target.positions.emplace_back(rng.uniform(8, 14), rng.uniform(-6, 6), rng.uniform(0, 2));
    IcpParams params;
    params.refine_correspondence_dist = 0.3;
    const auto r = icp_align(source, target, params);
    CHECK(angle_deg(r.transform, truth) <= 0.5);
    CHECK((r.transform.translation - truth.translation).norm() <= 0.02);
    check_monotone(r);
    CHECK(!r.accepted_residuals.empty());
  }
}

TEST_CASE("icp fails without correspondences") {
  Rng rng(7);
  const auto source = support::cloud_of(support::random_points(rng, 100, 1.0));
  auto far = source;
  for (auto& p : far.positions) p.x() += 100.0;
  CHECK_THROWS_WITH_AS(icp_align(source, far), "registration degenerate", Error);
  IcpParams bad;
  bad.max_iterations = 0;
  CHECK_THROWS_AS(icp_align(source, source, bad), Error);
  bad = {};
  bad.max_correspondence_dist = 0.0;
  CHECK_THROWS_AS(icp_align(source, source, bad), Error);
}

TEST_CASE("icp honours the initial guess") {
  Rng rng(8);
  const auto source = support::cloud_of(structure(rng, 2000));
  const auto truth = make_transform(40.0, Vec3::UnitZ(), Vec3(6, -3, 0));
  const auto target = apply_transform(truth, source);
  IcpParams params;
  params.initial_guess = make_transform(38.0, Vec3::UnitZ(), Vec3(5.8, -3.1, 0));
  const auto r = icp_align(source, target, params);
  CHECK(angle_deg(r.transform, truth) <= 1e-3);
  CHECK((r.transform.translation - truth.translation).norm() <= 1e-3);
}

TEST_CASE("multistart widens the basin") {
  Rng rng(9);
  const auto source = support::cloud_of(structure(rng, 3000));
  const auto truth = make_transform(17.0, Vec3::UnitZ(), Vec3(2.5, 1.5, 0.3));
  const auto target = apply_transform(truth, source);
  IcpParams params;
  params.align_centroids = true;
  params.refine_correspondence_dist = 0.3;
  const auto r = icp_align_multistart(source, target, params);
  CHECK(angle_deg(r.transform, truth) <= 0.01);
  CHECK((r.transform.translation - truth.translation).norm() <= 0.01);
  check_monotone(r);

  MultistartParams bad;
  bad.yaw_offsets_deg.clear();
  CHECK_THROWS_AS(icp_align_multistart(source, target, params, bad), Error);
  bad = {};
  bad.accept_fraction = 2.0;
  CHECK_THROWS_AS(icp_align_multistart(source, target, params, bad), Error);
}

TEST_CASE("inlier fraction matches brute force") {
  Rng rng(10);
  const auto source = support::cloud_of(support::random_points(rng, 300, 3.0));
  const auto target_pts = support::random_points(rng, 300, 3.0);
  const auto index = build_index(support::cloud_of(target_pts));
  const auto t = make_transform(10, Vec3(1, 2, 3), Vec3(0.1, 0.2, 0.3));
  std::size_t in = 0;
  for (const auto& p : source.positions) in += oracle::nearest_distance(target_pts, t.apply(p)) <= 0.5;
  CHECK(inlier_fraction(source, index, t, 0.5) == doctest::Approx(static_cast<double>(in) / 300.0));
}

TEST_CASE("apply transform") {
  Rng rng(11);
  PointCloud c = support::cloud_of(support::random_points(rng, 50));
  for (std::size_t i = 0; i < c.size(); ++i) c.normals.push_back(Vec3(rng.normal(), rng.normal(), 1).normalized());

  const auto same = apply_transform(RigidTransform::identity(), c);
  CHECK(same.positions == c.positions);
  CHECK(same.normals == c.normals);

  RigidTransform shift;
  shift.translation = Vec3(1, 2, 3);
  const auto moved = apply_transform(shift, support::cloud_of({Vec3::Zero()}));
  CHECK(moved.positions[0] == Vec3(1, 2, 3));
  const auto moved_c = apply_transform(shift, c);
  CHECK(moved_c.normals == c.normals);

  const auto t = random_transform(rng);
  const auto there = apply_transform(t, c);
  const auto back = apply_transform(t.inverse(), there);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK((back.positions[i] - c.positions[i]).norm() <= 1e-9);
    CHECK((back.normals[i] - c.normals[i]).norm() <= 1e-9);
    CHECK((there.normals[i] - t.rotation * c.normals[i]).norm() <= 1e-15);
    for (std::size_t j = 0; j < i; ++j)
      CHECK(std::abs((there.positions[i] - there.positions[j]).norm() - (c.positions[i] - c.positions[j]).norm()) <=
            1e-9);
  }
}

TEST_CASE("registered maps") {
  Rng rng(12);
  const auto c = support::cloud_of(support::random_points(rng, 20));
  const auto ref = RegisteredMap::reference(c);
  CHECK(ref.cloud().positions == c.positions);
  CHECK(ref.to_reference().rotation == Mat3::Identity());
  const auto t = random_transform(rng);
  const auto m = RegisteredMap::register_cloud(c, t);
  CHECK((m.cloud().positions[3] - t.apply(c.positions[3])).norm() < 1e-12);
  RigidTransform bad;
  bad.rotation(0, 0) = 3.0;
  CHECK_THROWS_AS(RegisteredMap::already_registered(c, bad), Error);
}

}  // TEST_SUITE
