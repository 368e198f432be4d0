#include "lts/preprocess.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numeric>

using namespace lts;

namespace {

// Flat ground patch, spacing `step`, optional slope (rad) about the y axis.
void add_ground(std::vector<Vec3>& pts, std::vector<bool>& ground, double half, double step, double slope = 0.0) {
  for (double x = -half; x <= half + 1e-9; x += step)
    for (double y = -half; y <= half + 1e-9; y += step) {
      pts.emplace_back(x, y, std::tan(slope) * x);
      ground.push_back(true);
    }
}

void add_box(std::vector<Vec3>& pts, std::vector<bool>& ground, Vec3 lo, Vec3 hi, double step) {
  for (double x = lo.x(); x <= hi.x() + 1e-9; x += step)
    for (double y = lo.y(); y <= hi.y() + 1e-9; y += step) {
      pts.emplace_back(x, y, hi.z());
      ground.push_back(false);
    }
  for (double z = lo.z() + step; z < hi.z(); z += step) {
    for (double x = lo.x(); x <= hi.x() + 1e-9; x += step) {
      pts.emplace_back(x, lo.y(), z);
      pts.emplace_back(x, hi.y(), z);
      ground.push_back(false);
      ground.push_back(false);
    }
    for (double y = lo.y() + step; y < hi.y(); y += step) {
      pts.emplace_back(lo.x(), y, z);
      pts.emplace_back(hi.x(), y, z);
      ground.push_back(false);
      ground.push_back(false);
    }
  }
}

std::vector<Vec3> grid_points(int n, double spacing) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) pts.emplace_back(i * spacing, j * spacing, 0.0);
  return pts;
}

}  // namespace

TEST_SUITE("preprocess") {

TEST_CASE("plane with a box") {
  std::vector<Vec3> pts;
  std::vector<bool> truth;
  add_ground(pts, truth, 10.0, 0.2);
  add_box(pts, truth, Vec3(-2, -1, 0), Vec3(2, 1, 1.5), 0.1);
  const auto split = remove_ground_csf(support::cloud_of(pts));
  std::vector<bool> is_ground(pts.size(), false);
  for (auto i : split.ground_indices) is_ground[i] = true;
  std::size_t correct = 0, plane_ok = 0, plane = 0, box_ok = 0, box = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    correct += is_ground[i] == truth[i];
    if (truth[i]) {
      ++plane;
      plane_ok += is_ground[i];
    } else if (pts[i].z() > 0.5) {  // box sides above the class threshold and top
      ++box;
      box_ok += !is_ground[i];
    }
  }
  CHECK(static_cast<double>(correct) / pts.size() >= 0.95);
  CHECK(plane_ok == plane);
  CHECK(box_ok == box);
}

TEST_CASE("pure ground plane") {
  std::vector<Vec3> pts;
  std::vector<bool> truth;
  add_ground(pts, truth, 5.0, 0.25);
  const auto split = remove_ground_csf(support::cloud_of(pts));
  CHECK(split.offground.empty());
  CHECK(split.ground.size() == pts.size());
}

TEST_CASE("sloped plane with poles") {
  const double slope = 10.0 * M_PI / 180.0;
  std::vector<Vec3> pts;
  std::vector<bool> truth;
  add_ground(pts, truth, 10.0, 0.2, slope);
  std::vector<double> height(pts.size(), 0.0);
  for (const Vec3& base : {Vec3(-6, -4, 0), Vec3(0, 0, 0), Vec3(5, 6, 0), Vec3(7, -7, 0)}) {
    const double z0 = std::tan(slope) * base.x();
    for (double z = 0.05; z <= 4.0; z += 0.05)
      for (int a = 0; a < 8; ++a) {
        const double t = a * M_PI / 4.0;
        pts.emplace_back(base.x() + 0.1 * std::cos(t), base.y() + 0.1 * std::sin(t), z0 + z);
        truth.push_back(false);
        height.push_back(z);
      }
  }
  const auto split = remove_ground_csf(support::cloud_of(pts));
  std::vector<bool> is_ground(pts.size(), false);
  for (auto i : split.ground_indices) is_ground[i] = true;
  std::size_t pole = 0, pole_off = 0;
  // Pole points below the class threshold sit within ground distance.
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (!truth[i] && height[i] > CsfParams{}.class_threshold + 0.1) {
      ++pole;
      pole_off += !is_ground[i];
    }
  CHECK(static_cast<double>(pole_off) / pole >= 0.90);
}

TEST_CASE("csf partition and determinism") {
  Rng rng(17);
  std::vector<Vec3> pts;
  for (int i = 0; i < 3000; ++i) pts.emplace_back(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.normal(0, 0.02));
  for (int i = 0; i < 600; ++i) pts.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3));
  PointCloud cloud = support::cloud_of(pts);
  cloud.ground_truth.assign(pts.size(), StabilityClass::kStable);
  const auto a = remove_ground_csf(cloud);
  const auto b = remove_ground_csf(cloud);
  CHECK(a.ground.size() + a.offground.size() == cloud.size());
  std::vector<std::size_t> all = a.ground_indices;
  all.insert(all.end(), a.offground_indices.begin(), a.offground_indices.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(cloud.size());
  std::iota(expect.begin(), expect.end(), std::size_t{0});
  CHECK(all == expect);
  CHECK(a.ground_indices == b.ground_indices);
  CHECK(a.offground.has_ground_truth());
  for (std::size_t j = 0; j < a.offground.size(); ++j) CHECK(a.offground.positions[j] == pts[a.offground_indices[j]]);
}

TEST_CASE("csf rejects tiny clouds and bad parameters") {
  CHECK_THROWS_WITH_AS(remove_ground_csf(support::cloud_of({Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY()})),
                       "too small for ground estimation", Error);
  const auto cloud = support::cloud_of(grid_points(5, 1.0));
  CsfParams p;
  p.cloth_resolution = 0.0;
  CHECK_THROWS_AS(remove_ground_csf(cloud, p), Error);
  p = {};
  p.iterations = 0;
  CHECK_THROWS_AS(remove_ground_csf(cloud, p), Error);
  p = {};
  p.class_threshold = -1.0;
  CHECK_THROWS_AS(remove_ground_csf(cloud, p), Error);
}

TEST_CASE("sor removes a distant point from a grid") {
  auto pts = grid_points(10, 1.0);
  pts.emplace_back(50.0, 50.0, 0.0);
  const auto r = remove_outliers_sor(support::cloud_of(pts), {.k = 4, .std_multiplier = 1.0});
  CHECK(r.cloud.size() == 100);
  CHECK(std::find(r.kept_indices.begin(), r.kept_indices.end(), 100u) == r.kept_indices.end());
}

TEST_CASE("sor keeps a perfectly uniform cloud") {
  // Equal neighbourhoods everywhere: points evenly spaced on a circle.
  std::vector<Vec3> pts;
  for (int i = 0; i < 120; ++i) {
    const double t = 2.0 * M_PI * i / 120.0;
    pts.emplace_back(10.0 * std::cos(t), 10.0 * std::sin(t), 0.0);
  }
  const auto r = remove_outliers_sor(support::cloud_of(pts), {.k = 4, .std_multiplier = 1.0});
  CHECK(r.cloud.size() == pts.size());
}

TEST_CASE("sor removes bridge points between clusters") {
  Rng rng(2);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(rng.normal(0, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3));
  for (int i = 0; i < 100; ++i) pts.emplace_back(rng.normal(10, 0.3), rng.normal(0, 0.3), rng.normal(0, 0.3));
  for (int i = 1; i <= 5; ++i) pts.emplace_back(10.0 * i / 6.0, 0.0, 0.0);
  const auto r = remove_outliers_sor(support::cloud_of(pts));
  std::size_t removed = 0;
  for (std::size_t i = 200; i < 205; ++i)
    removed += std::find(r.kept_indices.begin(), r.kept_indices.end(), i) == r.kept_indices.end();
  CHECK(removed >= 4);
}

TEST_CASE("sor matches the brute-force gate") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    auto pts = support::random_points(rng, 150, 3.0);
    for (int i = 0; i < 5; ++i) pts.emplace_back(rng.uniform(10, 20), rng.uniform(10, 20), 0.0);
    const SorParams params{.k = 6, .std_multiplier = 0.5 + 0.2 * static_cast<double>(seed)};
    const auto mu = oracle::mean_knn_distance(pts, params.k);
    const double mean = std::accumulate(mu.begin(), mu.end(), 0.0) / mu.size();
    double var = 0.0;
    for (double m : mu) var += (m - mean) * (m - mean);
    const double gate = mean + params.std_multiplier * std::sqrt(var / mu.size());
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < mu.size(); ++i)
      if (mu[i] <= gate) expect.push_back(i);
    CHECK(remove_outliers_sor(support::cloud_of(pts), params).kept_indices == expect);
  }
}

TEST_CASE("sor output is a subset and shrinks on reapplication") {
  Rng rng(6);
  auto pts = support::random_points(rng, 500, 5.0);
  const auto once = remove_outliers_sor(support::cloud_of(pts));
  const auto twice = remove_outliers_sor(once.cloud);
  CHECK(once.cloud.size() <= pts.size());
  CHECK(twice.cloud.size() <= once.cloud.size());
  for (std::size_t j = 0; j < once.cloud.size(); ++j) CHECK(once.cloud.positions[j] == pts[once.kept_indices[j]]);
  CHECK(remove_outliers_sor(support::cloud_of(pts)).kept_indices == once.kept_indices);
}

TEST_CASE("sor needs more than k points") {
  CHECK_THROWS_WITH_AS(remove_outliers_sor(support::cloud_of(grid_points(2, 1.0)), {.k = 4, .std_multiplier = 1.0}),
                       "insufficient points for SOR", Error);
  CHECK_THROWS_AS(remove_outliers_sor(support::cloud_of(grid_points(5, 1.0)), {.k = 4, .std_multiplier = 0.0}),
                  Error);
}

}  // TEST_SUITE
