#include "lts/tiling.hpp"

#include "oracle.hpp"
#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace lts;

namespace {

LabelledCloud random_map(Rng& rng, std::size_t n, double sx, double sy, bool normals = true) {
  LabelledCloud m;
  for (std::size_t i = 0; i < n; ++i) {
    m.cloud.positions.emplace_back(rng.uniform(0, sx), rng.uniform(0, sy), rng.uniform(0, 3));
    if (normals) m.cloud.normals.push_back(Vec3(rng.normal(), rng.normal(), rng.normal()).normalized());
    m.labels.push_back(rng.uniform());
    m.d_max.push_back(label_to_distance(m.labels.back(), 0.5));
  }
  return m;
}

std::size_t tiles_containing(const TileGrid& g, const Vec3& p) {
  std::size_t n = 0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix) n += g.contains(ix, iy, p);
  return n;
}

}  // namespace

TEST_SUITE("tiling-aggregation") {

TEST_CASE("grid size for a 40 x 30 footprint") {
  const auto c = support::cloud_of({Vec3(-20, -15, 0), Vec3(20, 15, 2)});
  const auto g = tile_grid(c, {});
  CHECK(g.nx == 7);
  CHECK(g.ny == 5);
  CHECK(g.stride == 5.0);
  CHECK(g.origin(6, 4).x() + g.size == doctest::Approx(20.0));
  CHECK(g.origin(6, 4).y() + g.size == doctest::Approx(15.0));

  const auto small = tile_grid(support::cloud_of({Vec3(0, 0, 0), Vec3(3, 2, 0)}), {});
  CHECK(small.nx == 1);
  CHECK(small.ny == 1);
  const auto odd = tile_grid(support::cloud_of({Vec3(0, 0, 0), Vec3(41, 12, 0)}), {});
  CHECK(odd.nx == 8);
  CHECK(odd.ny == 2);
}

TEST_CASE("candidate tiles cover the bounding box") {
  Rng rng(1);
  for (double stride : {0.5, 0.3, 1.0}) {
    const auto m = random_map(rng, 3000, 37.3, 21.9);
    TilingParams p;
    p.stride_fraction = stride;
    const auto g = tile_grid(m.cloud, p);
    for (const auto& q : m.cloud.positions) CHECK(tiles_containing(g, q) >= 1);
    const auto members = tile_members(m.cloud, g);
    for (std::size_t t = 0; t < members.size(); ++t)
      for (auto i : members[t])
        CHECK(g.contains(static_cast<int>(t % g.nx), static_cast<int>(t / g.nx), m.cloud.positions[i]));
    std::size_t total = 0;
    for (const auto& q : m.cloud.positions) total += tiles_containing(g, q);
    std::size_t listed = 0;
    for (const auto& mem : members) listed += mem.size();
    CHECK(listed == total);
  }
}

TEST_CASE("no overlap at full stride") {
  Rng rng(2);
  const auto m = random_map(rng, 2000, 40, 30);
  TilingParams p;
  p.stride_fraction = 1.0;
  const auto g = tile_grid(m.cloud, p);
  for (const auto& q : m.cloud.positions) CHECK(tiles_containing(g, q) == 1);
}

TEST_CASE("interior points fall in four tiles at half stride") {
  Rng rng(3);
  const auto m = random_map(rng, 4000, 40, 30);
  const auto g = tile_grid(m.cloud, {});
  for (const auto& q : m.cloud.positions) {
    const Eigen::Vector2d off = q.head<2>() - g.min;
    const bool interior = off.x() >= g.stride && off.y() >= g.stride && off.x() < g.nx * g.stride &&
                          off.y() < g.ny * g.stride;
    if (interior) CHECK(tiles_containing(g, q) == 4);
  }
}

TEST_CASE("submaps have fixed size and valid back references") {
  Rng rng(4);
  for (std::size_t n : {50000u, 3000u}) {
    const auto m = random_map(rng, n, 40, 30);
    TilingParams p;
    p.seed = 99;
    const auto g = tile_grid(m.cloud, p);
    const auto members = tile_members(m.cloud, g);
    const auto subs = tile_submaps(m, p);
    CHECK(subs.size() == members.size());
    for (const auto& s : subs) {
      CHECK(s.size() == 4096);
      CHECK(s.source_indices.size() == 4096);
      CHECK(s.labels.size() == 4096);
      CHECK(s.normals.size() == 4096);
      const int ix = static_cast<int>(std::lround((s.tile_origin.x() - g.min.x()) / g.stride));
      const int iy = static_cast<int>(std::lround((s.tile_origin.y() - g.min.y()) / g.stride));
      const auto& mem = members[static_cast<std::size_t>(iy) * g.nx + ix];
      const std::set<std::size_t> distinct(s.source_indices.begin(), s.source_indices.end());
      if (mem.size() >= 4096) CHECK(distinct.size() == 4096);
      else CHECK(distinct.size() == mem.size());
      Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
      for (auto i : mem) centroid += m.cloud.positions[i].head<2>();
      centroid /= static_cast<double>(mem.size());
      CHECK((s.center - centroid).norm() < 1e-9);
      for (std::size_t j = 0; j < s.size(); ++j) {
        const auto i = s.source_indices[j];
        REQUIRE(i < m.size());
        const Vec3& src = m.cloud.positions[i];
        CHECK(g.contains(ix, iy, src));
        CHECK(s.positions[j].z() == src.z());
        CHECK((s.positions[j].head<2>() + s.center - src.head<2>()).norm() < 1e-9);
        CHECK(s.labels[j] == m.labels[i]);
        CHECK(s.normals[j] == m.cloud.normals[i]);
      }
    }
  }
}

TEST_CASE("sparse tiles are skipped") {
  Rng rng(5);
  auto m = random_map(rng, 2000, 10, 10, false);
  for (int i = 0; i < 10; ++i) {
    m.cloud.positions.emplace_back(28.0 + 0.1 * i, 28.0, 0.0);
    m.labels.push_back(0.5);
    m.d_max.push_back(1.0);
  }
  TilingParams p;
  p.points_per_submap = 512;
  const auto subs = tile_submaps(m, p);
  for (const auto& s : subs) {
    CHECK(s.normals.empty());
    for (auto i : s.source_indices) CHECK(i < 2000);
  }
  p.min_points = 5;
  bool found = false;
  for (const auto& s : tile_submaps(m, p))
    for (auto i : s.source_indices) found |= i >= 2000;
  CHECK(found);
}

TEST_CASE("tiling is reproducible per seed") {
  Rng rng(6);
  const auto m = random_map(rng, 20000, 30, 20);
  TilingParams p;
  p.seed = 7;
  const auto a = tile_submaps(m, p);
  const auto b = tile_submaps(m, p);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].source_indices == b[t].source_indices);
    CHECK(a[t].positions == b[t].positions);
  }
  p.seed = 8;
  const auto c = tile_submaps(m, p);
  CHECK(a[0].source_indices != c[0].source_indices);
}

TEST_CASE("tiling preconditions") {
  CHECK_THROWS_AS(tile_submaps(LabelledCloud{}, {}), Error);
  Rng rng(7);
  const auto m = random_map(rng, 100, 5, 5);
  TilingParams p;
  p.stride_fraction = 0.0;
  CHECK_THROWS_AS(tile_submaps(m, p), Error);
  p = {};
  p.submap_size_xy = -1;
  CHECK_THROWS_AS(tile_submaps(m, p), Error);
  p = {};
  p.points_per_submap = 0;
  CHECK_THROWS_AS(tile_submaps(m, p), Error);
}

TEST_CASE("simple votes") {
  VoteAccumulator acc(3);
  const std::size_t one[] = {1};
  const double p07[] = {0.7};
  acc.add(one, p07);
  auto r = resolve_votes(acc, 3);
  CHECK(r.scores[1] == doctest::Approx(0.7));
  CHECK(r.covered[1] == 1);
  CHECK(std::isnan(r.scores[0]));
  CHECK(r.covered[0] == 0);
  CHECK(r.covered_fraction() == doctest::Approx(1.0 / 3.0));

  VoteAccumulator two(1);
  const std::size_t zero[] = {0};
  for (double v : {0.2, 0.8}) {
    const double pv[] = {v};
    two.add(zero, pv);
  }
  CHECK(resolve_votes(two, 1).scores[0] == doctest::Approx(0.5));
  for (double v : {0.5}) {
    const double pv[] = {v};
    two.add(zero, pv);
  }
  CHECK(resolve_votes(two, 1).scores[0] == doctest::Approx(0.5));
}

TEST_CASE("duplicate samples within a submap count once") {
  VoteAccumulator acc(2);
  const std::size_t idx[] = {0, 0, 0, 1};
  const double pred[] = {0.1, 0.2, 0.3, 0.9};
  acc.add(idx, pred);
  CHECK(acc.count(0) == 1);
  CHECK(acc.sum(0) == doctest::Approx(0.2));
  const std::size_t idx2[] = {0};
  const double pred2[] = {0.6};
  acc.add(idx2, pred2);
  CHECK(resolve_votes(acc, 2).scores[0] == doctest::Approx(0.4));
}

TEST_CASE("votes equal brute-force means") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t map_size = 200;
    std::vector<std::vector<std::size_t>> indices;
    std::vector<std::vector<double>> preds;
    VoteAccumulator acc(map_size);
    for (int s = 0; s < 15; ++s) {
      std::vector<std::size_t> idx;
      std::vector<double> p;
      const std::size_t lo = rng.index(150);
      for (int j = 0; j < 64; ++j) {
        idx.push_back(lo + rng.index(50));
        p.push_back(rng.uniform());
      }
      acc.add(idx, p);
      indices.push_back(std::move(idx));
      preds.push_back(std::move(p));
    }
    const auto got = resolve_votes(acc, map_size);
    const auto want = oracle::vote_means(map_size, indices, preds);
    for (std::size_t i = 0; i < map_size; ++i) {
      CHECK(std::isnan(got.scores[i]) == std::isnan(want[i]));
      if (!std::isnan(want[i])) CHECK(std::abs(got.scores[i] - want[i]) <= 1e-12);
    }
  }
}

TEST_CASE("vote accumulators merge in any order") {
  Rng rng(9);
  std::vector<VoteAccumulator> parts(3, VoteAccumulator(50));
  for (auto& part : parts)
    for (int s = 0; s < 5; ++s) {
      std::vector<std::size_t> idx;
      std::vector<double> p;
      for (int j = 0; j < 20; ++j) {
        idx.push_back(rng.index(50));
        p.push_back(rng.uniform());
      }
      part.add(idx, p);
    }
  VoteAccumulator ab = parts[0];
  ab.merge(parts[1]);
  ab.merge(parts[2]);
  VoteAccumulator ba = parts[2];
  ba.merge(parts[0]);
  ba.merge(parts[1]);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(ab.count(i) == ba.count(i));
    CHECK(std::abs(ab.sum(i) - ba.sum(i)) <= 1e-12);
  }
  CHECK_THROWS_AS(ab.merge(VoteAccumulator(3)), Error);
}

TEST_CASE("vote errors") {
  VoteAccumulator acc(4);
  const std::size_t idx[] = {0, 1};
  const double one[] = {0.5};
  CHECK_THROWS_AS(acc.add(idx, one), Error);
  const std::size_t bad[] = {9};
  CHECK_THROWS_AS(acc.add(bad, one), Error);
  CHECK_THROWS_AS(resolve_votes(acc, 5), Error);
  Submap s;
  s.source_indices = {0, 1};
  CHECK_THROWS_AS(accumulate_votes(acc, s, one), Error);
  const double two[] = {0.25, 0.75};
  const auto r = resolve_votes(accumulate_votes(acc, s, two), 4);
  CHECK(r.scores[0] == 0.25);
  CHECK(r.scores[1] == 0.75);
}

TEST_CASE("tiling then voting covers every point") {
  Rng rng(10);
  const auto m = random_map(rng, 8000, 40, 30);
  const auto subs = tile_submaps(m, {});
  VoteAccumulator acc(m.size());
  for (const auto& s : subs) acc.add(s, s.labels);
  const auto r = resolve_votes(acc, m.size());
  CHECK(r.covered_fraction() >= 0.99);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (r.covered[i]) CHECK(std::abs(r.scores[i] - m.labels[i]) <= 1e-12);
}

}  // TEST_SUITE
