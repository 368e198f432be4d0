#pragma once

#include "lts/cloud.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace support {

inline std::vector<lts::Vec3> random_points(lts::Rng& rng, std::size_t n, double extent = 10.0) {
  std::vector<lts::Vec3> pts;
  for (std::size_t i = 0; i < n; ++i)
    pts.emplace_back(rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-extent, extent));
  return pts;
}

inline lts::PointCloud cloud_of(std::vector<lts::Vec3> pts) {
  lts::PointCloud c;
  c.positions = std::move(pts);
  return c;
}

/// Fresh empty folder under the system temp directory.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lts_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace support
