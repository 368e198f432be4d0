#pragma once

#include "lts/cloud.hpp"
#include "lts/registration.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lts {

/// Multi-session parking-lot style scene. Static: poles, trees (trunk +
/// crown), walls. Dynamic: car-sized boxes that hop between two parking
/// slots or leave, and ghost streaks seen in a single session.
struct SceneSpec {
  Eigen::Vector2d extent{40.0, 30.0};  // m, centred on the origin
  std::size_t sessions = 5;
  std::size_t poles = 4;
  std::size_t trees = 2;
  std::size_t walls = 2;
  std::size_t cars = 6;
  std::size_t ghost_trails = 2;
  double sensor_noise_sigma = 0.01;  // m
  double point_density = 30.0;       // points / m^2
  double max_rotation_deg = 10.0;
  double max_translation = 2.0;  // m
  std::uint64_t seed = 0;
  /// Optional per-car placement: car_schedule[car][session] is the slot
  /// (0 or 1) or -1 when absent. Random when empty.
  std::vector<std::vector<int>> car_schedule;

  void validate() const;
};

enum class ObjectKind { kPole, kTree, kWall, kCar, kGhost };

struct SceneObject {
  ObjectKind kind;
  StabilityClass cls;
  std::size_t points;  // per appearance
  /// Per session: slot index for cars, 0 for present static objects and
  /// ghosts, -1 when absent.
  std::vector<int> placement;
};

struct SessionBundle {
  /// Raw session clouds in their own frames, with the ground-truth channel.
  std::vector<PointCloud> sessions;
  std::vector<std::vector<std::uint8_t>> ground_mask;
  /// Maps session-frame coordinates to world coordinates.
  std::vector<RigidTransform> session_to_world;
  std::vector<SceneObject> objects;

  /// True registration of session k onto session 0.
  RigidTransform to_reference(std::size_t k) const {
    return session_to_world.at(0).inverse() * session_to_world.at(k);
  }
};

SessionBundle generate_scene(const SceneSpec& spec);

}  // namespace lts
