#include "lts/synthetic.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>

namespace lts {

namespace {

constexpr double kEdgeMargin = 2.0;  // m kept free for walls
constexpr double kWallInset = 1.0;
constexpr double kWallHeight = 3.0;
const Vec3 kCarSize(4.4, 1.8, 1.5);
constexpr int kMaxPlacementAttempts = 20000;

// Random-stream ids; each consumer gets its own child of the scene seed.
enum Stream : std::uint64_t {
  kLayout = 1,
  kSchedule = 2,
  kObjects = 1000,
  kGround = 2000,
  kNoise = 3000,
  kFrames = 4000,
  kGhosts = 5000,
};

std::size_t count_for(double area, double density) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(area * density)));
}

void sample_cylinder(Rng& rng, const Vec3& base, double radius, double height, std::size_t n,
                     std::vector<Vec3>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0.0, 2.0 * M_PI);
    out.emplace_back(base.x() + radius * std::cos(a), base.y() + radius * std::sin(a),
                     base.z() + rng.uniform(0.0, height));
  }
}

void sample_sphere(Rng& rng, const Vec3& center, double radius, std::size_t n, std::vector<Vec3>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 d(rng.normal(), rng.normal(), rng.normal());
    while (d.norm() < 1e-12) d = Vec3(rng.normal(), rng.normal(), rng.normal());
    out.push_back(center + radius * d.normalized());
  }
}

// Vertical rectangle from `a` to `b` (xy), z in [0, height].
void sample_wall(Rng& rng, const Eigen::Vector2d& a, const Eigen::Vector2d& b, double height,
                 std::size_t n, std::vector<Vec3>& out) {
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d xy = a + rng.uniform() * (b - a);
    out.emplace_back(xy.x(), xy.y(), rng.uniform(0.0, height));
  }
}

// Top and four sides of an axis-aligned box resting on z = 0, centred on
// the local origin.
void sample_box(Rng& rng, const Vec3& size, std::size_t n, std::vector<Vec3>& out) {
  const double lx = size.x(), ly = size.y(), lz = size.z();
  const std::array<double, 5> area{lx * ly, lx * lz, lx * lz, ly * lz, ly * lz};
  const double total = area[0] + area[1] + area[2] + area[3] + area[4];
  for (std::size_t i = 0; i < n; ++i) {
    double pick = rng.uniform() * total;
    std::size_t face = 0;
    while (face < 4 && pick >= area[face]) pick -= area[face++];
    const double u = rng.uniform(-0.5, 0.5), v = rng.uniform(-0.5, 0.5), w = rng.uniform(0.0, 1.0);
    switch (face) {
      case 0: out.emplace_back(u * lx, v * ly, lz); break;
      case 1: out.emplace_back(u * lx, -ly / 2, w * lz); break;
      case 2: out.emplace_back(u * lx, ly / 2, w * lz); break;
      case 3: out.emplace_back(-lx / 2, v * ly, w * lz); break;
      default: out.emplace_back(lx / 2, v * ly, w * lz); break;
    }
  }
}

struct Footprint {
  Eigen::Vector2d center;
  double radius;
};

struct Slot {
  Eigen::Vector2d center;
  double yaw;

  bool covers(const Eigen::Vector2d& xy) const {
    const Eigen::Vector2d d = Eigen::Rotation2Dd(-yaw) * (xy - center);
    return std::abs(d.x()) <= kCarSize.x() / 2 && std::abs(d.y()) <= kCarSize.y() / 2;
  }
  Vec3 place(const Vec3& local) const {
    const Eigen::Vector2d xy = Eigen::Rotation2Dd(yaw) * local.head<2>() + center;
    return {xy.x(), xy.y(), local.z()};
  }
};

class Layout {
public:
  Layout(const SceneSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  Eigen::Vector2d place(double radius, const char* what) {
    const double hx = spec_.extent.x() / 2 - kEdgeMargin - radius;
    const double hy = spec_.extent.y() / 2 - kEdgeMargin - radius;
    if (hx <= 0.0 || hy <= 0.0)
      throw Error(std::string("impossible placement: ") + what + " does not fit in the extent");
    for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
      const Eigen::Vector2d c(rng_.uniform(-hx, hx), rng_.uniform(-hy, hy));
      bool clear = true;
      for (const auto& f : taken_)
        if ((f.center - c).norm() < f.radius + radius) clear = false;
      if (clear) {
        taken_.push_back({c, radius});
        return c;
      }
    }
    throw Error(std::string("impossible placement: no free space for ") + what);
  }

private:
  const SceneSpec& spec_;
  Rng& rng_;
  std::vector<Footprint> taken_;
};

RigidTransform random_frame(Rng& rng, double max_rotation_deg, double max_translation) {
  const double angle = rng.uniform(0.0, max_rotation_deg * M_PI / 180.0);
  const Vec3 axis = Vec3(rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), 1.0).normalized();
  Vec3 dir(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.2, 0.2));
  if (dir.norm() < 1e-9) dir = Vec3::UnitX();
  RigidTransform t;
  t.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  t.translation = dir.normalized() * rng.uniform(0.0, max_translation);
  return t;
}

std::vector<std::vector<int>> random_schedule(const SceneSpec& spec) {
  Rng rng(derive_seed(spec.seed, kSchedule));
  std::vector<std::vector<int>> schedule(spec.cars, std::vector<int>(spec.sessions));
  for (auto& car : schedule) {
    // Every car must differ in at least one session, otherwise it would look
    // static to the labeller.
    do {
      for (auto& s : car) {
        const double u = rng.uniform();
        s = u < 0.25 ? -1 : (u < 0.65 ? 0 : 1);
      }
    } while (std::all_of(car.begin(), car.end(), [&](int s) { return s == car.front(); }));
  }
  return schedule;
}

}  // namespace

void SceneSpec::validate() const {
  if (sessions < 2) throw Error("scene needs at least two sessions");
  if (!(extent.x() > 0.0 && extent.y() > 0.0)) throw Error("scene extent must be positive");
  if (!(point_density > 0.0)) throw Error("point_density must be positive");
  if (!(sensor_noise_sigma >= 0.0)) throw Error("sensor_noise_sigma must be >= 0");
  if (!(max_rotation_deg >= 0.0 && max_translation >= 0.0)) throw Error("frame perturbation bounds must be >= 0");
  if (!car_schedule.empty()) {
    if (car_schedule.size() != cars) throw Error("car_schedule needs one row per car");
    for (const auto& row : car_schedule) {
      if (row.size() != sessions) throw Error("car_schedule needs one entry per session");
      for (int s : row)
        if (s < -1 || s > 1) throw Error("car_schedule entries must be -1, 0 or 1");
    }
  }
}

SessionBundle generate_scene(const SceneSpec& spec) {
  spec.validate();
  const std::size_t sessions = spec.sessions;
  const double density = spec.point_density;
  Rng layout_rng(derive_seed(spec.seed, kLayout));
  Layout layout(spec, layout_rng);

  struct Built {
    SceneObject info;
    std::vector<Vec3> local;    // static/ghost: world coordinates; car: body frame
    std::vector<Slot> slots;    // cars only
  };
  std::vector<Built> built;
  std::uint64_t object_id = 0;
  const auto all_sessions = std::vector<int>(sessions, 0);

  // Walls hug the scene border, cycling top, left, bottom, right.
  for (std::size_t w = 0; w < spec.walls; ++w) {
    Rng rng(derive_seed(spec.seed, kObjects + object_id++));
    const double hx = spec.extent.x() / 2, hy = spec.extent.y() / 2;
    const bool along_x = w % 2 == 0;
    const double edge = along_x ? spec.extent.x() : spec.extent.y();
    const double length = std::min(rng.uniform(8.0, 14.0), edge - 2 * kEdgeMargin);
    if (length <= 0.0) throw Error("impossible placement: wall does not fit in the extent");
    const double start = rng.uniform(-edge / 2 + kEdgeMargin, edge / 2 - kEdgeMargin - length);
    Eigen::Vector2d a, b;
    switch (w % 4) {
      case 0: a = {start, hy - kWallInset}; b = {start + length, hy - kWallInset}; break;
      case 1: a = {-hx + kWallInset, start}; b = {-hx + kWallInset, start + length}; break;
      case 2: a = {start, -hy + kWallInset}; b = {start + length, -hy + kWallInset}; break;
      default: a = {hx - kWallInset, start}; b = {hx - kWallInset, start + length}; break;
    }
    Built obj{{ObjectKind::kWall, StabilityClass::kStable, count_for(length * kWallHeight, density), all_sessions}, {}, {}};
    sample_wall(rng, a, b, kWallHeight, obj.info.points, obj.local);
    built.push_back(std::move(obj));
  }

  for (std::size_t i = 0; i < spec.trees; ++i) {
    Rng rng(derive_seed(spec.seed, kObjects + object_id++));
    const double crown = rng.uniform(1.5, 2.2);
    const double trunk_h = rng.uniform(2.2, 3.0);
    const double trunk_r = 0.2;
    const Eigen::Vector2d c = layout.place(crown + 0.5, "tree");
    const std::size_t n_trunk = count_for(2 * M_PI * trunk_r * trunk_h, density);
    const std::size_t n_crown = count_for(4 * M_PI * crown * crown, density);
    Built obj{{ObjectKind::kTree, StabilityClass::kStable, n_trunk + n_crown, all_sessions}, {}, {}};
    sample_cylinder(rng, {c.x(), c.y(), 0.0}, trunk_r, trunk_h, n_trunk, obj.local);
    sample_sphere(rng, {c.x(), c.y(), trunk_h + 0.7 * crown}, crown, n_crown, obj.local);
    built.push_back(std::move(obj));
  }

  for (std::size_t i = 0; i < spec.poles; ++i) {
    Rng rng(derive_seed(spec.seed, kObjects + object_id++));
    const double radius = rng.uniform(0.08, 0.15);
    const double height = rng.uniform(4.0, 6.0);
    const Eigen::Vector2d c = layout.place(0.5, "pole");
    Built obj{{ObjectKind::kPole, StabilityClass::kStable, count_for(2 * M_PI * radius * height, density), all_sessions}, {}, {}};
    sample_cylinder(rng, {c.x(), c.y(), 0.0}, radius, height, obj.info.points, obj.local);
    built.push_back(std::move(obj));
  }

  const auto schedule = spec.car_schedule.empty() ? random_schedule(spec) : spec.car_schedule;
  const double car_radius = 0.5 * std::hypot(kCarSize.x(), kCarSize.y()) + 0.3;
  for (std::size_t i = 0; i < spec.cars; ++i) {
    Rng rng(derive_seed(spec.seed, kObjects + object_id++));
    const double area = kCarSize.x() * kCarSize.y() + 2 * kCarSize.z() * (kCarSize.x() + kCarSize.y());
    Built obj{{ObjectKind::kCar, StabilityClass::kDynamic, count_for(area, density), schedule[i]}, {}, {}};
    for (int s = 0; s < 2; ++s)
      obj.slots.push_back({layout.place(car_radius, "car"), layout_rng.uniform(0.0, M_PI)});
    sample_box(rng, kCarSize, obj.info.points, obj.local);
    built.push_back(std::move(obj));
  }

  for (std::size_t i = 0; i < spec.ghost_trails; ++i) {
    Rng rng(derive_seed(spec.seed, kGhosts + i));
    const double hx = spec.extent.x() / 2 - kEdgeMargin, hy = spec.extent.y() / 2 - kEdgeMargin;
    const Eigen::Vector2d a(rng.uniform(-hx, hx), rng.uniform(-hy, hy));
    const double heading = rng.uniform(0.0, 2 * M_PI);
    const double length = rng.uniform(5.0, 10.0);
    Eigen::Vector2d b = a + length * Eigen::Vector2d(std::cos(heading), std::sin(heading));
    b = b.cwiseMax(Eigen::Vector2d(-hx, -hy)).cwiseMin(Eigen::Vector2d(hx, hy));
    std::vector<int> placement(sessions, -1);
    placement[rng.index(sessions)] = 0;
    const double span = (b - a).norm();
    const std::size_t n = std::max<std::size_t>(2, static_cast<std::size_t>(span / 0.08));
    Built obj{{ObjectKind::kGhost, StabilityClass::kDynamic, n, placement}, {}, {}};
    const double z0 = rng.uniform(0.8, 1.6);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(n - 1);
      const Eigen::Vector2d xy = a + t * (b - a);
      obj.local.emplace_back(xy.x() + rng.normal(0.0, 0.05), xy.y() + rng.normal(0.0, 0.05),
                             z0 + 0.3 * std::sin(3.0 * t) + rng.normal(0.0, 0.05));
    }
    built.push_back(std::move(obj));
  }

  SessionBundle bundle;
  for (const auto& obj : built) bundle.objects.push_back(obj.info);

  for (std::size_t k = 0; k < sessions; ++k) {
    std::vector<Vec3> world;
    std::vector<StabilityClass> gt;
    std::vector<std::uint8_t> ground;

    std::vector<const Slot*> parked;
    for (const auto& obj : built)
      if (obj.info.kind == ObjectKind::kCar && obj.info.placement[k] >= 0)
        parked.push_back(&obj.slots[static_cast<std::size_t>(obj.info.placement[k])]);

    // Ground is resampled every session and hidden under parked cars.
    Rng ground_rng(derive_seed(spec.seed, kGround + k));
    const std::size_t n_ground = count_for(spec.extent.x() * spec.extent.y(), density);
    for (std::size_t i = 0; i < n_ground; ++i) {
      const Eigen::Vector2d xy(ground_rng.uniform(-spec.extent.x() / 2, spec.extent.x() / 2),
                               ground_rng.uniform(-spec.extent.y() / 2, spec.extent.y() / 2));
      if (std::any_of(parked.begin(), parked.end(), [&](const Slot* s) { return s->covers(xy); })) continue;
      world.emplace_back(xy.x(), xy.y(), 0.0);
      gt.push_back(StabilityClass::kStable);
      ground.push_back(1);
    }

    for (const auto& obj : built) {
      const int where = obj.info.placement[k];
      if (where < 0) continue;
      for (const auto& p : obj.local) {
        world.push_back(obj.info.kind == ObjectKind::kCar ? obj.slots[static_cast<std::size_t>(where)].place(p) : p);
        gt.push_back(obj.info.cls);
        ground.push_back(0);
      }
    }

    Rng noise_rng(derive_seed(spec.seed, kNoise + k));
    if (spec.sensor_noise_sigma > 0.0)
      for (auto& p : world)
        p += Vec3(noise_rng.normal(), noise_rng.normal(), noise_rng.normal()) * spec.sensor_noise_sigma;

    Rng frame_rng(derive_seed(spec.seed, kFrames + k));
    const RigidTransform to_world = random_frame(frame_rng, spec.max_rotation_deg, spec.max_translation);
    const RigidTransform to_session = to_world.inverse();

    PointCloud cloud;
    cloud.frame_id = "session_" + std::to_string(k);
    cloud.positions.reserve(world.size());
    for (const auto& p : world) cloud.positions.push_back(to_session.apply(p));
    cloud.ground_truth = std::move(gt);

    bundle.sessions.push_back(std::move(cloud));
    bundle.ground_mask.push_back(std::move(ground));
    bundle.session_to_world.push_back(to_world);
  }
  return bundle;
}

}  // namespace lts
