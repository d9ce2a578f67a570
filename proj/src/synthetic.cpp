#include "selfvio/synthetic.hpp"

#include "selfvio/png_io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

namespace selfvio {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kDiffStep = 1e-3;  // seconds, for numerical differentiation of the analytic trajectory

Eigen::Matrix3d rotation_of(const SE3Matrix<double>& m) { return m.topLeftCorner<3, 3>(); }
Eigen::Vector3d position_of(const SE3Matrix<double>& m) { return m.topRightCorner<3, 1>(); }

std::string frame_file(int frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d%s", frame, ext);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.precision(12);
  return out;
}

TextureWave random_wave(std::mt19937_64& rng, double amplitude, double fmin, double fmax) {
  std::uniform_real_distribution<double> freq(fmin, fmax), sign(-1.0, 1.0), phase(0.0, kTwoPi);
  TextureWave w;
  w.amplitude = amplitude;
  w.freq_u = freq(rng) * (sign(rng) < 0 ? -1 : 1);
  w.freq_v = freq(rng) * sign(rng);
  for (auto& p : w.phase) p = phase(rng);
  return w;
}

TexturedLayer textured(std::mt19937_64& rng, const Eigen::Vector3d& origin, const Eigen::Vector3d& u,
                       const Eigen::Vector3d& v, double half_u, double half_v, double fmin, double fmax) {
  TexturedLayer l;
  l.origin = origin;
  l.axis_u = u.normalized();
  l.axis_v = v.normalized();
  l.half_u = half_u;
  l.half_v = half_v;
  std::uniform_real_distribution<double> base(-0.3, 0.3);
  for (auto& c : l.base_color) c = base(rng);
  for (int k = 0; k < 4; ++k) l.waves.push_back(random_wave(rng, 0.15, fmin, fmax));
  return l;
}

}  // namespace

std::array<double, 3> TexturedLayer::color(double a, double b) const {
  std::array<double, 3> c = base_color;
  for (const auto& w : waves) {
    const double arg = kTwoPi * (w.freq_u * a + w.freq_v * b);
    for (std::size_t ch = 0; ch < 3; ++ch) c[ch] += w.amplitude * std::sin(arg + w.phase[ch]);
  }
  for (auto& v : c) v = std::clamp(v, -1.0, 1.0);
  return c;
}

SE3Matrix<double> MotionSpec::pose_at(double t) const {
  switch (kind) {
    case MotionKind::Static:
      return make_se3<double>(Eigen::Matrix3d::Identity(), start);
    case MotionKind::Line:
      return make_se3<double>(Eigen::Matrix3d::Identity(), start + velocity * t);
    case MotionKind::Circle: {
      // Tangential heading on a circle about the world y axis through start + (radius, 0, 0).
      const double psi = angular_speed * t;
      const Eigen::Vector3d center = start + Eigen::Vector3d(radius, 0, 0);
      const Eigen::Vector3d p = center + radius * Eigen::Vector3d(-std::cos(psi), 0, std::sin(psi));
      return make_se3<double>(rotation_y(psi), p);
    }
    case MotionKind::Wiggle: {
      Eigen::Vector3d p = start + velocity * t;
      for (int i = 0; i < 3; ++i) p[i] += sway_amplitude[i] * std::sin(kTwoPi * sway_frequency[i] * t);
      const double yaw = yaw_amplitude * std::sin(kTwoPi * yaw_frequency * t);
      return make_se3<double>(rotation_y(yaw), p);
    }
  }
  throw std::logic_error("unknown motion kind");
}

void SyntheticScene::validate() const {
  if (frames < 3) throw std::invalid_argument("synthetic scene: trajectory needs at least 3 frames");
  if (!(frame_rate > 0) || !(imu_rate > 0)) throw std::invalid_argument("synthetic scene: rates must be positive");
  if (layers.empty()) throw std::invalid_argument("synthetic scene: no layers");
  if (supersample < 1) throw std::invalid_argument("synthetic scene: supersample must be at least 1");
  if (!(noise.accel_sigma >= 0) || !(noise.gyro_sigma >= 0))
    throw std::invalid_argument("synthetic scene: noise sigmas must be non-negative");
  intrinsics.validate();
}

std::vector<SE3Matrix<double>> SyntheticScene::trajectory() const {
  std::vector<SE3Matrix<double>> poses;
  poses.reserve(static_cast<std::size_t>(frames));
  for (int f = 0; f < frames; ++f) poses.push_back(motion.pose_at(frame_time(f)));
  return poses;
}

RenderedView render_view(const SyntheticScene& scene, const SE3Matrix<double>& camera_to_world) {
  if (scene.supersample < 1) throw ConfigError("render_view: supersample must be at least 1");
  const auto& k = scene.intrinsics;
  const int h = k.height, w = k.width;
  const Eigen::Matrix3d r = rotation_of(camera_to_world);
  const Eigen::Vector3d o = position_of(camera_to_world);

  RenderedView view;
  view.image.channels.assign(3, Plane<float>::Zero(h, w));
  view.depth = DepthMap<double>::Zero(h, w);

  // Nearest surface along the camera ray through image point (x, y).
  auto trace = [&](double x, double y, double& depth) -> const TexturedLayer* {
    const Eigen::Vector3d ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
    const Eigen::Vector3d d = r * ray_cam;
    double best = std::numeric_limits<double>::infinity();
    const TexturedLayer* hit = nullptr;
    for (const auto& layer : scene.layers) {
      const Eigen::Vector3d n = layer.normal();
      const double denom = n.dot(d);
      if (std::abs(denom) < 1e-12) continue;
      const double s = n.dot(layer.origin - o) / denom;
      if (!(s > 1e-6) || s >= best) continue;
      const Eigen::Vector3d local = o + s * d - layer.origin;
      if (std::abs(local.dot(layer.axis_u)) > layer.half_u || std::abs(local.dot(layer.axis_v)) > layer.half_v)
        continue;
      best = s;
      hit = &layer;
    }
    // ray_cam has unit z, so the ray parameter is the camera-frame depth.
    depth = best;
    return hit;
  };
  auto shade = [&](const TexturedLayer& layer, double x, double y, double depth) {
    const Eigen::Vector3d ray_cam((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
    const Eigen::Vector3d local = o + depth * (r * ray_cam) - layer.origin;
    return layer.color(local.dot(layer.axis_u), local.dot(layer.axis_v));
  };

  const int ss = scene.supersample;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      double depth = 0;
      const auto* hit = trace(u, v, depth);
      if (!hit) continue;
      view.depth(v, u) = depth;
      if (ss == 1) {
        const auto c = shade(*hit, u, v, depth);
        for (int ch = 0; ch < 3; ++ch) view.image[ch](v, u) = static_cast<float>(c[static_cast<std::size_t>(ch)]);
        continue;
      }
      // Box filter over an ss x ss grid inside the pixel; misses count as black.
      std::array<double, 3> acc{0, 0, 0};
      for (int j = 0; j < ss; ++j)
        for (int i = 0; i < ss; ++i) {
          const double x = u + (i + 0.5) / ss - 0.5, y = v + (j + 0.5) / ss - 0.5;
          double dj = 0;
          const auto* layer = trace(x, y, dj);
          if (!layer) continue;
          const auto c = shade(*layer, x, y, dj);
          for (std::size_t ch = 0; ch < 3; ++ch) acc[ch] += c[ch];
        }
      for (int ch = 0; ch < 3; ++ch)
        view.image[ch](v, u) = static_cast<float>(acc[static_cast<std::size_t>(ch)] / (ss * ss));
    }
  }
  return view;
}

Vector6<double> ideal_imu(const MotionSpec& motion, const Eigen::Vector3d& gravity, double t) {
  const double hstep = kDiffStep;
  const auto prev = motion.pose_at(t - hstep), cur = motion.pose_at(t), next = motion.pose_at(t + hstep);
  const Eigen::Vector3d accel =
      (position_of(next) - 2.0 * position_of(cur) + position_of(prev)) / (hstep * hstep);
  const Eigen::Matrix3d r = rotation_of(cur);
  // Body rate from R(t-h)^T R(t+h) = exp(2h [w]x).
  const Eigen::AngleAxisd delta(Eigen::Matrix3d(rotation_of(prev).transpose() * rotation_of(next)));
  Vector6<double> out;
  out.head<3>() = r.transpose() * (accel - gravity);
  out.tail<3>() = delta.axis() * delta.angle() / (2.0 * hstep);
  return out;
}

ImuStream simulate_imu(const SyntheticScene& scene) {
  scene.validate();
  // Cover the last frame and a little beyond so every snippet window is complete.
  const double t_end = scene.frame_time(scene.frames - 1) + 1.0 / scene.frame_rate;
  const auto count = static_cast<Eigen::Index>(std::floor(t_end * scene.imu_rate + 1e-9)) + 1;
  std::mt19937_64 rng(scene.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);

  ImuStream imu;
  imu.samples.resize(count, 6);
  for (Eigen::Index i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / scene.imu_rate;
    Vector6<double> m = ideal_imu(scene.motion, scene.gravity, t);
    m.head<3>() += scene.noise.accel_bias;
    m.tail<3>() += scene.noise.gyro_bias;
    if (scene.noise.accel_sigma > 0)
      for (int c = 0; c < 3; ++c) m[c] += scene.noise.accel_sigma * gauss(rng);
    if (scene.noise.gyro_sigma > 0)
      for (int c = 3; c < 6; ++c) m[c] += scene.noise.gyro_sigma * gauss(rng);
    imu.times.push_back(t);
    imu.samples.row(i) = m.transpose();
  }
  return imu;
}

DatasetConfig generate_synthetic(const SyntheticScene& scene, const std::filesystem::path& out,
                                 const std::string& sequence) {
  scene.validate();
  const auto dir = out / sequence;
  std::error_code ec;
  std::filesystem::create_directories(dir / "image_2", ec);
  std::filesystem::create_directories(dir / "depth", ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const auto poses = scene.trajectory();
  Trajectory gt;
  for (int f = 0; f < scene.frames; ++f) {
    const auto view = render_view(scene, poses[static_cast<std::size_t>(f)]);
    write_png(dir / "image_2" / frame_file(f, ".png"), view.image);
    write_depth_bin(dir / "depth" / frame_file(f, ".bin"), view.depth.cast<float>());
    gt.timestamps.push_back(scene.frame_time(f));
    gt.poses.push_back(poses[static_cast<std::size_t>(f)]);
  }
  write_kitti_poses(dir / "poses.txt", gt);

  // Camera motion from frame k to k+1 (pose of k+1 expressed in k).
  Trajectory rel;
  for (int f = 0; f + 1 < scene.frames; ++f) {
    rel.timestamps.push_back(scene.frame_time(f));
    rel.poses.push_back(compose(invert(poses[static_cast<std::size_t>(f)]), poses[static_cast<std::size_t>(f + 1)]));
  }
  write_kitti_poses(dir / "relative_poses.txt", rel);

  {
    auto times = open_out(dir / "times.txt");
    for (const double t : gt.timestamps) times << t << '\n';
  }
  {
    const auto& k = scene.intrinsics;
    auto calib = open_out(dir / "calib.txt");
    calib << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << '\n';
  }
  {
    const auto imu = simulate_imu(scene);
    auto f = open_out(dir / "imu.txt");
    for (std::size_t i = 0; i < imu.size(); ++i) {
      f << imu.times[i];
      for (int c = 0; c < 6; ++c) f << ' ' << imu.samples(static_cast<Eigen::Index>(i), c);
      f << '\n';
    }
    if (!f) throw std::runtime_error("write failed for " + (dir / "imu.txt").string());
  }

  const auto cfg_path = out / "dataset.cfg";
  DatasetConfig cfg;
  if (std::filesystem::exists(cfg_path)) {
    cfg = DatasetConfig::from_config(KeyValueConfig::load(cfg_path));
  } else {
    cfg.height = scene.intrinsics.height;
    cfg.width = scene.intrinsics.width;
    cfg.imu_rows = static_cast<int>(std::lround(2.0 * scene.imu_rate / scene.frame_rate));
  }
  cfg.root = out;
  for (auto* list : {&cfg.val, &cfg.test}) std::erase(*list, sequence);
  if (std::find(cfg.train.begin(), cfg.train.end(), sequence) == cfg.train.end()) cfg.train.push_back(sequence);
  cfg.intrinsics[sequence] = scene.intrinsics;
  cfg.validate();
  cfg.to_config().save(cfg_path);
  return cfg;
}

MotionSpec make_motion(const std::string& preset) {
  MotionSpec m;
  if (preset == "static") {
    m.kind = MotionKind::Static;
  } else if (preset == "line") {
    m.kind = MotionKind::Line;
    m.velocity = {0.0, 0.0, 2.0};
  } else if (preset == "circle") {
    m.kind = MotionKind::Circle;
    m.radius = 10.0;
    m.angular_speed = 0.2;
  } else if (preset == "wiggle") {
    // Forward drift with lateral and vertical sway and some yaw, so
    // consecutive snippets see visibly different motions.
    m.kind = MotionKind::Wiggle;
    m.velocity = {0.0, 0.0, 1.5};
    m.sway_amplitude = {0.4, 0.1, 0.3};
    m.sway_frequency = {0.23, 0.37, 0.31};
    m.yaw_amplitude = 0.12;
    m.yaw_frequency = 0.17;
  } else {
    throw std::invalid_argument("unknown motion preset '" + preset + "' (static, line, circle, wiggle)");
  }
  return m;
}

SyntheticScene make_scene(const std::string& preset, const MotionSpec& motion, int frames,
                          const CameraIntrinsics<double>& intrinsics, std::uint64_t seed) {
  SyntheticScene scene;
  scene.motion = motion;
  scene.frames = frames;
  scene.intrinsics = intrinsics;
  scene.seed = seed;
  std::mt19937_64 rng(seed);

  const Eigen::Vector3d ex = Eigen::Vector3d::UnitX(), ey = Eigen::Vector3d::UnitY(), ez = Eigen::Vector3d::UnitZ();
  if (preset == "plane") {
    scene.layers.push_back(textured(rng, motion.start + 4.0 * ez, ex, ey, std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity(), 0.3, 1.2));
  } else if (preset == "layers" || preset == "ground") {
    // Extent of the path in the x-z plane decides where objects go.
    const auto poses = [&] {
      SyntheticScene probe = scene;
      probe.frames = std::max(frames, 3);
      return probe.trajectory();
    }();
    double zmin = poses.front()(2, 3), zmax = zmin, xmin = poses.front()(0, 3), xmax = xmin;
    for (const auto& p : poses) {
      zmin = std::min(zmin, p(2, 3));
      zmax = std::max(zmax, p(2, 3));
      xmin = std::min(xmin, p(0, 3));
      xmax = std::max(xmax, p(0, 3));
    }
    const double ground_y = motion.start.y() + 1.5;
    // Ground (y down, so it lies below the camera) and far backdrop.
    scene.layers.push_back(textured(rng, {0.0, ground_y, 0.0}, ex, ez, std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity(), 0.1, 0.4));
    if (preset == "ground") {
      // Nothing stands on the ground, so the only occlusion is the horizon.
      scene.layers.push_back(textured(rng, {0.0, 0.0, zmax + 8.0}, ex, ey, std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity(), 0.1, 0.4));
      scene.validate();
      return scene;
    }
    scene.layers.push_back(textured(rng, {0.0, 0.0, zmax + 25.0}, ex, ey, std::numeric_limits<double>::infinity(),
                                    std::numeric_limits<double>::infinity(), 0.05, 0.2));
    // Rectangles staggered along the path on both sides.
    std::uniform_real_distribution<double> jitter(-0.4, 0.4), size(0.5, 1.1);
    int side = 0;
    for (double z = zmin + 2.5; z < zmax + 12.0; z += 1.7, ++side) {
      const double x = (side % 2 == 0 ? xmin - 1.6 : xmax + 1.6) + jitter(rng);
      const double y = motion.start.y() + jitter(rng);
      scene.layers.push_back(textured(rng, {x, y, z}, ex, ey, size(rng), size(rng), 0.25, 1.0));
    }
  } else {
    throw std::invalid_argument("unknown scene preset '" + preset + "' (plane, ground, layers)");
  }
  scene.validate();
  return scene;
}

}  // namespace selfvio
