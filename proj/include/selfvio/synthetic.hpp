#pragma once

// Ray-cast synthetic datasets with exact ground truth: textured planar layers
// seen from an analytic camera trajectory, plus simulated IMU.
//
// World frame: x right, y down, z forward (the camera frame at identity).
// Gravity points along +y.

#include "selfvio/dataio.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace selfvio {

struct TextureWave {
  double amplitude = 0;
  double freq_u = 0, freq_v = 0;  // cycles per meter
  std::array<double, 3> phase{};  // per colour channel
};

/// Planar patch: origin + a*axis_u + b*axis_v with |a| <= half_u, |b| <= half_v.
struct TexturedLayer {
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d axis_v = Eigen::Vector3d::UnitY();
  double half_u = std::numeric_limits<double>::infinity();
  double half_v = std::numeric_limits<double>::infinity();
  std::array<double, 3> base_color{};
  std::vector<TextureWave> waves;

  [[nodiscard]] Eigen::Vector3d normal() const { return axis_u.cross(axis_v); }
  /// Colour in [-1, 1] at local coordinates (a, b).
  [[nodiscard]] std::array<double, 3> color(double a, double b) const;
};

enum class MotionKind { Static, Line, Circle, Wiggle };

/// Analytic camera-to-world trajectory.
struct MotionSpec {
  MotionKind kind = MotionKind::Static;
  Eigen::Vector3d start = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();  // Line, and forward drift for Wiggle
  double radius = 1.0;                                 // Circle
  double angular_speed = 0.0;                          // Circle, rad/s about world y
  Eigen::Vector3d sway_amplitude = Eigen::Vector3d::Zero();  // Wiggle, m
  Eigen::Vector3d sway_frequency = Eigen::Vector3d::Zero();  // Wiggle, Hz
  double yaw_amplitude = 0.0;                                // Wiggle, rad
  double yaw_frequency = 0.0;                                // Wiggle, Hz

  [[nodiscard]] SE3Matrix<double> pose_at(double t) const;
};

struct ImuNoise {
  double accel_sigma = 0.0;  // m/s^2 white noise per sample
  double gyro_sigma = 0.0;   // rad/s white noise per sample
  Eigen::Vector3d accel_bias = Eigen::Vector3d::Zero();
  Eigen::Vector3d gyro_bias = Eigen::Vector3d::Zero();
};

struct SyntheticScene {
  std::vector<TexturedLayer> layers;
  MotionSpec motion;
  int frames = 12;
  double frame_rate = 10.0;
  double imu_rate = 100.0;
  CameraIntrinsics<double> intrinsics{100.0, 100.0, 79.5, 23.5, 160, 48};
  ImuNoise noise;
  Eigen::Vector3d gravity{0.0, 9.81, 0.0};
  std::uint64_t seed = 0;
  int supersample = 1;  // colour is the mean of supersample^2 rays per pixel; depth is the centre ray

  void validate() const;
  [[nodiscard]] double frame_time(int frame) const { return frame / frame_rate; }
  /// Camera-to-world pose at every frame time.
  [[nodiscard]] std::vector<SE3Matrix<double>> trajectory() const;
};

struct RenderedView {
  ImageTensor<float> image;
  DepthMap<double> depth;  // camera z of the nearest hit, 0 where nothing was hit
};

[[nodiscard]] RenderedView render_view(const SyntheticScene& scene, const SE3Matrix<double>& camera_to_world);

/// Noise-free specific force and body rate at time t: (f_x, f_y, f_z, w_x, w_y, w_z).
[[nodiscard]] Vector6<double> ideal_imu(const MotionSpec& motion, const Eigen::Vector3d& gravity, double t);

/// IMU samples at imu_rate covering every frame, with configured noise and bias.
[[nodiscard]] ImuStream simulate_imu(const SyntheticScene& scene);

/// Writes one sequence in the dataset layout and returns a config whose
/// training split contains it. An existing `dataset.cfg` under `out` is extended.
DatasetConfig generate_synthetic(const SyntheticScene& scene, const std::filesystem::path& out,
                                 const std::string& sequence = "00");

/// Named scenes: "plane" (one textured fronto-parallel plane), "ground"
/// (ground plane and backdrop) or "layers" (ground, backdrop and rectangles
/// along the path).
[[nodiscard]] SyntheticScene make_scene(const std::string& preset, const MotionSpec& motion, int frames,
                                        const CameraIntrinsics<double>& intrinsics, std::uint64_t seed);

/// Named trajectories: "static", "line", "circle", "wiggle".
[[nodiscard]] MotionSpec make_motion(const std::string& preset);

}  // namespace selfvio
