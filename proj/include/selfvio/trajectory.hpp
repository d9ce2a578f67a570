#pragma once

#include "selfvio/geometry.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace selfvio {

/// Absolute camera-to-world poses with strictly increasing timestamps.
struct Trajectory {
  std::vector<double> timestamps;
  std::vector<SE3Matrix<double>> poses;

  [[nodiscard]] std::size_t size() const { return poses.size(); }
  [[nodiscard]] bool empty() const { return poses.empty(); }
  [[nodiscard]] Eigen::Matrix3Xd positions() const;
  [[nodiscard]] Trajectory slice(std::size_t first, std::size_t count) const;

  /// Throws std::invalid_argument if timestamps and poses disagree or times do not increase.
  void validate() const;
};

/// Timestamps 0, 1, 2, ... for trajectories read without timing information.
[[nodiscard]] std::vector<double> index_timestamps(std::size_t n);

/// KITTI odometry pose format: one row-major 3x4 matrix (12 floats) per line.
[[nodiscard]] Trajectory read_kitti_poses(const std::filesystem::path& path);
void write_kitti_poses(const std::filesystem::path& path, const Trajectory& trajectory);

/// Chains per-step camera motions (pose of frame k+1 expressed in frame k)
/// into absolute poses starting at the identity: P_{k+1} = P_k * M_k.
[[nodiscard]] Trajectory integrate_relative_poses(const std::vector<SE3Matrix<double>>& motions,
                                                  std::vector<double> timestamps = {});

/// Converts a point transform T_{t->s} (X_s = T X_t) into the camera motion
/// from frame t to frame s, i.e. the pose of s expressed in t.
[[nodiscard]] inline SE3Matrix<double> motion_from_point_transform(const SE3Matrix<double>& t_to_s) {
  return invert(t_to_s);
}

}  // namespace selfvio
