#pragma once

#include "selfvio/geometry.hpp"

#include <Eigen/Geometry>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

/// Directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("selfvio_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Euler XYZ rotation built from Eigen's angle-axis type, independent of the library helpers.
inline Eigen::Matrix3d reference_rotation(const Eigen::Vector3d& r) {
  return (Eigen::AngleAxisd(r.z(), Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(r.y(), Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(r.x(), Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

inline Eigen::Matrix4d random_se3(std::mt19937_64& rng, double max_angle, double max_trans) {
  std::uniform_real_distribution<double> a(-max_angle, max_angle), t(-max_trans, max_trans);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = reference_rotation({a(rng), a(rng), a(rng)});
  m.topRightCorner<3, 1>() = Eigen::Vector3d(t(rng), t(rng), t(rng));
  return m;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

}  // namespace testing
