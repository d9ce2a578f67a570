#include "selfvio/trajectory.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace selfvio {

Eigen::Matrix3Xd Trajectory::positions() const {
  Eigen::Matrix3Xd out(3, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t i = 0; i < poses.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = poses[i].topRightCorner<3, 1>();
  return out;
}

Trajectory Trajectory::slice(std::size_t first, std::size_t count) const {
  if (first + count > poses.size()) throw std::out_of_range("Trajectory::slice out of range");
  Trajectory out;
  out.poses.assign(poses.begin() + static_cast<std::ptrdiff_t>(first),
                   poses.begin() + static_cast<std::ptrdiff_t>(first + count));
  if (!timestamps.empty())
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

void Trajectory::validate() const {
  if (timestamps.size() != poses.size()) throw std::invalid_argument("trajectory: timestamp/pose count mismatch");
  for (std::size_t i = 1; i < timestamps.size(); ++i)
    if (!(timestamps[i] > timestamps[i - 1]))
      throw std::invalid_argument("trajectory: timestamps must be strictly increasing");
}

std::vector<double> index_timestamps(std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<double>(i);
  return t;
}

Trajectory read_kitti_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose file: " + path.string());
  Trajectory traj;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    SE3Matrix<double> m = SE3Matrix<double>::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c)
        if (!(ss >> m(r, c)))
          throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 12 values");
    traj.poses.push_back(m);
  }
  traj.timestamps = index_timestamps(traj.poses.size());
  return traj;
}

void write_kitti_poses(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write pose file: " + path.string());
  out << std::setprecision(12);
  for (const auto& m : trajectory.poses) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) out << m(r, c) << ((r == 2 && c == 3) ? '\n' : ' ');
  }
}

Trajectory integrate_relative_poses(const std::vector<SE3Matrix<double>>& motions, std::vector<double> timestamps) {
  Trajectory traj;
  traj.poses.reserve(motions.size() + 1);
  traj.poses.push_back(SE3Matrix<double>::Identity());
  for (const auto& m : motions) traj.poses.push_back(compose(traj.poses.back(), m));
  traj.timestamps = timestamps.empty() ? index_timestamps(traj.poses.size()) : std::move(timestamps);
  if (traj.timestamps.size() != traj.poses.size())
    throw std::invalid_argument("integrate_relative_poses: need one timestamp per resulting pose");
  return traj;
}

}  // namespace selfvio
