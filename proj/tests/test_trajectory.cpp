#include "selfvio/trajectory.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <random>

using namespace selfvio;

TEST_CASE("identity motions give a stationary trajectory") {
  const auto t = integrate_relative_poses(std::vector<SE3Matrix<double>>(5, SE3Matrix<double>::Identity()));
  REQUIRE(t.size() == 6);
  for (const auto& p : t.poses) CHECK(p == SE3Matrix<double>::Identity());
  CHECK(t.timestamps.back() == 5.0);
}

TEST_CASE("constant unit translation accumulates") {
  SE3Matrix<double> step = SE3Matrix<double>::Identity();
  step(0, 3) = 1.0;
  const auto t = integrate_relative_poses(std::vector<SE3Matrix<double>>(7, step));
  CHECK((t.poses.back().topRightCorner<3, 1>() - Eigen::Vector3d(7, 0, 0)).norm() < 1e-15);
}

TEST_CASE("chained motions equal the direct matrix product") {
  std::mt19937_64 rng(51);
  std::vector<SE3Matrix<double>> motions;
  for (int i = 0; i < 50; ++i) motions.push_back(testing::random_se3(rng, 0.3, 1.0));
  const auto t = integrate_relative_poses(motions);
  Eigen::Matrix4d product = Eigen::Matrix4d::Identity();
  for (std::size_t k = 0; k < motions.size(); ++k) {
    product = product * motions[k];
    CHECK((t.poses[k + 1] - product).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("point transforms and camera motions are inverse") {
  std::mt19937_64 rng(52);
  const Eigen::Matrix4d p0 = testing::random_se3(rng, 1.0, 3.0), p1 = testing::random_se3(rng, 1.0, 3.0);
  // T_{0->1} maps points of frame 0 into frame 1.
  const Eigen::Matrix4d t01 = p1.inverse() * p0;
  CHECK((compose(p0, motion_from_point_transform(t01)) - p1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kitti pose files round trip") {
  testing::TempDir dir("traj");
  std::mt19937_64 rng(53);
  Trajectory t;
  for (int i = 0; i < 10; ++i) {
    t.poses.push_back(testing::random_se3(rng, 1.0, 50.0));
    t.timestamps.push_back(i);
  }
  write_kitti_poses(dir.path() / "p.txt", t);
  const auto back = read_kitti_poses(dir.path() / "p.txt");
  REQUIRE(back.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK((back.poses[i] - t.poses[i]).cwiseAbs().maxCoeff() < 1e-9);

  std::ofstream(dir.path() / "bad.txt") << "1 2 3\n";
  CHECK_THROWS((void)read_kitti_poses(dir.path() / "bad.txt"));
  CHECK_THROWS((void)read_kitti_poses(dir.path() / "missing.txt"));
}

TEST_CASE("trajectory validation and slicing") {
  Trajectory t;
  t.poses.assign(3, SE3Matrix<double>::Identity());
  t.timestamps = {0.0, 1.0, 1.0};
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
  t.timestamps = {0.0, 1.0, 2.0};
  CHECK_NOTHROW(t.validate());
  const auto s = t.slice(1, 2);
  CHECK(s.size() == 2);
  CHECK(s.timestamps.front() == 1.0);
  t.timestamps.pop_back();
  CHECK_THROWS_AS(t.validate(), std::invalid_argument);
}
