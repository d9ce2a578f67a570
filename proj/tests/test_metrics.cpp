#include "selfvio/metrics.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace selfvio;

namespace {

DepthMap<double> map2x2(double a, double b, double c, double d) {
  DepthMap<double> m(2, 2);
  m << a, b, c, d;
  return m;
}

Trajectory straight_line(std::size_t n, double step, double drift = 0.0) {
  Trajectory t;
  double x = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Matrix4d p = Eigen::Matrix4d::Identity();
    p(2, 3) = x;
    t.poses.push_back(p);
    t.timestamps.push_back(static_cast<double>(i));
    x += step * (1.0 + drift);
  }
  return t;
}

Trajectory random_walk(std::mt19937_64& rng, std::size_t n) {
  std::vector<SE3Matrix<double>> motions;
  std::uniform_real_distribution<double> fwd(0.5, 1.5);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Eigen::Matrix4d m = testing::random_se3(rng, 0.05, 0.1);
    m(2, 3) += fwd(rng);
    motions.push_back(m);
  }
  return integrate_relative_poses(motions);
}

Trajectory perturb(std::mt19937_64& rng, const Trajectory& t, double angle, double trans) {
  Trajectory out = t;
  for (auto& p : out.poses) p = compose(p, testing::random_se3(rng, angle, trans));
  return out;
}

/// Straightforward all-pairs reference for the segment errors.
struct Reference {
  std::vector<std::tuple<std::size_t, std::size_t, double, double, double>> segments;  // i, j, len, t, r
};

Reference brute_force(const Trajectory& est, const Trajectory& gt, const std::vector<double>& lengths) {
  std::vector<double> dist(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i)
    dist[i] = dist[i - 1] + (gt.poses[i].topRightCorner<3, 1>() - gt.poses[i - 1].topRightCorner<3, 1>()).norm();
  Reference ref;
  for (const double len : lengths)
    for (std::size_t i = 0; i < gt.size(); ++i)
      for (std::size_t j = 0; j < gt.size(); ++j) {
        if (std::abs(dist[j] - dist[i] - len) > 0.2) continue;
        const Eigen::Matrix4d de = est.poses[i].inverse() * est.poses[j];
        const Eigen::Matrix4d dg = gt.poses[i].inverse() * gt.poses[j];
        const Eigen::Matrix4d err = de.inverse() * dg;
        const double angle = std::acos(std::clamp((err.topLeftCorner<3, 3>().trace() - 1) / 2, -1.0, 1.0));
        ref.segments.emplace_back(i, j, len, err.topRightCorner<3, 1>().norm() / len, angle / len);
      }
  return ref;
}

}  // namespace

TEST_CASE("median handles odd and even counts") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK_THROWS((void)median({}));
}

TEST_CASE("depth metrics on identical maps") {
  const auto g = map2x2(1, 2, 3, 4);
  const auto m = depth_metrics(g, g);
  CHECK(m.abs_rel == 0.0);
  CHECK(m.rmse == 0.0);
  CHECK(m.a1 == 1.0);
  CHECK(m.a3 == 1.0);
  CHECK(m.scale == 1.0);
}

TEST_CASE("median scaling removes a global factor") {
  const auto g = map2x2(1, 2, 3, 4);
  const auto m = depth_metrics(2.0 * g, g);
  CHECK(m.scale == doctest::Approx(0.5));
  CHECK(m.abs_rel < 1e-15);
  CHECK(m.rmse < 1e-15);
}

TEST_CASE("constant offset on a constant map, unscaled") {
  // pred 5 against gt 4: every statistic by hand.
  const auto m = depth_metrics(map2x2(5, 5, 5, 5), map2x2(4, 4, 4, 4), {80.0, 1e-3, false});
  CHECK(std::abs(m.abs_rel - 0.25) < 1e-12);
  CHECK(std::abs(m.sq_rel - 0.25) < 1e-12);
  CHECK(std::abs(m.rmse - 1.0) < 1e-12);
  CHECK(std::abs(m.rmse_log - std::log(1.25)) < 1e-12);
  CHECK(m.a1 == 0.0);  // ratio 1.25 is not strictly below 1.25
  CHECK(m.a2 == 1.0);
  CHECK(m.a3 == 1.0);
}

TEST_CASE("constant offset on a constant map, median scaled") {
  // Median scaling maps pred = gt + 1 back onto gt exactly.
  const auto m = depth_metrics(map2x2(5, 5, 5, 5), map2x2(4, 4, 4, 4));
  CHECK(std::abs(m.scale - 0.8) < 1e-12);
  CHECK(m.abs_rel < 1e-12);
  CHECK(m.rmse < 1e-12);
  CHECK(m.a1 == 1.0);
}

TEST_CASE("non-constant 2x2 fixture with median scaling") {
  // s = median(2,4,5,10) / median(1,3,5,9) = 4.5 / 4 = 1.125
  // scaled = 1.125, 3.375, 5.625, 10.125
  const auto m = depth_metrics(map2x2(1, 3, 5, 9), map2x2(2, 4, 5, 10));
  CHECK(std::abs(m.scale - 1.125) < 1e-12);
  CHECK(std::abs(m.abs_rel - 0.1828125) < 1e-12);
  CHECK(std::abs(m.sq_rel - 0.1400390625) < 1e-12);
  CHECK(std::abs(m.rmse - 0.625) < 1e-12);
  const double l1 = std::log(1.125 / 2), l2 = std::log(3.375 / 4), l3 = std::log(5.625 / 5), l4 = std::log(10.125 / 10);
  CHECK(std::abs(m.rmse_log - std::sqrt((l1 * l1 + l2 * l2 + l3 * l3 + l4 * l4) / 4)) < 1e-12);
  CHECK(m.a1 == 0.75);
  CHECK(m.a2 == 0.75);
  CHECK(m.a3 == 1.0);
}

TEST_CASE("depth metric pixel selection and errors") {
  // gt = 0 and gt above the cap are ignored.
  const auto m = depth_metrics(map2x2(1, 1, 1, 1), map2x2(0, 90, 1, 1));
  CHECK(m.count == 2);
  CHECK_THROWS_AS((void)depth_metrics(map2x2(1, 1, 1, 1), map2x2(0, 0, 0, 0)), std::invalid_argument);
  CHECK_THROWS_AS((void)depth_metrics(map2x2(1, 1, 1, 1), DepthMap<double>::Ones(3, 3)), std::invalid_argument);
}

TEST_CASE("depth metric properties on random maps") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> d(0.5, 70.0), noise(0.5, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    DepthMap<double> gt(6, 7), pred(6, 7);
    for (Eigen::Index i = 0; i < gt.size(); ++i) {
      gt.data()[i] = d(rng);
      pred.data()[i] = gt.data()[i] * noise(rng) * 3.0;
    }
    const auto m = depth_metrics(pred, gt);
    CHECK(m.a1 <= m.a2);
    CHECK(m.a2 <= m.a3);
    CHECK(m.a1 >= 0.0);
    CHECK(m.a3 <= 1.0);
    CHECK(m.abs_rel >= 0.0);
    std::vector<double> scaled, g;
    for (Eigen::Index i = 0; i < gt.size(); ++i) {
      scaled.push_back(pred.data()[i] * m.scale);
      g.push_back(gt.data()[i]);
    }
    CHECK(median(scaled) == doctest::Approx(median(g)).epsilon(1e-14));
  }
}

TEST_CASE("kitti errors vanish for a perfect estimate and under global transforms") {
  std::mt19937_64 rng(22);
  const auto gt = random_walk(rng, 120);
  const auto same = kitti_relative_errors(gt, gt, desk_lengths());
  CHECK(same.trans_percent < 1e-9);
  CHECK(same.rot_deg_per_100m < 1e-6);
  CHECK_FALSE(same.segments.empty());

  const auto est = perturb(rng, gt, 0.01, 0.05);
  const auto base = kitti_relative_errors(est, gt, desk_lengths());
  CHECK(base.trans_percent > 0.0);

  const Eigen::Matrix4d g = testing::random_se3(rng, 3.0, 10.0);
  Trajectory moved = est;
  for (auto& p : moved.poses) p = compose(g, p);
  const auto after = kitti_relative_errors(moved, gt, desk_lengths());
  CHECK(after.trans_percent == doctest::Approx(base.trans_percent).epsilon(1e-9));
  CHECK(after.rot_deg_per_100m == doctest::Approx(base.rot_deg_per_100m).epsilon(1e-9));

  Trajectory offset = gt;
  for (auto& p : offset.poses) p.topRightCorner<3, 1>() += Eigen::Vector3d(3, -1, 2);
  CHECK(kitti_relative_errors(offset, gt, desk_lengths()).trans_percent < 1e-9);
}

TEST_CASE("one percent scale drift gives one percent translation error") {
  const auto gt = straight_line(1001, 0.1);
  const auto est = straight_line(1001, 0.1, 0.01);
  const std::vector<double> lengths{10, 20, 50};
  const auto m = kitti_relative_errors(est, gt, lengths);
  CHECK(std::abs(m.trans_percent - 1.0) < 0.05);
  CHECK(m.rot_deg_per_100m < 1e-9);
  const auto ref = brute_force(est, gt, lengths);
  REQUIRE(ref.segments.size() == m.segments.size());
  double sum = 0;
  for (const auto& s : ref.segments) sum += std::get<3>(s);
  CHECK(std::abs(100.0 * sum / static_cast<double>(ref.segments.size()) - m.trans_percent) < 1e-9);
}

TEST_CASE("segment selection equals the all-pairs reference") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> len(40, 200);
    const auto gt = random_walk(rng, len(rng));
    const auto est = perturb(rng, gt, 0.02, 0.1);
    const auto m = kitti_relative_errors(est, gt, desk_lengths());
    const auto ref = brute_force(est, gt, desk_lengths());
    REQUIRE(m.segments.size() == ref.segments.size());
    // Both enumerate by length, then i, then j.
    for (std::size_t s = 0; s < ref.segments.size(); ++s) {
      const auto& [i, j, l, t, r] = ref.segments[s];
      CHECK(m.segments[s].first == i);
      CHECK(m.segments[s].last == j);
      CHECK(std::abs(m.segments[s].trans_error - t) < 1e-9);
      CHECK(std::abs(m.segments[s].rot_error - r) < 1e-9);
    }
  }
}

TEST_CASE("lengths without segments are reported") {
  const auto gt = straight_line(50, 0.5);  // 24.5 m in total
  const auto m = kitti_relative_errors(gt, gt, desk_lengths());
  CHECK(m.missing_lengths == std::vector<double>{28, 35});
  CHECK(m.per_length.size() == 3);
}

TEST_CASE("snippet ate is zero for exact and similarity-transformed estimates") {
  std::mt19937_64 rng(24);
  const auto gt = random_walk(rng, 40);
  const auto exact = ate_snippets(gt, gt);
  CHECK(exact.mean < 1e-12);
  CHECK(exact.std < 1e-12);
  CHECK(exact.per_snippet.size() == 36);

  // Each 5-frame snippet transformed by its own similarity.
  for (std::size_t first = 0; first + 5 <= gt.size(); first += 5) {
    const Eigen::Matrix4d g = testing::random_se3(rng, 2.0, 5.0);
    const auto snippet_gt = gt.slice(first, 5);
    Trajectory snippet_est = snippet_gt;
    for (auto& p : snippet_est.poses)
      p.topRightCorner<3, 1>() = 0.7 * g.topLeftCorner<3, 3>() * p.topRightCorner<3, 1>() + g.topRightCorner<3, 1>();
    CHECK(ate_snippets(snippet_est, snippet_gt).mean < 1e-9);
  }
}

TEST_CASE("snippet ate under isotropic position noise") {
  // Square path with 0.1 m Gaussian noise per axis over 1000 snippets. Before
  // alignment the RMSE is 0.1 * sqrt(3); the 7 aligned parameters absorb part
  // of the 15 noisy coordinates, leaving about sqrt(8/15) of that.
  std::mt19937_64 rng(25);
  std::normal_distribution<double> noise(0.0, 0.1);
  Trajectory gt, est;
  for (int i = 0; i < 1004; ++i) {
    const int k = i % 160;
    const int side = k / 40, s = k % 40;
    Eigen::Vector3d p = side == 0   ? Eigen::Vector3d(s, 0, 0)
                        : side == 1 ? Eigen::Vector3d(40, 0, s)
                        : side == 2 ? Eigen::Vector3d(40 - s, 0, 40)
                                    : Eigen::Vector3d(0, 0, 40 - s);
    Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
    pose.topRightCorner<3, 1>() = p;
    gt.poses.push_back(pose);
    pose.topRightCorner<3, 1>() += Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
    est.poses.push_back(pose);
    gt.timestamps.push_back(i);
    est.timestamps.push_back(i);
  }
  double raw = 0;
  std::size_t count = 0;
  for (std::size_t first = 0; first + 5 <= gt.size(); ++first, ++count)
    raw += position_rmse(est.slice(first, 5).positions(), gt.slice(first, 5).positions());
  raw /= static_cast<double>(count);
  CHECK(count == 1000);
  CHECK(std::abs(raw - 0.1 * std::sqrt(3.0)) < 0.2 * 0.1 * std::sqrt(3.0));

  const auto ate = ate_snippets(est, gt);
  const double expected = 0.1 * std::sqrt(3.0) * std::sqrt(8.0 / 15.0);
  CHECK(ate.per_snippet.size() == 1000);
  CHECK(std::abs(ate.mean - expected) < 0.2 * expected);
  CHECK(ate.mean < raw);
  CHECK(ate.std > 0.0);
}

TEST_CASE("umeyama alignment modes") {
  std::mt19937_64 rng(26);
  const auto gt = random_walk(rng, 30);
  const Eigen::Matrix4d g = testing::random_se3(rng, 2.0, 3.0);
  Trajectory est = gt;
  for (auto& p : est.poses) p.topRightCorner<3, 1>() = 2.0 * g.topLeftCorner<3, 3>() * p.topRightCorner<3, 1>() +
                                                       g.topRightCorner<3, 1>();
  const auto seven = umeyama_align(est, gt, 7);
  CHECK(std::abs(seven.transform.scale - 0.5) < 1e-9);
  CHECK(seven.rmse < 1e-9);
  const auto six = umeyama_align(est, gt, 6);
  CHECK(six.transform.scale == 1.0);
  CHECK(six.rmse > 0.1);
  CHECK_THROWS_AS((void)umeyama_align(est, gt, 5), std::invalid_argument);
}
