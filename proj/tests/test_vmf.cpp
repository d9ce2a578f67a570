#include "selfvio/vmf.hpp"

#include <doctest.h>

#include <random>

using namespace selfvio;

TEST_CASE("mean resultant length matches coth(k) - 1/k") {
  const Eigen::Vector3d mu = Eigen::Vector3d(1, 2, -0.5).normalized();
  for (const double kappa : {1.0, 10.0, 100.0}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(kappa * 7));
    double sum = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      const auto x = sample_vmf<double>(mu, kappa, rng);
      CHECK(std::abs(x.norm() - 1.0) < 1e-12);
      sum += x.dot(mu);
    }
    const double expected = 1.0 / std::tanh(kappa) - 1.0 / kappa;
    CHECK(std::abs(vmf_mean_resultant_length(kappa) - expected) < 1e-15);
    CHECK(std::abs(sum / n - expected) < 0.02 * expected);
  }
}

TEST_CASE("very large concentration returns the mean direction") {
  std::mt19937_64 rng(41);
  const Eigen::Vector3d mu(0, 0, 1);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) worst = std::max(worst, (sample_vmf<double>(mu, 1e8, rng) - mu).norm());
  CHECK(worst < 1e-3);
}

TEST_CASE("samples are spread around the mean without bias") {
  // The component orthogonal to mu averages to zero.
  std::mt19937_64 rng(42);
  const Eigen::Vector3d mu(1, 0, 0);
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  const int n = 20000;
  for (int i = 0; i < n; ++i) sum += sample_vmf<double>(mu, 2.0, rng);
  sum /= n;
  CHECK(std::abs(sum.y()) < 0.02);
  CHECK(std::abs(sum.z()) < 0.02);
}

TEST_CASE("rotation offsets have the requested angle") {
  std::mt19937_64 rng(43);
  for (int i = 0; i < 50; ++i) {
    const Eigen::Matrix3d r = sample_rotation_offset<double>(Eigen::Vector3d::UnitZ(), 5.0, 0.3, rng);
    CHECK(std::abs(Eigen::AngleAxisd(r).angle() - 0.3) < 1e-12);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-12);
  }
}

TEST_CASE("invalid parameters") {
  std::mt19937_64 rng(44);
  CHECK_THROWS_AS((void)sample_vmf<double>(Eigen::Vector3d::UnitX(), 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS((void)sample_vmf<double>(Eigen::Vector3d::Zero(), 1.0, rng), std::invalid_argument);
}
