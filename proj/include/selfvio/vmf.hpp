#pragma once

// von Mises-Fisher sampling on the 2-sphere (Wood's rejection scheme) and the
// random rotation offsets built from it.

#include "selfvio/geometry.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace selfvio {

/// Expected value of <x, mu> for x ~ vMF(mu, kappa) on S^2: coth(kappa) - 1/kappa.
template <typename Scalar>
[[nodiscard]] Scalar vmf_mean_resultant_length(Scalar kappa) {
  if (kappa < Scalar(1e-6)) return kappa / Scalar(3);
  return Scalar(1) / std::tanh(kappa) - Scalar(1) / kappa;
}

/// Any two unit vectors completing `n` to a right-handed orthonormal frame.
template <typename Scalar>
void orthonormal_complement(const Vector3<Scalar>& n, Vector3<Scalar>& e1, Vector3<Scalar>& e2) {
  const Vector3<Scalar> helper =
      std::abs(n.x()) < Scalar(0.9) ? Vector3<Scalar>::UnitX() : Vector3<Scalar>::UnitY();
  e1 = n.cross(helper).normalized();
  e2 = n.cross(e1);
}

template <typename Scalar, typename Rng>
[[nodiscard]] Vector3<Scalar> sample_vmf(const Vector3<Scalar>& mean_direction, Scalar kappa, Rng& rng) {
  if (!(kappa > Scalar(0))) throw std::invalid_argument("sample_vmf: kappa must be positive");
  const Scalar norm = mean_direction.norm();
  if (!(norm > Scalar(0))) throw std::invalid_argument("sample_vmf: mean direction must be non-zero");
  const Vector3<Scalar> mu = mean_direction / norm;

  // Wood (1994) with dimension p = 3, so (p - 1) = 2 and the beta proposal is uniform.
  constexpr Scalar dim_m1 = Scalar(2);
  const Scalar b = dim_m1 / (Scalar(2) * kappa + std::sqrt(Scalar(4) * kappa * kappa + dim_m1 * dim_m1));
  const Scalar x0 = (Scalar(1) - b) / (Scalar(1) + b);
  const Scalar one_minus_x0_sq = Scalar(4) * b / ((Scalar(1) + b) * (Scalar(1) + b));
  const Scalar c = kappa * x0 + dim_m1 * std::log(one_minus_x0_sq);

  std::uniform_real_distribution<Scalar> unit(Scalar(0), Scalar(1));
  Scalar w = Scalar(1);
  for (;;) {
    const Scalar z = unit(rng);
    const Scalar u = unit(rng);
    w = (Scalar(1) - (Scalar(1) + b) * z) / (Scalar(1) - (Scalar(1) - b) * z);
    if (kappa * w + dim_m1 * std::log(Scalar(1) - x0 * w) - c >= std::log(u)) break;
  }
  const Scalar phi = Scalar(2) * std::numbers::pi_v<Scalar> * unit(rng);
  Vector3<Scalar> e1, e2;
  orthonormal_complement(mu, e1, e2);
  const Scalar radial = std::sqrt(std::max(Scalar(0), Scalar(1) - w * w));
  return (w * mu + radial * (std::cos(phi) * e1 + std::sin(phi) * e2)).normalized();
}

/// Rotation by `angle` radians about an axis drawn from vMF(mean_axis, kappa).
template <typename Scalar, typename Rng>
[[nodiscard]] Matrix3<Scalar> sample_rotation_offset(const Vector3<Scalar>& mean_axis, Scalar kappa, Scalar angle,
                                                     Rng& rng) {
  const Vector3<Scalar> axis = sample_vmf(mean_axis, kappa, rng);
  return Eigen::AngleAxis<Scalar>(angle, axis).toRotationMatrix();
}

}  // namespace selfvio
