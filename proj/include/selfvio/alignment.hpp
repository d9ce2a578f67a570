#pragma once

// Closed-form least-squares similarity alignment between point sets.

#include "selfvio/geometry.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace selfvio {

template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

template <typename Scalar>
struct Similarity {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();
  Scalar scale{1};

  [[nodiscard]] Points3<Scalar> apply(const Points3<Scalar>& pts) const {
    return ((scale * rotation) * pts).colwise() + translation;
  }
};

class DegenerateAlignment : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// True when the centred points span at most a line.
template <typename Scalar>
[[nodiscard]] bool is_collinear(const Points3<Scalar>& pts, Scalar rel_tol = Scalar(1e-10)) {
  if (pts.cols() < 3) return true;
  const Points3<Scalar> centred = pts.colwise() - pts.rowwise().mean();
  const Eigen::JacobiSVD<Points3<Scalar>> svd(centred);
  const auto sv = svd.singularValues();
  return !(sv(0) > Scalar(0)) || sv(1) <= rel_tol * sv(0);
}

/// Minimizes sum ||dst - (s R src + t)||^2. With `with_scale == false` s is 1.
/// Degenerate (collinear) inputs throw unless `allow_degenerate` is set, in
/// which case an arbitrary member of the optimal family is returned.
template <typename Scalar>
[[nodiscard]] Similarity<Scalar> umeyama(const Points3<Scalar>& src, const Points3<Scalar>& dst, bool with_scale,
                                         bool allow_degenerate = false) {
  if (src.cols() != dst.cols()) throw std::invalid_argument("umeyama: point counts differ");
  if (src.cols() == 0) throw DegenerateAlignment("umeyama: no points");
  if (!allow_degenerate && (is_collinear(src) || is_collinear(dst)))
    throw DegenerateAlignment("umeyama: need at least 3 non-collinear positions");

  const auto m = static_cast<Scalar>(src.cols());
  const Vector3<Scalar> mean_src = src.rowwise().mean();
  const Vector3<Scalar> mean_dst = dst.rowwise().mean();
  const Points3<Scalar> xs = src.colwise() - mean_src;
  const Points3<Scalar> ys = dst.colwise() - mean_dst;
  const Scalar var_src = xs.squaredNorm() / m;

  Similarity<Scalar> out;
  if (!(var_src > Scalar(0))) {
    out.scale = with_scale ? Scalar(0) : Scalar(1);
    out.translation = mean_dst - out.scale * mean_src;
    return out;
  }

  const Matrix3<Scalar> cov = ys * xs.transpose() / m;
  const Eigen::JacobiSVD<Matrix3<Scalar>> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector3<Scalar> sign = Vector3<Scalar>::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < Scalar(0)) sign(2) = Scalar(-1);
  out.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? svd.singularValues().dot(sign) / var_src : Scalar(1);
  out.translation = mean_dst - out.scale * out.rotation * mean_src;
  return out;
}

}  // namespace selfvio
