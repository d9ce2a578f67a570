#pragma once

// Differentiable pinhole geometry: SE(3) parameterization, rigid flow,
// bilinear sampling and inverse warping. Everything is templated on the
// scalar type; the backward functions give exact analytic gradients.
//
// Conventions
//   * Pose6DoF holds T_{t->s}: it maps points from the target camera frame
//     into the source camera frame, X_s = R X_t + t.
//   * Rotation is Euler XYZ applied as R = Rz(rz) * Ry(ry) * Rx(rx).
//   * Pixel (u, v) sits at integer coordinates (column, row).

#include "selfvio/image.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace selfvio {

template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using SE3Matrix = Eigen::Matrix<Scalar, 4, 4>;

/// Points closer than this to the source image plane are treated as behind the camera.
inline constexpr double kMinProjectedDepth = 1e-6;

template <typename Scalar>
struct Pose6DoF {
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();
  Vector3<Scalar> rotation = Vector3<Scalar>::Zero();  // (rx, ry, rz), radians

  /// Layout (tx, ty, tz, rx, ry, rz).
  static Pose6DoF from_vector(const Vector6<Scalar>& v) {
    Pose6DoF p;
    p.translation = v.template head<3>();
    p.rotation = v.template tail<3>();
    return p;
  }
  [[nodiscard]] Vector6<Scalar> vector() const {
    Vector6<Scalar> v;
    v << translation, rotation;
    return v;
  }
  [[nodiscard]] bool is_finite() const { return translation.allFinite() && rotation.allFinite(); }
};

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  int width{1}, height{1};

  void validate() const {
    if (!(fx > Scalar(0)) || !(fy > Scalar(0)))
      throw std::invalid_argument("camera intrinsics: focal lengths must be positive");
    if (!(cx >= Scalar(0) && cx < Scalar(width)) || !(cy >= Scalar(0) && cy < Scalar(height)))
      throw std::invalid_argument("camera intrinsics: principal point outside the image");
  }

  [[nodiscard]] Matrix3<Scalar> matrix() const {
    Matrix3<Scalar> k;
    k << fx, Scalar(0), cx, Scalar(0), fy, cy, Scalar(0), Scalar(0), Scalar(1);
    return k;
  }

  /// 3x3 intrinsics embedded in a 4x4 with a unit lower-right block.
  [[nodiscard]] SE3Matrix<Scalar> matrix4() const {
    SE3Matrix<Scalar> k = SE3Matrix<Scalar>::Identity();
    k.template topLeftCorner<3, 3>() = matrix();
    return k;
  }

  [[nodiscard]] Eigen::Matrix<Scalar, 2, 1> project(const Vector3<Scalar>& p) const {
    return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
  }

  template <typename Other>
  [[nodiscard]] CameraIntrinsics<Other> cast() const {
    return {Other(fx), Other(fy), Other(cx), Other(cy), width, height};
  }
};

// ---------------------------------------------------------------------------
// SE(3)

template <typename Scalar>
[[nodiscard]] Matrix3<Scalar> rotation_x(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << Scalar(1), Scalar(0), Scalar(0), Scalar(0), c, -s, Scalar(0), s, c;
  return r;
}

template <typename Scalar>
[[nodiscard]] Matrix3<Scalar> rotation_y(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << c, Scalar(0), s, Scalar(0), Scalar(1), Scalar(0), -s, Scalar(0), c;
  return r;
}

template <typename Scalar>
[[nodiscard]] Matrix3<Scalar> rotation_z(Scalar a) {
  const Scalar c = std::cos(a), s = std::sin(a);
  Matrix3<Scalar> r;
  r << c, -s, Scalar(0), s, c, Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  return r;
}

template <typename Scalar>
[[nodiscard]] Matrix3<Scalar> euler_to_rotation(const Vector3<Scalar>& r) {
  return rotation_z(r.z()) * rotation_y(r.y()) * rotation_x(r.x());
}

/// d R / d(rx, ry, rz) for R = Rz Ry Rx.
template <typename Scalar>
[[nodiscard]] std::array<Matrix3<Scalar>, 3> euler_rotation_derivatives(const Vector3<Scalar>& r) {
  const Scalar ca = std::cos(r.x()), sa = std::sin(r.x());
  const Scalar cb = std::cos(r.y()), sb = std::sin(r.y());
  const Scalar cc = std::cos(r.z()), sc = std::sin(r.z());
  const Scalar z = Scalar(0);
  Matrix3<Scalar> dx, dy, dz;
  dx << z, z, z, z, -sa, -ca, z, ca, -sa;
  dy << -sb, z, cb, z, z, z, -cb, z, -sb;
  dz << -sc, -cc, z, cc, -sc, z, z, z, z;
  const Matrix3<Scalar> rx = rotation_x(r.x()), ry = rotation_y(r.y()), rz = rotation_z(r.z());
  return {rz * ry * dx, rz * dy * rx, dz * ry * rx};
}

template <typename Scalar>
[[nodiscard]] SE3Matrix<Scalar> pose_to_matrix(const Pose6DoF<Scalar>& pose) {
  if (!pose.is_finite()) throw std::invalid_argument("pose_to_matrix: non-finite pose");
  SE3Matrix<Scalar> m = SE3Matrix<Scalar>::Identity();
  m.template topLeftCorner<3, 3>() = euler_to_rotation(pose.rotation);
  m.template topRightCorner<3, 1>() = pose.translation;
  return m;
}

/// Inverse of pose_to_matrix; angles come back in (-pi, pi].
template <typename Scalar>
[[nodiscard]] Pose6DoF<Scalar> matrix_to_pose(const SE3Matrix<Scalar>& m) {
  if (!m.allFinite()) throw std::invalid_argument("matrix_to_pose: non-finite matrix");
  const Matrix3<Scalar> r = m.template topLeftCorner<3, 3>();
  Pose6DoF<Scalar> pose;
  pose.translation = m.template topRightCorner<3, 1>();
  pose.rotation.x() = std::atan2(r(2, 1), r(2, 2));
  pose.rotation.y() = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  pose.rotation.z() = std::atan2(r(1, 0), r(0, 0));
  return pose;
}

template <typename Scalar>
[[nodiscard]] SE3Matrix<Scalar> compose(const SE3Matrix<Scalar>& a, const SE3Matrix<Scalar>& b) {
  SE3Matrix<Scalar> out = a * b;
  out.row(3) << Scalar(0), Scalar(0), Scalar(0), Scalar(1);
  return out;
}

template <typename Scalar>
[[nodiscard]] SE3Matrix<Scalar> invert(const SE3Matrix<Scalar>& m) {
  const Matrix3<Scalar> rt = m.template topLeftCorner<3, 3>().transpose();
  SE3Matrix<Scalar> out = SE3Matrix<Scalar>::Identity();
  out.template topLeftCorner<3, 3>() = rt;
  out.template topRightCorner<3, 1>() = -rt * m.template topRightCorner<3, 1>();
  return out;
}

template <typename Scalar>
[[nodiscard]] SE3Matrix<Scalar> make_se3(const Matrix3<Scalar>& r, const Vector3<Scalar>& t) {
  SE3Matrix<Scalar> m = SE3Matrix<Scalar>::Identity();
  m.template topLeftCorner<3, 3>() = r;
  m.template topRightCorner<3, 1>() = t;
  return m;
}

template <typename Scalar>
[[nodiscard]] bool is_valid_se3(const SE3Matrix<Scalar>& m, Scalar tol = Scalar(1e-9)) {
  if (!m.allFinite()) return false;
  const Matrix3<Scalar> r = m.template topLeftCorner<3, 3>();
  if (((r.transpose() * r) - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(r.determinant() - Scalar(1)) > tol) return false;
  return m(3, 0) == Scalar(0) && m(3, 1) == Scalar(0) && m(3, 2) == Scalar(0) && m(3, 3) == Scalar(1);
}

/// Angle of the rotation block. The cosine comes from the trace formula; the
/// sine from the skew part keeps small angles accurate where acos is not.
template <typename Scalar>
[[nodiscard]] Scalar rotation_angle(const SE3Matrix<Scalar>& m) {
  const Matrix3<Scalar> r = m.template topLeftCorner<3, 3>();
  const Scalar c = (r.trace() - Scalar(1)) / Scalar(2);
  const Vector3<Scalar> axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(axis.norm() / Scalar(2), c);
}

// ---------------------------------------------------------------------------
// Pixel grids and rigid flow

/// Homogeneous pixel coordinates (u, v, 1) for every pixel, column index = v * width + u.
template <typename Scalar>
[[nodiscard]] Eigen::Matrix<Scalar, 3, Eigen::Dynamic> pixel_grid(int height, int width) {
  Eigen::Matrix<Scalar, 3, Eigen::Dynamic> grid(3, height * width);
  for (int v = 0; v < height; ++v)
    for (int u = 0; u < width; ++u) grid.col(v * width + u) << Scalar(u), Scalar(v), Scalar(1);
  return grid;
}

template <typename Scalar>
struct FlowField {
  Plane<Scalar> du, dv;
  ValidityMask valid;  // false where the point lands behind the source camera
};

/// f(p_t) = K T D(p_t) K^-1 p_t - p_t, with K the 4x4-embedded intrinsics.
template <typename Scalar>
[[nodiscard]] FlowField<Scalar> rigid_flow(const DepthMap<Scalar>& depth, const SE3Matrix<Scalar>& pose,
                                           const CameraIntrinsics<Scalar>& k) {
  validate_depth(depth);
  k.validate();
  const int h = static_cast<int>(depth.rows()), w = static_cast<int>(depth.cols());
  const auto grid = pixel_grid<Scalar>(h, w);
  const Matrix3<Scalar> k_inv = k.matrix().inverse();
  const Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> d(depth.data(), h * w);

  Eigen::Matrix<Scalar, 4, Eigen::Dynamic> cam(4, h * w);
  cam.template topRows<3>() = (k_inv * grid).array().rowwise() * d.array();
  cam.row(3).setOnes();
  const Eigen::Matrix<Scalar, 4, Eigen::Dynamic> proj = k.matrix4() * pose * cam;

  FlowField<Scalar> flow{Plane<Scalar>::Zero(h, w), Plane<Scalar>::Zero(h, w), ValidityMask::Constant(h, w, true)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto i = v * w + u;
      const Scalar z = proj(2, i);
      if (!(z > Scalar(kMinProjectedDepth))) {
        flow.valid(v, u) = false;
        continue;
      }
      flow.du(v, u) = proj(0, i) / z - Scalar(u);
      flow.dv(v, u) = proj(1, i) / z - Scalar(v);
    }
  }
  return flow;
}

template <typename Scalar>
[[nodiscard]] FlowField<Scalar> rigid_flow(const DepthMap<Scalar>& depth, const Pose6DoF<Scalar>& pose,
                                           const CameraIntrinsics<Scalar>& k) {
  return rigid_flow(depth, pose_to_matrix(pose), k);
}

template <typename Scalar>
struct RigidFlowGradient {
  DepthMap<Scalar> depth;
  Vector6<Scalar> pose;  // (tx, ty, tz, rx, ry, rz)
};

/// Back-propagates dL/d(du, dv) to depth and pose parameters. Invalid pixels
/// contribute nothing.
template <typename Scalar>
[[nodiscard]] RigidFlowGradient<Scalar> rigid_flow_backward(const DepthMap<Scalar>& depth,
                                                            const Pose6DoF<Scalar>& pose,
                                                            const CameraIntrinsics<Scalar>& k,
                                                            const Plane<Scalar>& grad_du,
                                                            const Plane<Scalar>& grad_dv) {
  const int h = static_cast<int>(depth.rows()), w = static_cast<int>(depth.cols());
  const Matrix3<Scalar> rot = euler_to_rotation(pose.rotation);
  const auto d_rot = euler_rotation_derivatives(pose.rotation);
  RigidFlowGradient<Scalar> g{DepthMap<Scalar>::Zero(h, w), Vector6<Scalar>::Zero()};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Scalar gu = grad_du(v, u), gv = grad_dv(v, u);
      if (gu == Scalar(0) && gv == Scalar(0)) continue;
      const Vector3<Scalar> ray((Scalar(u) - k.cx) / k.fx, (Scalar(v) - k.cy) / k.fy, Scalar(1));
      const Vector3<Scalar> x_t = depth(v, u) * ray;
      const Vector3<Scalar> x_s = rot * x_t + pose.translation;
      if (!(x_s.z() > Scalar(kMinProjectedDepth))) continue;
      const Scalar iz = Scalar(1) / x_s.z();
      const Vector3<Scalar> dl_dxs(gu * k.fx * iz, gv * k.fy * iz,
                                   -(gu * k.fx * x_s.x() + gv * k.fy * x_s.y()) * iz * iz);
      g.pose.template head<3>() += dl_dxs;
      for (int a = 0; a < 3; ++a) g.pose(3 + a) += dl_dxs.dot(d_rot[static_cast<std::size_t>(a)] * x_t);
      g.depth(v, u) = dl_dxs.dot(rot * ray);
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bilinear sampling

/// Four-neighbour interpolation stencil. A coordinate is in bounds when all
/// four neighbours exist, i.e. 0 <= x <= W-1 and 0 <= y <= H-1 (up to a few ulps).
template <typename Scalar>
struct BilinearStencil {
  int x0{0}, y0{0};
  Scalar wx{0}, wy{0};
  bool valid{false};

  /// Weights in order (top-left, top-right, bottom-left, bottom-right).
  [[nodiscard]] std::array<Scalar, 4> weights() const {
    return {(Scalar(1) - wx) * (Scalar(1) - wy), wx * (Scalar(1) - wy), (Scalar(1) - wx) * wy, wx * wy};
  }
};

template <typename Scalar>
[[nodiscard]] BilinearStencil<Scalar> bilinear_stencil(Scalar x, Scalar y, int height, int width) {
  BilinearStencil<Scalar> s;
  if (width < 2 || height < 2) return s;
  // Rounding in K T K^-1 can push an edge pixel a hair outside; absorb that.
  const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * Scalar(std::max(width, height));
  if (!(x >= -tol && x <= Scalar(width - 1) + tol && y >= -tol && y <= Scalar(height - 1) + tol)) return s;
  x = std::clamp(x, Scalar(0), Scalar(width - 1));
  y = std::clamp(y, Scalar(0), Scalar(height - 1));
  s.x0 = std::min(static_cast<int>(std::floor(x)), width - 2);
  s.y0 = std::min(static_cast<int>(std::floor(y)), height - 2);
  s.wx = x - Scalar(s.x0);
  s.wy = y - Scalar(s.y0);
  s.valid = true;
  return s;
}

template <typename Scalar>
struct SampleResult {
  ImageTensor<Scalar> image;
  ValidityMask valid;
};

/// Samples every channel of `image` at (x(v,u), y(v,u)). Out-of-bounds samples are 0 and invalid.
template <typename Scalar>
[[nodiscard]] SampleResult<Scalar> bilinear_sample(const ImageTensor<Scalar>& image, const Plane<Scalar>& x,
                                                   const Plane<Scalar>& y) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  SampleResult<Scalar> out{ImageTensor<Scalar>(image.channel_count(), h, w), ValidityMask::Constant(h, w, false)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto s = bilinear_stencil(x(v, u), y(v, u), image.height(), image.width());
      if (!s.valid) continue;
      out.valid(v, u) = true;
      const auto wts = s.weights();
      for (int c = 0; c < image.channel_count(); ++c) {
        const auto& src = image[c];
        out.image[c](v, u) = wts[0] * src(s.y0, s.x0) + wts[1] * src(s.y0, s.x0 + 1) +
                             wts[2] * src(s.y0 + 1, s.x0) + wts[3] * src(s.y0 + 1, s.x0 + 1);
      }
    }
  }
  return out;
}

template <typename Scalar>
struct SampleGradient {
  ImageTensor<Scalar> image;
  Plane<Scalar> x, y;
};

template <typename Scalar>
[[nodiscard]] SampleGradient<Scalar> bilinear_sample_backward(const ImageTensor<Scalar>& image,
                                                              const Plane<Scalar>& x, const Plane<Scalar>& y,
                                                              const ImageTensor<Scalar>& grad_out) {
  const int h = static_cast<int>(x.rows()), w = static_cast<int>(x.cols());
  SampleGradient<Scalar> g{ImageTensor<Scalar>(image.channel_count(), image.height(), image.width()),
                           Plane<Scalar>::Zero(h, w), Plane<Scalar>::Zero(h, w)};
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const auto s = bilinear_stencil(x(v, u), y(v, u), image.height(), image.width());
      if (!s.valid) continue;
      const auto wts = s.weights();
      for (int c = 0; c < image.channel_count(); ++c) {
        const Scalar go = grad_out[c](v, u);
        if (go == Scalar(0)) continue;
        const auto& src = image[c];
        const Scalar tl = src(s.y0, s.x0), tr = src(s.y0, s.x0 + 1);
        const Scalar bl = src(s.y0 + 1, s.x0), br = src(s.y0 + 1, s.x0 + 1);
        auto& gi = g.image[c];
        gi(s.y0, s.x0) += wts[0] * go;
        gi(s.y0, s.x0 + 1) += wts[1] * go;
        gi(s.y0 + 1, s.x0) += wts[2] * go;
        gi(s.y0 + 1, s.x0 + 1) += wts[3] * go;
        g.x(v, u) += go * ((Scalar(1) - s.wy) * (tr - tl) + s.wy * (br - bl));
        g.y(v, u) += go * ((Scalar(1) - s.wx) * (bl - tl) + s.wx * (br - tr));
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Inverse warping

template <typename Scalar>
struct WarpResult {
  ImageTensor<Scalar> image;
  ValidityMask valid;
};

/// Synthesizes the target view from `source` given target depth and T_{t->s}.
template <typename Scalar>
[[nodiscard]] WarpResult<Scalar> inverse_warp(const ImageTensor<Scalar>& source, const DepthMap<Scalar>& depth,
                                              const Pose6DoF<Scalar>& pose, const CameraIntrinsics<Scalar>& k) {
  if (source.height() != depth.rows() || source.width() != depth.cols())
    throw std::invalid_argument("inverse_warp: source and depth shapes differ");
  const auto flow = rigid_flow(depth, pose, k);
  const int h = static_cast<int>(depth.rows()), w = static_cast<int>(depth.cols());
  Plane<Scalar> x(h, w), y(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      x(v, u) = flow.valid(v, u) ? Scalar(u) + flow.du(v, u) : Scalar(-1);
      y(v, u) = flow.valid(v, u) ? Scalar(v) + flow.dv(v, u) : Scalar(-1);
    }
  auto sampled = bilinear_sample(source, x, y);
  return {std::move(sampled.image), sampled.valid && flow.valid};
}

template <typename Scalar>
struct WarpGradient {
  ImageTensor<Scalar> source;
  DepthMap<Scalar> depth;
  Vector6<Scalar> pose;
};

/// Gradient of sum(grad_out * inverse_warp(...).image) with respect to all inputs.
template <typename Scalar>
[[nodiscard]] WarpGradient<Scalar> inverse_warp_backward(const ImageTensor<Scalar>& source,
                                                         const DepthMap<Scalar>& depth,
                                                         const Pose6DoF<Scalar>& pose,
                                                         const CameraIntrinsics<Scalar>& k,
                                                         const ImageTensor<Scalar>& grad_out) {
  const auto flow = rigid_flow(depth, pose, k);
  const int h = static_cast<int>(depth.rows()), w = static_cast<int>(depth.cols());
  Plane<Scalar> x(h, w), y(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      x(v, u) = flow.valid(v, u) ? Scalar(u) + flow.du(v, u) : Scalar(-1);
      y(v, u) = flow.valid(v, u) ? Scalar(v) + flow.dv(v, u) : Scalar(-1);
    }
  auto gs = bilinear_sample_backward(source, x, y, grad_out);
  auto gf = rigid_flow_backward(depth, pose, k, gs.x, gs.y);
  return {std::move(gs.image), std::move(gf.depth), gf.pose};
}

}  // namespace selfvio
