#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace selfvio {

/// Single-channel H×W raster, row-major so that it maps 1:1 onto NCHW planes.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using ValidityMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel depth of the target view in meters. Values must be positive and finite.
template <typename Scalar>
using DepthMap = Plane<Scalar>;

/// Planar multi-channel image. Pixel (u, v) sits at integer coordinates:
/// column u in [0, width), row v in [0, height).
template <typename Scalar>
struct ImageTensor {
  std::vector<Plane<Scalar>> channels;

  ImageTensor() = default;
  ImageTensor(int channel_count, int height, int width)
      : channels(static_cast<std::size_t>(channel_count), Plane<Scalar>::Zero(height, width)) {}

  [[nodiscard]] int channel_count() const { return static_cast<int>(channels.size()); }
  [[nodiscard]] int height() const { return channels.empty() ? 0 : static_cast<int>(channels.front().rows()); }
  [[nodiscard]] int width() const { return channels.empty() ? 0 : static_cast<int>(channels.front().cols()); }

  Plane<Scalar>& operator[](int c) { return channels[static_cast<std::size_t>(c)]; }
  const Plane<Scalar>& operator[](int c) const { return channels[static_cast<std::size_t>(c)]; }

  [[nodiscard]] bool same_shape(const ImageTensor& other) const {
    return channel_count() == other.channel_count() && height() == other.height() &&
           width() == other.width();
  }

  template <typename Other>
  [[nodiscard]] ImageTensor<Other> cast() const {
    ImageTensor<Other> out;
    out.channels.reserve(channels.size());
    for (const auto& c : channels) out.channels.push_back(c.template cast<Other>());
    return out;
  }

  bool operator==(const ImageTensor& other) const {
    if (!same_shape(other)) return false;
    for (int c = 0; c < channel_count(); ++c)
      if (!((*this)[c] == other[c]).all()) return false;
    return true;
  }
};

template <typename Scalar>
[[nodiscard]] bool all_finite(const ImageTensor<Scalar>& image) {
  for (const auto& c : image.channels)
    if (!c.isFinite().all()) return false;
  return true;
}

template <typename Scalar>
void validate_depth(const DepthMap<Scalar>& depth) {
  if (depth.size() == 0) throw std::invalid_argument("depth map is empty");
  if (!depth.isFinite().all() || !(depth > Scalar(0)).all())
    throw std::invalid_argument("depth map must be positive and finite");
}

/// Bilinear lookup with coordinates clamped to the raster (edge replication).
template <typename Scalar>
[[nodiscard]] Scalar sample_clamped(const Plane<Scalar>& plane, Scalar x, Scalar y) {
  const auto h = static_cast<int>(plane.rows());
  const auto w = static_cast<int>(plane.cols());
  x = std::clamp(x, Scalar(0), Scalar(w - 1));
  y = std::clamp(y, Scalar(0), Scalar(h - 1));
  const int x0 = std::min(static_cast<int>(std::floor(x)), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(std::floor(y)), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const Scalar wx = x - Scalar(x0);
  const Scalar wy = y - Scalar(y0);
  return (Scalar(1) - wy) * ((Scalar(1) - wx) * plane(y0, x0) + wx * plane(y0, x1)) +
         wy * ((Scalar(1) - wx) * plane(y1, x0) + wx * plane(y1, x1));
}

/// Resamples so that source coordinate x maps to x * (out_w / in_w).
template <typename Scalar>
[[nodiscard]] Plane<Scalar> resize_bilinear(const Plane<Scalar>& plane, int out_h, int out_w) {
  if (out_h == plane.rows() && out_w == plane.cols()) return plane;
  const Scalar sx = Scalar(out_w) / Scalar(plane.cols());
  const Scalar sy = Scalar(out_h) / Scalar(plane.rows());
  Plane<Scalar> out(out_h, out_w);
  for (int v = 0; v < out_h; ++v)
    for (int u = 0; u < out_w; ++u) out(v, u) = sample_clamped(plane, Scalar(u) / sx, Scalar(v) / sy);
  return out;
}

template <typename Scalar>
[[nodiscard]] ImageTensor<Scalar> resize_bilinear(const ImageTensor<Scalar>& image, int out_h, int out_w) {
  ImageTensor<Scalar> out;
  for (const auto& c : image.channels) out.channels.push_back(resize_bilinear(c, out_h, out_w));
  return out;
}

}  // namespace selfvio
