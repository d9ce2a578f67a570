#include "selfvio/warp_op.hpp"

#include "selfvio/geometry.hpp"

#include <stdexcept>

namespace selfvio {

namespace {

using torch::autograd::AutogradContext;
using torch::autograd::variable_list;

template <typename Scalar>
ImageTensor<Scalar> to_image(const torch::Tensor& t) {  // t: [C,H,W] contiguous
  const int c = static_cast<int>(t.size(0)), h = static_cast<int>(t.size(1)), w = static_cast<int>(t.size(2));
  ImageTensor<Scalar> img(c, h, w);
  const Scalar* p = t.data_ptr<Scalar>();
  for (int k = 0; k < c; ++k)
    img[k] = Eigen::Map<const Plane<Scalar>>(p + static_cast<std::ptrdiff_t>(k) * h * w, h, w);
  return img;
}

template <typename Scalar>
void from_image(const ImageTensor<Scalar>& img, torch::Tensor t) {  // t: [C,H,W] contiguous
  Scalar* p = t.data_ptr<Scalar>();
  const int h = img.height(), w = img.width();
  for (int k = 0; k < img.channel_count(); ++k)
    Eigen::Map<Plane<Scalar>>(p + static_cast<std::ptrdiff_t>(k) * h * w, h, w) = img[k];
}

template <typename Scalar>
CameraIntrinsics<Scalar> camera(const torch::Tensor& k, int b, int h, int w) {
  const Scalar* p = k.data_ptr<Scalar>() + 4 * b;
  CameraIntrinsics<Scalar> cam;
  cam.fx = p[0];
  cam.fy = p[1];
  cam.cx = p[2];
  cam.cy = p[3];
  cam.width = w;
  cam.height = h;
  return cam;
}

template <typename Scalar>
Pose6DoF<Scalar> pose_of(const torch::Tensor& pose, int b) {
  return Pose6DoF<Scalar>::from_vector(Eigen::Map<const Vector6<Scalar>>(pose.data_ptr<Scalar>() + 6 * b));
}

template <typename Scalar>
void forward_impl(const torch::Tensor& source, const torch::Tensor& depth, const torch::Tensor& pose,
                  const torch::Tensor& k, torch::Tensor& image, torch::Tensor& valid) {
  const int n = static_cast<int>(source.size(0)), h = static_cast<int>(source.size(2)),
            w = static_cast<int>(source.size(3));
  for (int b = 0; b < n; ++b) {
    const auto d = Eigen::Map<const Plane<Scalar>>(depth.data_ptr<Scalar>() + static_cast<std::ptrdiff_t>(b) * h * w, h, w);
    const auto r = inverse_warp(to_image<Scalar>(source[b]), DepthMap<Scalar>(d), pose_of<Scalar>(pose, b),
                                camera<Scalar>(k, b, h, w));
    from_image(r.image, image[b]);
    Eigen::Map<Plane<Scalar>>(valid.data_ptr<Scalar>() + static_cast<std::ptrdiff_t>(b) * h * w, h, w) =
        r.valid.template cast<Scalar>();
  }
}

template <typename Scalar>
void backward_impl(const torch::Tensor& source, const torch::Tensor& depth, const torch::Tensor& pose,
                   const torch::Tensor& k, const torch::Tensor& grad, torch::Tensor& g_source,
                   torch::Tensor& g_depth, torch::Tensor& g_pose) {
  const int n = static_cast<int>(source.size(0)), h = static_cast<int>(source.size(2)),
            w = static_cast<int>(source.size(3));
  for (int b = 0; b < n; ++b) {
    const auto d = Eigen::Map<const Plane<Scalar>>(depth.data_ptr<Scalar>() + static_cast<std::ptrdiff_t>(b) * h * w, h, w);
    const auto g = inverse_warp_backward(to_image<Scalar>(source[b]), DepthMap<Scalar>(d), pose_of<Scalar>(pose, b),
                                         camera<Scalar>(k, b, h, w), to_image<Scalar>(grad[b]));
    from_image(g.source, g_source[b]);
    Eigen::Map<Plane<Scalar>>(g_depth.data_ptr<Scalar>() + static_cast<std::ptrdiff_t>(b) * h * w, h, w) = g.depth;
    Eigen::Map<Vector6<Scalar>>(g_pose.data_ptr<Scalar>() + 6 * b) = g.pose;
  }
}

struct InverseWarpFunction : public torch::autograd::Function<InverseWarpFunction> {
  static variable_list forward(AutogradContext* ctx, torch::Tensor source, torch::Tensor depth,
                               torch::Tensor pose, torch::Tensor intrinsics) {
    source = source.contiguous();
    depth = depth.contiguous();
    pose = pose.contiguous();
    intrinsics = intrinsics.contiguous();
    auto image = torch::empty_like(source);
    auto valid = torch::empty({source.size(0), 1, source.size(2), source.size(3)}, source.options());
    if (source.scalar_type() == torch::kDouble)
      forward_impl<double>(source, depth, pose, intrinsics, image, valid);
    else
      forward_impl<float>(source, depth, pose, intrinsics, image, valid);
    ctx->save_for_backward({source, depth, pose, intrinsics});
    ctx->mark_non_differentiable({valid});
    return {image, valid};
  }

  static variable_list backward(AutogradContext* ctx, variable_list grads) {
    const auto saved = ctx->get_saved_variables();
    const auto& source = saved[0];
    const auto& depth = saved[1];
    const auto& pose = saved[2];
    const auto& k = saved[3];
    const auto grad = grads[0].defined() ? grads[0].contiguous() : torch::zeros_like(source);
    auto g_source = torch::empty_like(source);
    auto g_depth = torch::empty_like(depth);
    auto g_pose = torch::empty_like(pose);
    if (source.scalar_type() == torch::kDouble)
      backward_impl<double>(source, depth, pose, k, grad, g_source, g_depth, g_pose);
    else
      backward_impl<float>(source, depth, pose, k, grad, g_source, g_depth, g_pose);
    return {g_source, g_depth, g_pose, torch::Tensor()};
  }
};

}  // namespace

WarpOutput warp_batch(const torch::Tensor& source, const torch::Tensor& depth, const torch::Tensor& pose,
                      const torch::Tensor& intrinsics) {
  if (source.dim() != 4) throw std::invalid_argument("warp: source must be [B,C,H,W]");
  const auto b = source.size(0), h = source.size(2), w = source.size(3);
  const auto d = depth.dim() == 3 ? depth.unsqueeze(1) : depth;
  if (d.dim() != 4 || d.size(0) != b || d.size(1) != 1 || d.size(2) != h || d.size(3) != w)
    throw std::invalid_argument("warp: depth must be [B,1,H,W] matching the source");
  if (pose.dim() != 2 || pose.size(0) != b || pose.size(1) != 6)
    throw std::invalid_argument("warp: pose must be [B,6]");
  if (intrinsics.dim() != 2 || intrinsics.size(0) != b || intrinsics.size(1) != 4)
    throw std::invalid_argument("warp: intrinsics must be [B,4]");
  const auto type = source.scalar_type();
  if (type != torch::kFloat && type != torch::kDouble) throw std::invalid_argument("warp: float or double only");
  if (d.scalar_type() != type || pose.scalar_type() != type || intrinsics.scalar_type() != type)
    throw std::invalid_argument("warp: all inputs must share one dtype");
  if (!source.device().is_cpu()) throw std::invalid_argument("warp: CPU tensors only");
  auto out = InverseWarpFunction::apply(source, d, pose, intrinsics.detach());
  return {out[0], out[1]};
}

}  // namespace selfvio
