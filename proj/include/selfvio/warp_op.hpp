#pragma once

// Batched differentiable inverse warp for torch tensors, backed by the
// analytic kernels in geometry.hpp.

#include <torch/torch.h>

namespace selfvio {

struct WarpOutput {
  torch::Tensor image;  // [B,C,H,W]
  torch::Tensor valid;  // [B,1,H,W], 1 where the sample landed inside the source; no gradient
};

/// source [B,C,H,W], depth [B,1,H,W] (or [B,H,W]), pose [B,6] = (t, euler) of
/// T_{t->s}, intrinsics [B,4] = (fx, fy, cx, cy). float32 or float64, CPU.
/// Gradients flow to source, depth and pose.
[[nodiscard]] WarpOutput warp_batch(const torch::Tensor& source, const torch::Tensor& depth,
                                    const torch::Tensor& pose, const torch::Tensor& intrinsics);

}  // namespace selfvio
