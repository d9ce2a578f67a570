#pragma once

// Self-adaptive visual-inertial fusion: per-channel sigmoid masks computed
// from both modalities reweight each modality's features; a bidirectional
// LSTM and a linear layer regress the relative poses.

#include <torch/torch.h>

namespace selfvio {

struct FusionWeights {
  torch::Tensor s_v;    // [B, dim(a_v)] in (0,1)
  torch::Tensor s_i;    // [B, dim(a_i)] in (0,1); undefined without inertial input
  torch::Tensor fused;  // [B, dim(a_v) + dim(a_i)]
};

class SoftFusionImpl : public torch::nn::Module {
 public:
  /// `inertial_dim` = 0 builds the vision-only variant.
  SoftFusionImpl(int visual_dim, int inertial_dim);
  FusionWeights forward(const torch::Tensor& a_v, const torch::Tensor& a_i = {});

  torch::nn::Linear w_v{nullptr}, w_i{nullptr};
  [[nodiscard]] int visual_dim() const { return visual_dim_; }
  [[nodiscard]] int inertial_dim() const { return inertial_dim_; }

 private:
  int visual_dim_, inertial_dim_;
};
TORCH_MODULE(SoftFusion);

class TemporalRegressorImpl : public torch::nn::Module {
 public:
  TemporalRegressorImpl(int input_dim, int hidden, int layers, int outputs, double scale);
  /// [B, D] (a length-1 sequence) or [B, T, D]; returns [B, outputs] for the last step.
  /// The recurrent state starts at zero for every call.
  torch::Tensor forward(const torch::Tensor& fused);

 private:
  double scale_;
  torch::nn::LSTM lstm_{nullptr};
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(TemporalRegressor);

/// Per-snippet mean mask activation: [B, 2] with columns (mean s_v, mean s_i).
/// The inertial column is 0 when there is no inertial input.
[[nodiscard]] torch::Tensor attention_means(const FusionWeights& w);

}  // namespace selfvio
