#pragma once

// Self-supervision objective: masked L1 view synthesis, non-saturating
// adversarial losses over PatchGAN logits, and the balanced total.

#include <torch/torch.h>

#include <vector>

namespace selfvio {

struct LossConfig {
  double beta = 1.0;       // must be > 0 when the adversarial term is on
  bool adversarial = true; // false gives the view-synthesis-only ablation
  bool use_mask = true;    // restrict L_g to pixels whose samples landed inside the source

  void validate() const;
};

struct PhotometricLoss {
  torch::Tensor value;      // scalar
  int64_t valid_pixels = 0; // summed over sources and batch
  bool empty = false;       // set when no pixel was valid; value is then 0
};

/// Mean |target - warped| over channels and over the valid pixels of all
/// sources. masks[i] is [B,1,H,W] with 1 for valid pixels.
[[nodiscard]] PhotometricLoss photometric_loss(const torch::Tensor& target,
                                               const std::vector<torch::Tensor>& warped,
                                               const std::vector<torch::Tensor>& masks);

/// Logits are clamped to +-kLogitClamp before the log-sigmoid.
inline constexpr double kLogitClamp = 50.0;

struct AdversarialLosses {
  torch::Tensor generator;      // -E[log D(fake)]
  torch::Tensor discriminator;  // -E[log D(real)] - E[log(1 - D(fake))]
};

[[nodiscard]] torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits);
[[nodiscard]] torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);
[[nodiscard]] AdversarialLosses adversarial_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits);

/// L_g + beta * L_d_gen, or L_g alone when the adversarial term is disabled.
[[nodiscard]] torch::Tensor total_loss(const torch::Tensor& l_g, const torch::Tensor& l_d_gen, const LossConfig& cfg);

inline constexpr std::size_t kMinBetaHistory = 100;

/// mean(l_g) / mean(l_d) over the warmup history. Throws ConfigError on fewer
/// than kMinBetaHistory entries, mismatched lengths or a zero L_d mean.
[[nodiscard]] double calibrate_beta(const std::vector<double>& l_g, const std::vector<double>& l_d);

}  // namespace selfvio
