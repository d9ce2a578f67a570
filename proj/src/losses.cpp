#include "selfvio/losses.hpp"

#include "selfvio/config.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace selfvio {

void LossConfig::validate() const {
  if (adversarial && !(beta > 0.0 && std::isfinite(beta))) throw ConfigError("loss: beta must be positive and finite");
}

PhotometricLoss photometric_loss(const torch::Tensor& target, const std::vector<torch::Tensor>& warped,
                                 const std::vector<torch::Tensor>& masks) {
  if (warped.empty() || warped.size() != masks.size())
    throw std::invalid_argument("photometric loss: need one mask per warped source");
  if (target.dim() != 4) throw std::invalid_argument("photometric loss: target must be [B,C,H,W]");
  const auto channels = target.size(1);
  torch::Tensor total = torch::zeros({}, target.options());
  torch::Tensor count = torch::zeros({}, target.options());
  for (std::size_t i = 0; i < warped.size(); ++i) {
    if (!warped[i].sizes().equals(target.sizes()))
      throw std::invalid_argument("photometric loss: warped source shape differs from target");
    const auto& m = masks[i];
    if (m.dim() != 4 || m.size(0) != target.size(0) || m.size(1) != 1 || m.size(2) != target.size(2) ||
        m.size(3) != target.size(3))
      throw std::invalid_argument("photometric loss: mask must be [B,1,H,W]");
    const auto mask = m.to(target.scalar_type()).detach();
    total = total + ((target - warped[i]).abs() * mask).sum();
    count = count + mask.sum();
  }
  PhotometricLoss out;
  out.valid_pixels = static_cast<int64_t>(std::llround(count.item<double>()));
  if (out.valid_pixels == 0) {
    out.empty = true;
    // Keep the graph connected so backward() still works; the value is exactly 0.
    out.value = total * 0.0;
    return out;
  }
  out.value = total / (count * static_cast<double>(channels));
  return out;
}

torch::Tensor generator_adversarial_loss(const torch::Tensor& fake_logits) {
  return torch::softplus(-fake_logits.clamp(-kLogitClamp, kLogitClamp)).mean();
}

torch::Tensor discriminator_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return torch::softplus(-real_logits.clamp(-kLogitClamp, kLogitClamp)).mean() +
         torch::softplus(fake_logits.clamp(-kLogitClamp, kLogitClamp)).mean();
}

AdversarialLosses adversarial_losses(const torch::Tensor& real_logits, const torch::Tensor& fake_logits) {
  return {generator_adversarial_loss(fake_logits), discriminator_loss(real_logits, fake_logits)};
}

torch::Tensor total_loss(const torch::Tensor& l_g, const torch::Tensor& l_d_gen, const LossConfig& cfg) {
  cfg.validate();
  if (!cfg.adversarial) return l_g;
  return l_g + cfg.beta * l_d_gen;
}

double calibrate_beta(const std::vector<double>& l_g, const std::vector<double>& l_d) {
  if (l_g.size() != l_d.size()) throw ConfigError("calibrate_beta: histories differ in length");
  if (l_g.size() < kMinBetaHistory)
    throw ConfigError("calibrate_beta: need at least " + std::to_string(kMinBetaHistory) + " warmup batches, got " +
                      std::to_string(l_g.size()));
  const double n = static_cast<double>(l_g.size());
  const double mg = std::accumulate(l_g.begin(), l_g.end(), 0.0) / n;
  const double md = std::accumulate(l_d.begin(), l_d.end(), 0.0) / n;
  if (md == 0.0 || !std::isfinite(md) || !std::isfinite(mg))
    throw ConfigError("calibrate_beta: mean adversarial loss is zero or non-finite");
  const double beta = mg / md;
  if (!(beta > 0.0)) throw ConfigError("calibrate_beta: resulting beta is not positive");
  return beta;
}

}  // namespace selfvio
