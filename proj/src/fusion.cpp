#include "selfvio/fusion.hpp"

#include <stdexcept>

namespace selfvio {

namespace nn = torch::nn;

SoftFusionImpl::SoftFusionImpl(int visual_dim, int inertial_dim)
    : visual_dim_(visual_dim), inertial_dim_(inertial_dim) {
  if (visual_dim <= 0 || inertial_dim < 0) throw std::invalid_argument("soft fusion: bad feature sizes");
  const int joint = visual_dim + inertial_dim;
  w_v = register_module("w_v", nn::Linear(nn::LinearOptions(joint, visual_dim).bias(false)));
  if (inertial_dim > 0)
    w_i = register_module("w_i", nn::Linear(nn::LinearOptions(joint, inertial_dim).bias(false)));
}

FusionWeights SoftFusionImpl::forward(const torch::Tensor& a_v, const torch::Tensor& a_i) {
  if (a_v.dim() != 2 || a_v.size(1) != visual_dim_)
    throw std::invalid_argument("soft fusion: visual features must be [B," + std::to_string(visual_dim_) + "]");
  FusionWeights out;
  if (inertial_dim_ == 0) {
    out.s_v = torch::sigmoid(w_v->forward(a_v));
    out.fused = a_v * out.s_v;
    return out;
  }
  if (!a_i.defined() || a_i.dim() != 2 || a_i.size(1) != inertial_dim_ || a_i.size(0) != a_v.size(0))
    throw std::invalid_argument("soft fusion: inertial features must be [B," + std::to_string(inertial_dim_) + "]");
  const auto joint = torch::cat({a_v, a_i}, 1);
  out.s_v = torch::sigmoid(w_v->forward(joint));
  out.s_i = torch::sigmoid(w_i->forward(joint));
  out.fused = torch::cat({a_v * out.s_v, a_i * out.s_i}, 1);
  return out;
}

TemporalRegressorImpl::TemporalRegressorImpl(int input_dim, int hidden, int layers, int outputs, double scale)
    : scale_(scale) {
  lstm_ = register_module(
      "lstm", nn::LSTM(nn::LSTMOptions(input_dim, hidden).num_layers(layers).bidirectional(true).batch_first(true)));
  fc_ = register_module("fc", nn::Linear(2 * hidden, outputs));
}

torch::Tensor TemporalRegressorImpl::forward(const torch::Tensor& fused) {
  const auto seq = fused.dim() == 2 ? fused.unsqueeze(1) : fused;
  if (seq.dim() != 3) throw std::invalid_argument("temporal regressor: expected [B,D] or [B,T,D]");
  const auto out = std::get<0>(lstm_->forward(seq));
  return fc_->forward(out.select(1, seq.size(1) - 1)) * scale_;
}

torch::Tensor attention_means(const FusionWeights& w) {
  const auto v = w.s_v.mean(1);
  const auto i = w.s_i.defined() ? w.s_i.mean(1) : torch::zeros_like(v);
  return torch::stack({v, i}, 1);
}

}  // namespace selfvio
