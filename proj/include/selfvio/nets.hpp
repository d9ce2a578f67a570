#pragma once

// The learnable sub-networks: encoder E, depth generator G (U-Net decoder),
// visual odometry feature extractor, inertial encoders and the PatchGAN
// discriminator D. All tensors are NCHW.

#include "selfvio/config.hpp"

#include <torch/torch.h>

#include <array>
#include <string>
#include <vector>

namespace selfvio {

enum class ImuMode { Conv, Lstm, None };

[[nodiscard]] std::string to_string(ImuMode m);
[[nodiscard]] ImuMode parse_imu_mode(const std::string& s);

struct NetConfig {
  int height = 256;
  int width = 832;
  int views = 3;             // target plus two sources
  int encoder_base = 32;     // encoder widths: base * (1, 2, 4, 8, 16, 16, 16)
  int vo_base = 16;          // VO widths: base * (1, 2, 4, 8, 16), branches base * 16
  double dropout = 0.25;
  int disc_base = 64;
  int disc_layers = 3;       // stride-2 layers of D; 3 gives the 70 px PatchGAN
  int imu_rows = 20;
  std::array<int, 4> imu_filters{64, 128, 256, 512};
  int fusion_hidden = 128;   // temporal LSTM width per direction
  int fusion_layers = 2;
  ImuMode imu_mode = ImuMode::Conv;
  double pose_scale = 0.01;  // raw regressor outputs are multiplied by this
  double disp_a = 10.0;      // depth = 1 / (a * sigmoid(x) + b)
  double disp_b = 0.01;

  /// Throws ConfigError on non-positive sizes or views < 2.
  void validate() const;
  [[nodiscard]] int pose_outputs() const { return 6 * (views - 1); }
  [[nodiscard]] std::vector<int> encoder_widths() const;

  void write(KeyValueConfig& cfg) const;  // keys under "net."
  [[nodiscard]] static NetConfig from_config(const KeyValueConfig& cfg);
  [[nodiscard]] std::string to_text() const;
};

/// Output length of a strided convolution along one axis.
[[nodiscard]] constexpr int conv_out(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

/// Receptive field (pixels) of a chain of (kernel, stride) layers.
[[nodiscard]] int receptive_field(const std::vector<std::array<int, 2>>& kernel_stride);

struct EncoderOutput {
  torch::Tensor code;                // bottleneck z
  std::vector<torch::Tensor> skips;  // activations of stages 1 .. n-1, finest first
};

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const NetConfig& cfg);
  /// [B,3,H,W] in [-1,1] -> code and skips.
  EncoderOutput forward(const torch::Tensor& image);
  [[nodiscard]] const std::vector<int>& widths() const { return widths_; }

 private:
  std::vector<int> widths_;
  torch::nn::ModuleList stages_{nullptr};
};
TORCH_MODULE(Encoder);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const NetConfig& cfg);
  /// Depth [B,1,H,W] at `out_size` (H, W). Throws std::invalid_argument if
  /// the skips do not match the encoder this generator was built for.
  torch::Tensor forward(const EncoderOutput& enc, std::array<int64_t, 2> out_size);
  [[nodiscard]] double min_depth() const { return 1.0 / (a_ + b_); }
  [[nodiscard]] double max_depth() const { return 1.0 / b_; }
  [[nodiscard]] double disp_a() const { return a_; }
  [[nodiscard]] double disp_b() const { return b_; }

 private:
  std::vector<int> widths_;
  double a_, b_;
  torch::nn::ModuleList up_{nullptr};
  torch::nn::ModuleList fuse_{nullptr};
  torch::nn::Conv2d head_{nullptr};
};
TORCH_MODULE(Generator);

struct VisualFeatures {
  torch::Tensor translation;  // [B, C]
  torch::Tensor rotation;     // [B, C]
  [[nodiscard]] torch::Tensor joined() const { return torch::cat({translation, rotation}, 1); }
};

class VoNetImpl : public torch::nn::Module {
 public:
  explicit VoNetImpl(const NetConfig& cfg);
  /// [B, 3*views, H, W] (target, source t-1, source t+1 on channels).
  VisualFeatures forward(const torch::Tensor& stacked);
  [[nodiscard]] int feature_dim() const { return 2 * branch_width_; }
  /// Spatial size of the branch feature maps before pooling, from the last call.
  std::array<int64_t, 2> last_spatial{0, 0};

 private:
  int in_channels_;
  int branch_width_;
  double dropout_;
  torch::nn::ModuleList shared_{nullptr}, trans_{nullptr}, rot_{nullptr};
};
TORCH_MODULE(VoNet);

/// One inertial stream [B,1,n,3] -> [B,3,2,1] through the strided conv stack.
class ImuBranchImpl : public torch::nn::Module {
 public:
  ImuBranchImpl(const NetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& stream);
  /// Intermediate shapes of the last forward pass, for inspection.
  std::vector<std::vector<int64_t>> last_shapes;

 private:
  int rows_;
  torch::nn::ModuleList layers_{nullptr};
  torch::nn::Conv2d project_{nullptr};
};
TORCH_MODULE(ImuBranch);

/// Interface shared by the conv and LSTM inertial encoders: [B,n,6] -> [B,12].
class ImuEncoderImpl : public torch::nn::Module {
 public:
  virtual torch::Tensor forward(const torch::Tensor& window) = 0;
  [[nodiscard]] static constexpr int feature_dim() { return 12; }
};

class ImuConvNetImpl : public ImuEncoderImpl {
 public:
  explicit ImuConvNetImpl(const NetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& window) override;
  ImuBranch accel{nullptr}, gyro{nullptr};

 private:
  int rows_;
};

class ImuLstmNetImpl : public ImuEncoderImpl {
 public:
  explicit ImuLstmNetImpl(const NetConfig& cfg);
  torch::Tensor forward(const torch::Tensor& window) override;

 private:
  int rows_;
  torch::nn::LSTM lstm_{nullptr};  // 6 units per direction, so it also yields 12 features
};

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const NetConfig& cfg);
  /// [B,3,H,W] -> patch logits [B,1,h,w].
  torch::Tensor forward(const torch::Tensor& image);
  [[nodiscard]] std::vector<std::array<int, 2>> layer_geometry() const;  // (kernel, stride)
  [[nodiscard]] std::array<int64_t, 2> output_size(int64_t h, int64_t w) const;

 private:
  torch::nn::Sequential net_{nullptr};
  int layers_;
};
TORCH_MODULE(Discriminator);

/// Number of scalar parameters in a module.
[[nodiscard]] int64_t parameter_count(const torch::nn::Module& m);

}  // namespace selfvio
