#include "selfvio/nets.hpp"

#include <charconv>
#include <stdexcept>

namespace selfvio {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nn::Sequential conv_bn_relu(int in, int out, int kernel, int stride) {
  return nn::Sequential(
      nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(kernel / 2).bias(false)),
      nn::BatchNorm2d(out), nn::ReLU());
}

std::string shape_str(const torch::Tensor& t) {
  std::string s = "[";
  for (int64_t i = 0; i < t.dim(); ++i) s += (i ? "," : "") + std::to_string(t.size(i));
  return s + "]";
}

void require_4d(const torch::Tensor& t, int64_t channels, const char* who) {
  if (t.dim() != 4 || t.size(1) != channels)
    throw std::invalid_argument(std::string(who) + ": expected [B," + std::to_string(channels) +
                                ",H,W], got " + shape_str(t));
}

}  // namespace

std::string to_string(ImuMode m) {
  switch (m) {
    case ImuMode::Conv: return "conv";
    case ImuMode::Lstm: return "lstm";
    case ImuMode::None: return "none";
  }
  return "conv";
}

ImuMode parse_imu_mode(const std::string& s) {
  if (s == "conv") return ImuMode::Conv;
  if (s == "lstm") return ImuMode::Lstm;
  if (s == "none") return ImuMode::None;
  throw ConfigError("unknown imu mode '" + s + "' (expected conv, lstm or none)");
}

void NetConfig::validate() const {
  if (views < 2) throw ConfigError("net: views must be >= 2");
  if (height <= 0 || width <= 0) throw ConfigError("net: input size must be positive");
  if (encoder_base <= 0 || vo_base <= 0 || disc_base <= 0 || fusion_hidden <= 0 || fusion_layers <= 0)
    throw ConfigError("net: widths must be positive");
  if (disc_layers < 1) throw ConfigError("net: disc_layers must be >= 1");
  if (imu_rows < 8) throw ConfigError("net: imu_rows must be >= 8 for the strided inertial stack");
  for (int f : imu_filters)
    if (f <= 0) throw ConfigError("net: imu filters must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("net: dropout must lie in [0, 1)");
  if (!(pose_scale > 0.0)) throw ConfigError("net: pose_scale must be positive");
  if (!(disp_a > 0.0) || !(disp_b > 0.0)) throw ConfigError("net: disparity constants must be positive");
}

std::vector<int> NetConfig::encoder_widths() const {
  std::vector<int> w;
  for (int m : {1, 2, 4, 8, 16, 16, 16}) w.push_back(encoder_base * m);
  return w;
}

void NetConfig::write(KeyValueConfig& cfg) const {
  cfg.set("net.height", std::to_string(height));
  cfg.set("net.width", std::to_string(width));
  cfg.set("net.views", std::to_string(views));
  cfg.set("net.encoder_base", std::to_string(encoder_base));
  cfg.set("net.vo_base", std::to_string(vo_base));
  cfg.set("net.dropout", num(dropout));
  cfg.set("net.disc_base", std::to_string(disc_base));
  cfg.set("net.disc_layers", std::to_string(disc_layers));
  cfg.set("net.imu_rows", std::to_string(imu_rows));
  cfg.set("net.imu_filters", std::to_string(imu_filters[0]) + "," + std::to_string(imu_filters[1]) + "," +
                                 std::to_string(imu_filters[2]) + "," + std::to_string(imu_filters[3]));
  cfg.set("net.fusion_hidden", std::to_string(fusion_hidden));
  cfg.set("net.fusion_layers", std::to_string(fusion_layers));
  cfg.set("net.imu_mode", to_string(imu_mode));
  cfg.set("net.pose_scale", num(pose_scale));
  cfg.set("net.disp_a", num(disp_a));
  cfg.set("net.disp_b", num(disp_b));
}

NetConfig NetConfig::from_config(const KeyValueConfig& cfg) {
  NetConfig n;
  n.height = static_cast<int>(cfg.get_int("net.height", n.height));
  n.width = static_cast<int>(cfg.get_int("net.width", n.width));
  n.views = static_cast<int>(cfg.get_int("net.views", n.views));
  n.encoder_base = static_cast<int>(cfg.get_int("net.encoder_base", n.encoder_base));
  n.vo_base = static_cast<int>(cfg.get_int("net.vo_base", n.vo_base));
  n.dropout = cfg.get_double("net.dropout", n.dropout);
  n.disc_base = static_cast<int>(cfg.get_int("net.disc_base", n.disc_base));
  n.disc_layers = static_cast<int>(cfg.get_int("net.disc_layers", n.disc_layers));
  n.imu_rows = static_cast<int>(cfg.get_int("net.imu_rows", n.imu_rows));
  if (cfg.contains("net.imu_filters")) {
    const auto f = cfg.get_doubles("net.imu_filters", {});
    if (f.size() != 4) throw ConfigError("net.imu_filters needs 4 entries");
    for (int i = 0; i < 4; ++i) n.imu_filters[static_cast<std::size_t>(i)] = static_cast<int>(f[static_cast<std::size_t>(i)]);
  }
  n.fusion_hidden = static_cast<int>(cfg.get_int("net.fusion_hidden", n.fusion_hidden));
  n.fusion_layers = static_cast<int>(cfg.get_int("net.fusion_layers", n.fusion_layers));
  n.imu_mode = parse_imu_mode(cfg.get_string("net.imu_mode", to_string(n.imu_mode)));
  n.pose_scale = cfg.get_double("net.pose_scale", n.pose_scale);
  n.disp_a = cfg.get_double("net.disp_a", n.disp_a);
  n.disp_b = cfg.get_double("net.disp_b", n.disp_b);
  n.validate();
  return n;
}

std::string NetConfig::to_text() const {
  KeyValueConfig cfg;
  write(cfg);
  return cfg.to_text();
}

int receptive_field(const std::vector<std::array<int, 2>>& kernel_stride) {
  int rf = 1, jump = 1;
  for (const auto& [k, s] : kernel_stride) {
    rf += (k - 1) * jump;
    jump *= s;
  }
  return rf;
}

int64_t parameter_count(const nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

// ---------------------------------------------------------------------------

EncoderImpl::EncoderImpl(const NetConfig& cfg) : widths_(cfg.encoder_widths()) {
  stages_ = register_module("stages", nn::ModuleList());
  int in = 3;
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    stages_->push_back(conv_bn_relu(in, widths_[i], i == 0 ? 7 : 3, 2));
    in = widths_[i];
  }
}

EncoderOutput EncoderImpl::forward(const torch::Tensor& image) {
  require_4d(image, 3, "encoder");
  EncoderOutput out;
  torch::Tensor x = image;
  for (std::size_t i = 0; i < stages_->size(); ++i) {
    x = stages_[i]->as<nn::Sequential>()->forward(x);
    if (i + 1 < stages_->size()) out.skips.push_back(x);
  }
  out.code = x;
  return out;
}

// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(const NetConfig& cfg)
    : widths_(cfg.encoder_widths()), a_(cfg.disp_a), b_(cfg.disp_b) {
  up_ = register_module("up", nn::ModuleList());
  fuse_ = register_module("fuse", nn::ModuleList());
  const int n = static_cast<int>(widths_.size());
  // Stage k lifts level n-1-k to level n-2-k and merges the mirrored skip.
  for (int level = n - 1; level >= 1; --level) {
    const int in = widths_[static_cast<std::size_t>(level)];
    const int out = widths_[static_cast<std::size_t>(level - 1)];
    up_->push_back(nn::Sequential(
        nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1).bias(false)),
        nn::BatchNorm2d(out), nn::ReLU()));
    fuse_->push_back(conv_bn_relu(2 * out, out, 3, 1));
  }
  const int last = std::max(widths_[0] / 2, 1);
  up_->push_back(nn::Sequential(
      nn::ConvTranspose2d(nn::ConvTranspose2dOptions(widths_[0], last, 3).stride(2).padding(1).output_padding(1).bias(false)),
      nn::BatchNorm2d(last), nn::ReLU()));
  head_ = register_module("head", nn::Conv2d(nn::Conv2dOptions(last, 1, 3).padding(1)));
}

torch::Tensor GeneratorImpl::forward(const EncoderOutput& enc, std::array<int64_t, 2> out_size) {
  const std::size_t n = widths_.size();
  if (enc.skips.size() != n - 1)
    throw std::invalid_argument("generator: expected " + std::to_string(n - 1) + " skips, got " +
                                std::to_string(enc.skips.size()));
  require_4d(enc.code, widths_[n - 1], "generator code");
  // Every level must be the stride-2 reduction of the one above it.
  int64_t h = out_size[0], w = out_size[1];
  for (std::size_t i = 0; i < n; ++i) {
    const torch::Tensor& t = i + 1 < n ? enc.skips[i] : enc.code;
    require_4d(t, widths_[i], "generator skip");
    h = conv_out(static_cast<int>(h), 3, 2, 1);
    w = conv_out(static_cast<int>(w), 3, 2, 1);
    if (t.size(2) != h || t.size(3) != w || t.size(0) != enc.code.size(0))
      throw std::invalid_argument("generator: skip " + std::to_string(i) + " has shape " + shape_str(t) +
                                  ", which does not match the encoder geometry");
  }

  torch::Tensor x = enc.code;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const torch::Tensor& skip = enc.skips[n - 2 - k];
    x = up_[k]->as<nn::Sequential>()->forward(x);
    x = x.narrow(2, 0, skip.size(2)).narrow(3, 0, skip.size(3));
    x = fuse_[k]->as<nn::Sequential>()->forward(torch::cat({x, skip}, 1));
  }
  x = up_[n - 1]->as<nn::Sequential>()->forward(x);
  x = x.narrow(2, 0, out_size[0]).narrow(3, 0, out_size[1]);
  const torch::Tensor logits = head_->forward(x);
  return 1.0 / (a_ * torch::sigmoid(logits) + b_);
}

// ---------------------------------------------------------------------------

VoNetImpl::VoNetImpl(const NetConfig& cfg)
    : in_channels_(3 * cfg.views), branch_width_(16 * cfg.vo_base), dropout_(cfg.dropout) {
  shared_ = register_module("shared", nn::ModuleList());
  trans_ = register_module("trans", nn::ModuleList());
  rot_ = register_module("rot", nn::ModuleList());
  const int kernels[5] = {7, 5, 3, 3, 3};
  const int mult[5] = {1, 2, 4, 8, 16};
  int in = in_channels_;
  for (int i = 0; i < 5; ++i) {
    shared_->push_back(conv_bn_relu(in, cfg.vo_base * mult[i], kernels[i], 2));
    in = cfg.vo_base * mult[i];
  }
  for (int i = 0; i < 2; ++i) {
    trans_->push_back(conv_bn_relu(i ? branch_width_ : in, branch_width_, 3, 2));
    rot_->push_back(conv_bn_relu(i ? branch_width_ : in, branch_width_, 3, 2));
  }
}

VisualFeatures VoNetImpl::forward(const torch::Tensor& stacked) {
  require_4d(stacked, in_channels_, "vo");
  torch::Tensor x = stacked;
  for (const auto& m : *shared_) x = m->as<nn::Sequential>()->forward(x);
  x = F::dropout(x, F::DropoutFuncOptions().p(dropout_).training(is_training()));
  auto branch = [&](nn::ModuleList& layers) {
    torch::Tensor y = layers[0]->as<nn::Sequential>()->forward(x);
    y = F::dropout(y, F::DropoutFuncOptions().p(dropout_).training(is_training()));
    y = layers[1]->as<nn::Sequential>()->forward(y);
    last_spatial = {y.size(2), y.size(3)};
    return y.mean({2, 3});
  };
  return {branch(trans_), branch(rot_)};
}

// ---------------------------------------------------------------------------

ImuBranchImpl::ImuBranchImpl(const NetConfig& cfg) : rows_(cfg.imu_rows) {
  layers_ = register_module("layers", nn::ModuleList());
  const auto& f = cfg.imu_filters;
  auto block = [](int in, int out, std::array<int64_t, 2> k, std::array<int64_t, 2> s, std::array<int64_t, 2> p) {
    return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, {k[0], k[1]}).stride({s[0], s[1]}).padding({p[0], p[1]}).bias(false)),
                          nn::BatchNorm2d(out), nn::ReLU());
  };
  // Input [B,1,n,3]: time along H, sensor axis along W. The first layer
  // spans the three axes; the rest run along time with the axis kept at 1.
  layers_->push_back(block(1, f[0], {5, 3}, {1, 1}, {2, 0}));
  layers_->push_back(block(f[0], f[0], {5, 3}, {1, 1}, {2, 1}));
  layers_->push_back(block(f[0], f[1], {5, 3}, {2, 1}, {2, 1}));
  layers_->push_back(block(f[1], f[2], {5, 3}, {2, 1}, {2, 1}));
  layers_->push_back(block(f[2], f[3], {2, 3}, {2, 1}, {0, 1}));
  project_ = register_module("project", nn::Conv2d(nn::Conv2dOptions(f[3], 3, 1)));
}

torch::Tensor ImuBranchImpl::forward(const torch::Tensor& stream) {
  if (stream.dim() != 4 || stream.size(1) != 1 || stream.size(2) != rows_ || stream.size(3) != 3)
    throw std::invalid_argument("imu branch: expected [B,1," + std::to_string(rows_) + ",3], got " +
                                shape_str(stream));
  last_shapes.clear();
  torch::Tensor x = stream;
  for (const auto& m : *layers_) {
    x = m->as<nn::Sequential>()->forward(x);
    last_shapes.push_back(x.sizes().vec());
  }
  x = project_->forward(x);
  last_shapes.push_back(x.sizes().vec());
  return x;
}

ImuConvNetImpl::ImuConvNetImpl(const NetConfig& cfg) : rows_(cfg.imu_rows) {
  accel = register_module("accel", ImuBranch(cfg));
  gyro = register_module("gyro", ImuBranch(cfg));
}

torch::Tensor ImuConvNetImpl::forward(const torch::Tensor& window) {
  if (window.dim() != 3 || window.size(1) != rows_ || window.size(2) != 6)
    throw std::invalid_argument("imu: expected [B," + std::to_string(rows_) + ",6], got " + shape_str(window));
  const auto acc = window.narrow(2, 0, 3).unsqueeze(1);
  const auto gyr = window.narrow(2, 3, 3).unsqueeze(1);
  // [B,3,T,1] -> [B,T,3] per branch, i.e. a T x 3 block.
  auto flat = [](const torch::Tensor& t) { return t.squeeze(3).transpose(1, 2).flatten(1); };
  return torch::cat({flat(accel->forward(acc)), flat(gyro->forward(gyr))}, 1);
}

ImuLstmNetImpl::ImuLstmNetImpl(const NetConfig& cfg) : rows_(cfg.imu_rows) {
  lstm_ = register_module("lstm", nn::LSTM(nn::LSTMOptions(6, 6).bidirectional(true).batch_first(true)));
}

torch::Tensor ImuLstmNetImpl::forward(const torch::Tensor& window) {
  if (window.dim() != 3 || window.size(1) != rows_ || window.size(2) != 6)
    throw std::invalid_argument("imu: expected [B," + std::to_string(rows_) + ",6], got " + shape_str(window));
  const auto out = std::get<0>(lstm_->forward(window));  // [B,n,12]
  const auto fwd = out.select(1, rows_ - 1).narrow(1, 0, 6);
  const auto bwd = out.select(1, 0).narrow(1, 6, 6);
  return torch::cat({fwd, bwd}, 1);
}

// ---------------------------------------------------------------------------

DiscriminatorImpl::DiscriminatorImpl(const NetConfig& cfg) : layers_(cfg.disc_layers) {
  net_ = nn::Sequential();
  const auto lrelu = [] { return nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)); };
  int in = 3, out = cfg.disc_base;
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(3, out, 4).stride(2).padding(1)));
  net_->push_back(lrelu());
  for (int i = 1; i <= layers_; ++i) {
    in = out;
    out = cfg.disc_base * std::min(1 << i, 8);
    net_->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(i < layers_ ? 2 : 1).padding(1).bias(false)));
    net_->push_back(nn::BatchNorm2d(out));
    net_->push_back(lrelu());
  }
  net_->push_back(nn::Conv2d(nn::Conv2dOptions(out, 1, 4).stride(1).padding(1)));
  net_ = register_module("net", net_);
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& image) {
  require_4d(image, 3, "discriminator");
  return net_->forward(image);
}

std::vector<std::array<int, 2>> DiscriminatorImpl::layer_geometry() const {
  std::vector<std::array<int, 2>> g;
  for (int i = 0; i < layers_; ++i) g.push_back({4, 2});
  g.push_back({4, 1});
  g.push_back({4, 1});
  return g;
}

std::array<int64_t, 2> DiscriminatorImpl::output_size(int64_t h, int64_t w) const {
  for (const auto& [k, s] : layer_geometry()) {
    h = conv_out(static_cast<int>(h), k, s, 1);
    w = conv_out(static_cast<int>(w), k, s, 1);
  }
  return {h, w};
}

}  // namespace selfvio
