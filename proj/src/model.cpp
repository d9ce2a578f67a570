#include "selfvio/model.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace selfvio {

namespace {

void copy_image(const ImageTensor<float>& img, torch::Tensor dst) {  // dst [3,H,W] contiguous float
  float* p = dst.data_ptr<float>();
  const int h = img.height(), w = img.width();
  for (int c = 0; c < img.channel_count(); ++c)
    Eigen::Map<Plane<float>>(p + static_cast<std::ptrdiff_t>(c) * h * w, h, w) = img[c];
}

void append(std::vector<torch::Tensor>& out, const std::vector<torch::Tensor>& more) {
  out.insert(out.end(), more.begin(), more.end());
}

}  // namespace

Batch Batch::to(torch::ScalarType type) const {
  Batch b = *this;
  b.target = target.to(type);
  for (auto& s : b.sources) s = s.to(type);
  b.imu = imu.to(type);
  b.intrinsics = intrinsics.to(type);
  return b;
}

Batch make_batch(const std::vector<const SnippetSample*>& samples) {
  if (samples.empty()) throw std::invalid_argument("make_batch: no samples");
  const auto& first = *samples.front();
  const int h = first.snippet.target.height(), w = first.snippet.target.width(), rows = first.imu.rows();
  const auto n = static_cast<int64_t>(samples.size());
  Batch b;
  b.target = torch::empty({n, 3, h, w});
  b.sources = {torch::empty({n, 3, h, w}), torch::empty({n, 3, h, w})};
  b.imu = torch::empty({n, rows, 6});
  b.intrinsics = torch::empty({n, 4});
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = *samples[static_cast<std::size_t>(i)];
    if (s.snippet.target.height() != h || s.snippet.target.width() != w || s.imu.rows() != rows ||
        s.snippet.target.channel_count() != 3)
      throw std::invalid_argument("make_batch: samples differ in image size or IMU rows");
    copy_image(s.snippet.target, b.target[i]);
    copy_image(s.snippet.sources[0], b.sources[0][i]);
    copy_image(s.snippet.sources[1], b.sources[1][i]);
    Eigen::Map<Eigen::Matrix<float, Eigen::Dynamic, 6, Eigen::RowMajor>>(b.imu[i].data_ptr<float>(), rows, 6) =
        s.imu.samples;
    auto k = b.intrinsics[i];
    k[0] = s.intrinsics.fx;
    k[1] = s.intrinsics.fy;
    k[2] = s.intrinsics.cx;
    k[3] = s.intrinsics.cy;
    b.ids.push_back(s.sequence + ":" + std::to_string(s.index));
  }
  return b;
}

Batch make_batch(const std::vector<SnippetSample>& samples) {
  std::vector<const SnippetSample*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s);
  return make_batch(ptrs);
}

SelfVioModelImpl::SelfVioModelImpl(const NetConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.views != 3) throw ConfigError("model: the snippet pipeline is built for 3 views");
  encoder = register_module("encoder", Encoder(cfg_));
  generator = register_module("generator", Generator(cfg_));
  vo = register_module("vo", VoNet(cfg_));
  int inertial = 0;
  if (cfg_.imu_mode == ImuMode::Conv) {
    imu = register_module("imu", std::make_shared<ImuConvNetImpl>(cfg_));
    inertial = ImuEncoderImpl::feature_dim();
  } else if (cfg_.imu_mode == ImuMode::Lstm) {
    imu = register_module("imu", std::make_shared<ImuLstmNetImpl>(cfg_));
    inertial = ImuEncoderImpl::feature_dim();
  }
  fusion = register_module("fusion", SoftFusion(vo->feature_dim(), inertial));
  regressor = register_module("regressor", TemporalRegressor(vo->feature_dim() + inertial, cfg_.fusion_hidden,
                                                             cfg_.fusion_layers, cfg_.pose_outputs(),
                                                             cfg_.pose_scale));
  discriminator = register_module("discriminator", Discriminator(cfg_));
}

torch::Tensor SelfVioModelImpl::predict_depth(const torch::Tensor& target) {
  return generator->forward(encoder->forward(target), {target.size(2), target.size(3)});
}

ModelOutput SelfVioModelImpl::forward(const Batch& batch) {
  if (batch.sources.size() != 2) throw std::invalid_argument("model: expected two source views");
  ModelOutput out;
  out.depth = predict_depth(batch.target);
  const auto a_v = vo->forward(torch::cat({batch.target, batch.sources[0], batch.sources[1]}, 1)).joined();
  out.fusion = imu ? fusion->forward(a_v, imu->forward(batch.imu)) : fusion->forward(a_v);
  out.poses = regressor->forward(out.fusion.fused).view({batch.size(), cfg_.views - 1, 6});
  return out;
}

Reconstruction SelfVioModelImpl::reconstruct(const Batch& batch, const ModelOutput& out) {
  Reconstruction r;
  std::vector<torch::Tensor> fakes;
  for (std::size_t s = 0; s < batch.sources.size(); ++s) {
    auto w = warp_batch(batch.sources[s], out.depth, out.poses.select(1, static_cast<int64_t>(s)), batch.intrinsics);
    fakes.push_back(torch::where(w.valid > 0.5, w.image, batch.target));
    r.warped.push_back(w.image);
    r.valid.push_back(w.valid);
  }
  r.fake = torch::cat(fakes, 0);
  return r;
}

std::vector<torch::Tensor> SelfVioModelImpl::generator_parameters() const {
  std::vector<torch::Tensor> p;
  append(p, encoder->parameters());
  append(p, generator->parameters());
  append(p, vo->parameters());
  if (imu) append(p, imu->parameters());
  append(p, fusion->parameters());
  append(p, regressor->parameters());
  return p;
}

std::vector<torch::Tensor> SelfVioModelImpl::depth_parameters() const { return generator->parameters(); }

std::vector<torch::Tensor> SelfVioModelImpl::discriminator_parameters() const {
  return discriminator->parameters();
}

std::vector<std::array<SE3Matrix<double>, 2>> pose_matrices(const torch::Tensor& poses) {
  const auto p = poses.detach().to(torch::kDouble).contiguous();
  if (p.dim() != 3 || p.size(1) != 2 || p.size(2) != 6) throw std::invalid_argument("pose_matrices: expected [B,2,6]");
  std::vector<std::array<SE3Matrix<double>, 2>> out(static_cast<std::size_t>(p.size(0)));
  const double* d = p.data_ptr<double>();
  for (std::size_t b = 0; b < out.size(); ++b)
    for (int s = 0; s < 2; ++s)
      out[b][static_cast<std::size_t>(s)] =
          pose_to_matrix(Pose6DoF<double>::from_vector(Eigen::Map<const Vector6<double>>(d + 12 * b + 6 * s)));
  return out;
}

namespace {

template <typename Fn>
void for_each_chunk(const std::vector<SnippetSample>& samples, int batch_size, Fn&& fn) {
  const std::size_t step = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t i = 0; i < samples.size(); i += step) {
    std::vector<const SnippetSample*> chunk;
    for (std::size_t j = i; j < std::min(samples.size(), i + step); ++j) chunk.push_back(&samples[j]);
    fn(chunk, make_batch(chunk));
  }
}

}  // namespace

std::vector<SnippetPrediction> predict_poses(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                             int batch_size) {
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  std::vector<SnippetPrediction> out;
  for_each_chunk(samples, batch_size, [&](const std::vector<const SnippetSample*>& chunk, const Batch& batch) {
    const auto o = model->forward(batch);
    const auto mats = pose_matrices(o.poses);
    const auto att = attention_means(o.fusion).to(torch::kDouble).contiguous();
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      SnippetPrediction p;
      p.sequence = chunk[i]->sequence;
      p.index = chunk[i]->index;
      p.relative = mats[i];
      p.attention_visual = att[static_cast<int64_t>(i)][0].item<double>();
      p.attention_inertial = att[static_cast<int64_t>(i)][1].item<double>();
      out.push_back(std::move(p));
    }
  });
  model->train(was_training);
  return out;
}

std::vector<DepthMap<double>> predict_depths(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                             int batch_size) {
  const bool was_training = model->is_training();
  model->eval();
  torch::NoGradGuard no_grad;
  std::vector<DepthMap<double>> out;
  for_each_chunk(samples, batch_size, [&](const std::vector<const SnippetSample*>&, const Batch& batch) {
    const auto d = model->predict_depth(batch.target).to(torch::kDouble).contiguous();
    const int h = static_cast<int>(d.size(2)), w = static_cast<int>(d.size(3));
    for (int64_t i = 0; i < d.size(0); ++i)
      out.emplace_back(Eigen::Map<const Plane<double>>(d[i].data_ptr<double>(), h, w));
  });
  model->train(was_training);
  return out;
}

Trajectory trajectory_from_predictions(const std::vector<SnippetPrediction>& snippets,
                                       const std::vector<double>& timestamps) {
  if (snippets.empty()) throw std::invalid_argument("trajectory_from_predictions: no snippets");
  for (std::size_t k = 0; k < snippets.size(); ++k)
    if (snippets[k].index != static_cast<int>(k) + 1 || snippets[k].sequence != snippets[0].sequence)
      throw std::invalid_argument("trajectory_from_predictions: snippets must be targets 1, 2, ... of one sequence");
  std::vector<SE3Matrix<double>> motions;
  // Pose of frame 1 in frame 0 is the point transform T_{1->0} itself.
  motions.push_back(snippets.front().relative[0]);
  for (const auto& s : snippets) motions.push_back(motion_from_point_transform(s.relative[1]));
  return integrate_relative_poses(motions, timestamps);
}

Trajectory ground_truth_trajectory(const std::vector<const SnippetSample*>& ordered) {
  std::vector<SnippetPrediction> gt;
  for (const auto* s : ordered) {
    if (!s->gt_relative) return {};
    SnippetPrediction p;
    p.sequence = s->sequence;
    p.index = s->index;
    p.relative = *s->gt_relative;
    gt.push_back(std::move(p));
  }
  return trajectory_from_predictions(gt);
}

std::vector<SequenceOdometry> sequence_odometry(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                                int batch_size) {
  std::map<std::string, std::vector<const SnippetSample*>> groups;
  for (const auto& s : samples) groups[s.sequence].push_back(&s);
  std::vector<SequenceOdometry> out;
  for (auto& [name, group] : groups) {
    std::sort(group.begin(), group.end(), [](const auto* a, const auto* b) { return a->index < b->index; });
    std::vector<SnippetSample> ordered;
    for (const auto* s : group) ordered.push_back(*s);
    SequenceOdometry seq;
    seq.sequence = name;
    seq.snippets = predict_poses(model, ordered, batch_size);
    seq.estimate = trajectory_from_predictions(seq.snippets);
    seq.ground_truth = ground_truth_trajectory(group);
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace selfvio
