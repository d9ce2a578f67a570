#pragma once

// The full pipeline: depth generator E->G, pose estimator (VO + IMU + fusion)
// and the discriminator, plus batching of loaded snippets and inference
// helpers that turn predictions into depth maps and trajectories.

#include "selfvio/dataio.hpp"
#include "selfvio/fusion.hpp"
#include "selfvio/nets.hpp"
#include "selfvio/trajectory.hpp"
#include "selfvio/warp_op.hpp"

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

namespace selfvio {

struct Batch {
  torch::Tensor target;                // [B,3,H,W]
  std::vector<torch::Tensor> sources;  // (t-1, t+1), each [B,3,H,W]
  torch::Tensor imu;                   // [B,n,6]
  torch::Tensor intrinsics;            // [B,4] = fx, fy, cx, cy
  std::vector<std::string> ids;        // "<sequence>:<index>"

  [[nodiscard]] int64_t size() const { return target.defined() ? target.size(0) : 0; }
  [[nodiscard]] Batch to(torch::ScalarType type) const;
};

/// Stacks samples into float32 tensors. All samples must share image size and IMU rows.
[[nodiscard]] Batch make_batch(const std::vector<const SnippetSample*>& samples);
[[nodiscard]] Batch make_batch(const std::vector<SnippetSample>& samples);

struct ModelOutput {
  torch::Tensor depth;  // [B,1,H,W]
  torch::Tensor poses;  // [B,views-1,6], T_{t->s} as (t, euler)
  FusionWeights fusion;
};

struct Reconstruction {
  std::vector<torch::Tensor> warped;  // per source, [B,3,H,W]
  std::vector<torch::Tensor> valid;   // per source, [B,1,H,W]
  /// Warped views with invalid pixels filled from the target, stacked over
  /// sources: what the discriminator sees as fake.
  torch::Tensor fake;
};

class SelfVioModelImpl : public torch::nn::Module {
 public:
  explicit SelfVioModelImpl(const NetConfig& cfg);

  ModelOutput forward(const Batch& batch);
  torch::Tensor predict_depth(const torch::Tensor& target);
  Reconstruction reconstruct(const Batch& batch, const ModelOutput& out);

  /// E, G, VO, inertial encoder, fusion and regressor.
  [[nodiscard]] std::vector<torch::Tensor> generator_parameters() const;
  /// Parameters of G alone (the depth generator).
  [[nodiscard]] std::vector<torch::Tensor> depth_parameters() const;
  [[nodiscard]] std::vector<torch::Tensor> discriminator_parameters() const;
  [[nodiscard]] const NetConfig& config() const { return cfg_; }

  Encoder encoder{nullptr};
  Generator generator{nullptr};
  VoNet vo{nullptr};
  std::shared_ptr<ImuEncoderImpl> imu;  // null in vision-only mode
  SoftFusion fusion{nullptr};
  TemporalRegressor regressor{nullptr};
  Discriminator discriminator{nullptr};

 private:
  NetConfig cfg_;
};
TORCH_MODULE(SelfVioModel);

/// Relative poses per snippet as double matrices: [k][s] = T_{t->s}.
[[nodiscard]] std::vector<std::array<SE3Matrix<double>, 2>> pose_matrices(const torch::Tensor& poses);

struct SnippetPrediction {
  std::string sequence;
  int index = 0;
  std::array<SE3Matrix<double>, 2> relative;  // T_{t->t-1}, T_{t->t+1}
  double attention_visual = 0, attention_inertial = 0;
};

/// Runs the pose estimator over samples in eval mode without gradients.
[[nodiscard]] std::vector<SnippetPrediction> predict_poses(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                                           int batch_size = 8);

/// Predicted depth maps (double, meters) for each sample's target frame.
[[nodiscard]] std::vector<DepthMap<double>> predict_depths(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                                           int batch_size = 8);

/// Chains the predictions of consecutive snippets (targets 1 .. n-2 of one
/// sequence, in order) into an n-frame trajectory starting at the identity.
/// Frame 0 -> 1 uses the backward pose of the first snippet.
[[nodiscard]] Trajectory trajectory_from_predictions(const std::vector<SnippetPrediction>& snippets,
                                                     const std::vector<double>& timestamps = {});

struct SequenceOdometry {
  std::string sequence;
  std::vector<SnippetPrediction> snippets;
  Trajectory estimate;
  Trajectory ground_truth;  // empty unless every snippet carries ground-truth poses
};

/// Groups samples by sequence and chains each into a trajectory. Every
/// sequence must contribute the consecutive targets 1 .. k.
[[nodiscard]] std::vector<SequenceOdometry> sequence_odometry(SelfVioModel& model,
                                                              const std::vector<SnippetSample>& samples,
                                                              int batch_size = 8);

/// Ground-truth trajectory chained from the samples' relative poses the same way.
[[nodiscard]] Trajectory ground_truth_trajectory(const std::vector<const SnippetSample*>& ordered);

}  // namespace selfvio
