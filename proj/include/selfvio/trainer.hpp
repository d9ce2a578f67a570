#pragma once

// Alternating generator/discriminator training, validation, loss logging and
// checkpoints.
//
// Checkpoint layout (little-endian):
//   "SVIOCKPT" | u32 version | u64 payload bytes | u64 FNV-1a of payload | payload
// The payload is a sequence of (u64 key length, key, u64 value length, value)
// records. Parameters and buffers are stored as named raw arrays with dtype
// and shape; optimizer states use the libtorch archive format.

#include "selfvio/dataio.hpp"
#include "selfvio/losses.hpp"
#include "selfvio/metrics.hpp"
#include "selfvio/model.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace selfvio {

struct TrainConfig {
  int batch_size = 16;
  int max_iters = 2000;
  int val_interval = 1000;
  double lr = 2e-4;
  double beta1 = 0.9, beta2 = 0.99;
  double gamma = 0.5;          // lr(it) = lr * gamma^(it / lr_step)
  int lr_step = 0;             // 0: max_iters / 2 (50 000 of 100 000 at full scale)
  std::uint64_t seed = 1;
  int warmup_iters = 100;      // L_g-only iterations used to calibrate beta
  double beta = 0.0;           // > 0 fixes beta and skips the warmup
  bool adversarial = true;
  bool use_mask = true;
  bool update_all_on_final = true;  // false: only G sees the adversarial term
  bool augment = true;
  double clip_norm = 10.0;
  int max_consecutive_skips = 3;
  int threads = 1;

  void validate() const;
  [[nodiscard]] int effective_lr_step() const { return lr_step > 0 ? lr_step : std::max(1, max_iters / 2); }
  [[nodiscard]] double lr_at(std::int64_t iteration) const;

  void write(KeyValueConfig& cfg) const;  // keys under "train."
  [[nodiscard]] static TrainConfig from_config(const KeyValueConfig& cfg);
};

struct LossReport {
  std::int64_t iteration = 0;  // 1-based index of the step that produced it
  double l_g = 0, l_d_gen = 0, l_d_disc = 0, l_final = 0, beta = 0, lr = 0;
  std::int64_t valid_pixels = 0;
  bool warmup = false;
  bool skipped = false;
};

class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::int64_t iteration = 0;
  std::optional<double> beta;
  std::uint64_t config_hash = 0;
  LossReport last;
};

/// CSV columns: iteration,L_g,L_d_gen,L_d_disc,L_final,beta,lr
class LossLog {
 public:
  LossLog(const std::filesystem::path& path, bool append);
  void write(const LossReport& r);
  [[nodiscard]] static std::vector<LossReport> read(const std::filesystem::path& path);
  static constexpr const char* kHeader = "iteration,L_g,L_d_gen,L_d_disc,L_final,beta,lr";

 private:
  std::ofstream out_;
};

struct ValidationSummary {
  double l_g = 0;  // pooled over all valid pixels of the set
  std::size_t snippets = 0;
  std::int64_t valid_pixels = 0;
  std::optional<DepthMetrics> depth;  // when every sample carries ground-truth depth
  std::optional<AteStats> ate;        // when whole sequences with ground truth are present
};

/// Reads a checkpoint and verifies magic, version and checksum; returns its records.
[[nodiscard]] std::map<std::string, std::string> read_checkpoint(const std::filesystem::path& path);
/// Rebuilds the model stored in a checkpoint, in eval mode.
[[nodiscard]] SelfVioModel load_model(const std::filesystem::path& path);
/// The net.* and train.* keys a checkpoint was written with.
[[nodiscard]] KeyValueConfig checkpoint_config(const std::filesystem::path& path);

class Trainer {
 public:
  Trainer(const NetConfig& net, const TrainConfig& train, std::vector<SnippetSample> train_set);

  /// Draws a batch from the training set (augmented if configured) and trains on it.
  LossReport step();
  LossReport train_step(const Batch& batch);
  /// Runs until `iterations` more steps are done; every report goes to `log` if given.
  std::vector<LossReport> run(int iterations, LossLog* log = nullptr);

  /// Eval-mode photometric loss plus optional depth and ATE metrics. Throws on an empty set.
  [[nodiscard]] ValidationSummary validate(const std::vector<SnippetSample>& val);

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Validates the whole file before touching any state.
  CheckpointMeta load_checkpoint(const std::filesystem::path& path);

  [[nodiscard]] SelfVioModel& model() { return model_; }
  [[nodiscard]] std::int64_t iteration() const { return iteration_; }
  [[nodiscard]] std::optional<double> beta() const { return beta_; }
  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  [[nodiscard]] const NetConfig& net_config() const { return net_; }
  [[nodiscard]] std::uint64_t config_hash() const;
  [[nodiscard]] const std::vector<std::string>& events() const { return events_; }
  [[nodiscard]] const std::vector<double>& warmup_history_g() const { return warm_g_; }
  [[nodiscard]] const std::vector<double>& warmup_history_d() const { return warm_d_; }
  [[nodiscard]] std::size_t train_size() const { return train_.size(); }

 private:
  void set_lr(double lr);
  LossReport skip(LossReport r);

  NetConfig net_;
  TrainConfig cfg_;
  std::vector<SnippetSample> train_;
  SelfVioModel model_{nullptr};
  std::unique_ptr<torch::optim::Adam> gen_opt_, disc_opt_;
  std::mt19937_64 rng_;
  torch::Tensor torch_rng_;
  std::int64_t iteration_ = 0;
  int consecutive_skips_ = 0;
  std::optional<double> beta_;
  std::vector<double> warm_g_, warm_d_;
  LossReport last_;
  std::vector<std::string> events_;
  std::vector<torch::Tensor> saved_buffers_;
};

}  // namespace selfvio
