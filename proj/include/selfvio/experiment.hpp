#pragma once

// Model-level evaluation: depth and odometry over a split, miscalibration
// robustness sweeps, and the file layout of a run directory.
//
// Run directory:
//   config.txt        effective data/net/train keys
//   checkpoint.bin    latest trainer state
//   losses.csv        one row per training step
//   validation.csv    one row per validation pass
//   manifest.json     command line, seed, versions, outputs
//   odometry/         <seq>_est.txt, <seq>_gt.txt (KITTI poses), <seq>_attention.csv, metrics.json
//   plots/            written by export_plots

#include "selfvio/miscalibration.hpp"
#include "selfvio/model.hpp"
#include "selfvio/report.hpp"
#include "selfvio/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace selfvio {

/// Fills net.height, net.width and net.imu_rows from the data.* keys when
/// absent, so a config only has to state the image size once.
[[nodiscard]] KeyValueConfig resolve_run_config(KeyValueConfig cfg);

struct TrainRunResult {
  std::int64_t iterations = 0;  // total, including resumed ones
  std::vector<ValidationSummary> validations;
  std::vector<std::string> events;
};

/// Trains per `cfg` (data.*, net.*, train.*) and writes config.txt,
/// losses.csv, validation.csv and checkpoint.bin to `out`. Validation runs
/// every train.val_interval steps when the val split is non-empty, and the
/// checkpoint is refreshed at the same points. With `resume`, continues from
/// out/checkpoint.bin and appends to the logs.
TrainRunResult train_run(const KeyValueConfig& cfg, const std::filesystem::path& out, bool resume = false);

/// A trained model and the dataset it was configured with.
struct RunArtifacts {
  KeyValueConfig config;
  DatasetConfig data;
  SelfVioModel model{nullptr};
};

/// Loads <run>/config.txt and <run>/checkpoint.bin; `data_root`, when given,
/// replaces data.root.
[[nodiscard]] RunArtifacts open_run(const std::filesystem::path& run_dir,
                                    const std::optional<std::filesystem::path>& data_root = std::nullopt);

/// L_g obtained by warping with ground-truth depth and poses instead of
/// predictions: the floor photometric training can approach on this data.
/// Pixels without a depth hit get depth `far`.
[[nodiscard]] double reference_photometric_loss(const std::vector<SnippetSample>& samples, double far = 1e3);

struct DepthEvaluation {
  std::vector<DepthMetrics> per_frame;
  DepthMetrics mean;
};

/// Median-scaled metrics of the predicted target depth. Throws
/// std::invalid_argument if a sample lacks ground-truth depth.
[[nodiscard]] DepthEvaluation evaluate_depth(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                             int batch_size = 8);

/// How segment lengths are chosen per sequence.
struct LengthPolicy {
  std::vector<double> meters;     // used when non-empty
  std::vector<double> fractions;  // else fractions of each sequence's path length
};

[[nodiscard]] LengthPolicy parse_length_policy(const std::string& text);
[[nodiscard]] std::vector<double> resolve_lengths(const LengthPolicy& policy, const Trajectory& gt);

struct OdometryEvaluation {
  SequenceOdometry odometry;
  std::optional<TrajectoryMetrics> metrics;  // only with ground truth
  std::vector<double> lengths;
};

[[nodiscard]] std::vector<OdometryEvaluation> evaluate_odometry(SelfVioModel& model,
                                                                const std::vector<SnippetSample>& samples,
                                                                const LengthPolicy& lengths, int batch_size = 8);

/// Writes the odometry/ files of a run directory.
void write_odometry(const std::filesystem::path& dir, const std::vector<OdometryEvaluation>& results);

struct RobustnessRow {
  double rotation_deg = 0;
  int draw = 0;
  std::string sequence;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();  // drawn offset axis
  TrajectoryMetrics metrics;
};

/// Evaluates the model on `sequences` of `base` under every rotation magnitude
/// and `draws` axis draws. Draw k uses seed `config.seed + k` for every
/// magnitude, so magnitudes are compared along the same axes.
[[nodiscard]] std::vector<RobustnessRow> robustness_sweep(SelfVioModel& model, const SnippetSource& base,
                                                          const std::vector<std::string>& sequences,
                                                          const MiscalibrationConfig& config,
                                                          const std::vector<double>& rotations_deg, int draws,
                                                          const LengthPolicy& lengths, int batch_size = 8);

/// Mean E_trans (%) per magnitude, in the order of `rotations_deg`.
[[nodiscard]] std::vector<double> mean_trans_error(const std::vector<RobustnessRow>& rows,
                                                   const std::vector<double>& rotations_deg);

void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessRow>& rows);

class MissingArtifacts : public std::runtime_error {
 public:
  explicit MissingArtifacts(std::vector<std::filesystem::path> missing);
  [[nodiscard]] const std::vector<std::filesystem::path>& missing() const { return missing_; }

 private:
  std::vector<std::filesystem::path> missing_;
};

struct PlotExport {
  std::vector<std::filesystem::path> written;
  bool ground_truth = false;  // false when some sequence had no ground truth
};

/// Converts a finished run into plot-ready CSVs under <run>/plots: loss
/// curves, top-down trajectories, per-length errors and attention means.
/// Throws MissingArtifacts naming every absent input.
PlotExport export_plots(const std::filesystem::path& run_dir);

}  // namespace selfvio
