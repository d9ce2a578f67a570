#pragma once

// Snippet loading from a KITTI-odometry-like directory layout:
//
//   <root>/<seq>/image_2/%06d.png   frames
//   <root>/<seq>/times.txt          one timestamp (s) per frame
//   <root>/<seq>/imu.txt            t ax ay az wx wy wz per line (SI units)
//   <root>/<seq>/calib.txt          fx fy cx cy
//   <root>/<seq>/poses.txt          optional, KITTI 3x4 camera-to-world poses
//   <root>/<seq>/depth/%06d.bin     optional ground-truth depth (see png_io.hpp)

#include "selfvio/config.hpp"
#include "selfvio/geometry.hpp"
#include "selfvio/image.hpp"
#include "selfvio/trajectory.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace selfvio {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Target frame I_t plus sources (I_{t-1}, I_{t+1}); pixel values in [-1, 1].
struct ImageSnippet {
  ImageTensor<float> target;
  std::array<ImageTensor<float>, 2> sources;
  std::array<double, 3> timestamps{};  // t-1, t, t+1

  void validate() const;
};

using ImuMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6, Eigen::RowMajor>;

/// Fixed-size IMU block: columns (ax, ay, az, wx, wy, wz). Real samples come
/// first; missing rows are zero.
struct ImuWindow {
  Eigen::Matrix<float, Eigen::Dynamic, 6, Eigen::RowMajor> samples;
  std::vector<double> sample_times;  // timestamps of the real rows
  int real_rows = 0;

  [[nodiscard]] int rows() const { return static_cast<int>(samples.rows()); }
  /// Set whenever the window had to be zero padded.
  [[nodiscard]] bool warning() const { return real_rows < rows(); }
};

/// Time-stamped raw IMU measurements of one sequence.
struct ImuStream {
  std::vector<double> times;
  ImuMatrix samples;

  [[nodiscard]] std::size_t size() const { return times.size(); }
};

/// Collects the samples with t_begin <= t < t_end, truncating or zero padding to `rows`.
[[nodiscard]] ImuWindow gather_imu_window(const ImuStream& imu, double t_begin, double t_end, int rows);

struct DatasetConfig {
  std::filesystem::path root;
  int height = 256;
  int width = 832;
  int imu_rows = 20;
  std::vector<std::string> train, val, test;
  /// Per-sequence intrinsics overriding calib.txt (synthetic datasets embed them here).
  std::map<std::string, CameraIntrinsics<double>> intrinsics;

  /// Throws ConfigError when the split lists overlap or sizes are not positive.
  void validate() const;

  [[nodiscard]] static DatasetConfig from_config(const KeyValueConfig& cfg);
  [[nodiscard]] KeyValueConfig to_config() const;
};

struct SequenceData {
  std::string name;
  std::filesystem::path dir;
  std::vector<double> frame_times;
  ImuStream imu;
  CameraIntrinsics<double> intrinsics;  // at native image resolution
  std::optional<Trajectory> ground_truth;

  [[nodiscard]] int frame_count() const { return static_cast<int>(frame_times.size()); }
  [[nodiscard]] std::filesystem::path image_path(int frame) const;
  [[nodiscard]] std::filesystem::path depth_path(int frame) const;
};

[[nodiscard]] SequenceData load_sequence(const std::filesystem::path& root, const std::string& name);
[[nodiscard]] ImuStream read_imu_file(const std::filesystem::path& path);
[[nodiscard]] CameraIntrinsics<double> read_calib_file(const std::filesystem::path& path, int width, int height);

/// One training/evaluation example.
struct SnippetSample {
  std::string sequence;
  int index = 0;  // frame index of the target
  ImageSnippet snippet;
  ImuWindow imu;
  CameraIntrinsics<double> intrinsics;
  /// Ground-truth T_{t->s} for (I_{t-1}, I_{t+1}) when poses.txt exists.
  std::optional<std::array<SE3Matrix<double>, 2>> gt_relative;
  std::optional<DepthMap<float>> gt_depth;
};

/// Anything that can produce snippets: the plain dataset or a perturbed view of it.
class SnippetSource {
 public:
  virtual ~SnippetSource() = default;
  [[nodiscard]] virtual SnippetSample load_snippet(const std::string& sequence, int index) const = 0;
  [[nodiscard]] virtual const DatasetConfig& config() const = 0;
  [[nodiscard]] virtual const SequenceData& sequence(const std::string& name) const = 0;

  /// Valid target indices are 1 .. frame_count - 2.
  [[nodiscard]] std::vector<int> snippet_indices(const std::string& name) const;
  [[nodiscard]] std::vector<SnippetSample> load_all(const std::vector<std::string>& sequences) const;
};

/// Builds a snippet from sequence metadata and an explicit IMU stream.
[[nodiscard]] SnippetSample assemble_snippet(const DatasetConfig& config, const SequenceData& seq,
                                             const ImuStream& imu, int index);

/// Read-only after construction; safe to query from several threads.
class Dataset final : public SnippetSource {
 public:
  explicit Dataset(DatasetConfig config);

  [[nodiscard]] SnippetSample load_snippet(const std::string& sequence, int index) const override;
  [[nodiscard]] const DatasetConfig& config() const override { return config_; }
  [[nodiscard]] const SequenceData& sequence(const std::string& name) const override;
  [[nodiscard]] std::vector<std::string> sequence_names() const;

 private:
  DatasetConfig config_;
  std::map<std::string, SequenceData> sequences_;
};

/// Same geometric transform for all three frames: scale, crop back to the
/// original size, optional horizontal flip.
struct AugmentParams {
  double scale = 1.0;
  int crop_x = 0, crop_y = 0;
  bool flip = false;
};

[[nodiscard]] AugmentParams sample_augment_params(std::uint64_t seed, int height, int width,
                                                  double max_scale = 1.15);

/// Applies `params`, adjusting intrinsics (scale multiplies fx, fy, cx, cy;
/// crop shifts cx, cy; flip mirrors cx). A flip also mirrors the IMU window
/// about the camera x axis (ax and the y/z angular rates change sign), which
/// assumes the IMU axes are aligned with the camera.
[[nodiscard]] SnippetSample apply_augment(const SnippetSample& sample, const AugmentParams& params);

/// Deterministic for a fixed seed.
[[nodiscard]] SnippetSample augment(const SnippetSample& sample, std::uint64_t seed);

}  // namespace selfvio
