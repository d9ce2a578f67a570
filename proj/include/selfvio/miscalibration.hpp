#pragma once

// Test-time camera/IMU miscalibration: a perturbed view of a dataset whose
// IMU streams are rotated, offset by a lever arm and shifted in time. The
// wrapped dataset is never modified.

#include "selfvio/dataio.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace selfvio {

struct MiscalibrationConfig {
  double rotation_deg = 0.0;  // magnitude of the rotational offset
  double kappa = 100.0;       // vMF concentration of the offset axis
  Eigen::Vector3d mean_axis = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();  // lever arm, meters, IMU frame
  double time_offset_ms = 0.0;                            // added to every IMU timestamp
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive kappa, non-finite offsets or a zero mean axis.
  void validate() const;
  [[nodiscard]] bool is_identity() const;
};

/// Applies the perturbation to one IMU stream given a drawn rotation.
/// Lever arm r adds dw/dt x r + w x (w x r) to the specific force, with dw/dt
/// taken by finite differences over the sample times.
[[nodiscard]] ImuStream perturb_imu(const ImuStream& imu, const Eigen::Matrix3d& rotation,
                                    const Eigen::Vector3d& lever_arm, double time_offset_s);

class MiscalibratedDataset final : public SnippetSource {
 public:
  /// Draws the rotational offset once from `config.seed` and perturbs the IMU of
  /// every sequence listed in the base config. `base` must outlive this view.
  MiscalibratedDataset(const SnippetSource& base, MiscalibrationConfig config);

  [[nodiscard]] SnippetSample load_snippet(const std::string& sequence, int index) const override;
  [[nodiscard]] const DatasetConfig& config() const override { return base_.config(); }
  [[nodiscard]] const SequenceData& sequence(const std::string& name) const override {
    return base_.sequence(name);
  }

  [[nodiscard]] const Eigen::Matrix3d& rotation_offset() const { return rotation_; }
  [[nodiscard]] const MiscalibrationConfig& miscalibration() const { return config_; }

 private:
  const ImuStream& stream(const std::string& name) const;

  const SnippetSource& base_;
  MiscalibrationConfig config_;
  Eigen::Matrix3d rotation_ = Eigen::Matrix3d::Identity();
  std::map<std::string, ImuStream> streams_;
};

[[nodiscard]] inline MiscalibratedDataset inject_miscalibration(const SnippetSource& base,
                                                                const MiscalibrationConfig& config) {
  return MiscalibratedDataset(base, config);
}

}  // namespace selfvio
