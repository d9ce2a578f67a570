#include "selfvio/miscalibration.hpp"

#include "selfvio/vmf.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace selfvio {

void MiscalibrationConfig::validate() const {
  if (!(kappa > 0)) throw ConfigError("miscalibration: kappa must be positive");
  if (!std::isfinite(rotation_deg) || !translation.allFinite() || !std::isfinite(time_offset_ms))
    throw ConfigError("miscalibration: offsets must be finite");
  if (!(mean_axis.norm() > 0) || !mean_axis.allFinite()) throw ConfigError("miscalibration: mean axis must be non-zero");
}

bool MiscalibrationConfig::is_identity() const {
  return rotation_deg == 0.0 && translation.isZero(0.0) && time_offset_ms == 0.0;
}

ImuStream perturb_imu(const ImuStream& imu, const Eigen::Matrix3d& rotation, const Eigen::Vector3d& lever_arm,
                      double time_offset_s) {
  ImuStream out = imu;
  const auto n = static_cast<Eigen::Index>(imu.size());
  if (!lever_arm.isZero(0.0) && n >= 2) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index a = std::max<Eigen::Index>(0, i - 1), b = std::min<Eigen::Index>(n - 1, i + 1);
      const double dt = imu.times[static_cast<std::size_t>(b)] - imu.times[static_cast<std::size_t>(a)];
      const Eigen::Vector3d w = imu.samples.row(i).tail<3>().transpose();
      const Eigen::Vector3d dw =
          (imu.samples.row(b).tail<3>() - imu.samples.row(a).tail<3>()).transpose() / dt;
      out.samples.row(i).head<3>() += (dw.cross(lever_arm) + w.cross(w.cross(lever_arm))).transpose();
    }
  }
  if (!rotation.isIdentity(0.0)) {
    for (Eigen::Index i = 0; i < n; ++i) {
      out.samples.row(i).head<3>() = (rotation * out.samples.row(i).head<3>().transpose()).transpose();
      out.samples.row(i).tail<3>() = (rotation * out.samples.row(i).tail<3>().transpose()).transpose();
    }
  }
  if (time_offset_s != 0.0)
    for (auto& t : out.times) t += time_offset_s;
  return out;
}

MiscalibratedDataset::MiscalibratedDataset(const SnippetSource& base, MiscalibrationConfig config)
    : base_(base), config_(std::move(config)) {
  config_.validate();
  if (config_.rotation_deg != 0.0) {
    std::mt19937_64 rng(config_.seed);
    rotation_ = sample_rotation_offset<double>(config_.mean_axis, config_.kappa,
                                               config_.rotation_deg * std::numbers::pi / 180.0, rng);
  }
  const auto& cfg = base_.config();
  for (const auto* list : {&cfg.train, &cfg.val, &cfg.test})
    for (const auto& name : *list)
      streams_.emplace(name, perturb_imu(base_.sequence(name).imu, rotation_, config_.translation,
                                         config_.time_offset_ms * 1e-3));
}

const ImuStream& MiscalibratedDataset::stream(const std::string& name) const {
  const auto it = streams_.find(name);
  if (it == streams_.end()) throw DataError("unknown sequence '" + name + "'");
  return it->second;
}

SnippetSample MiscalibratedDataset::load_snippet(const std::string& sequence, int index) const {
  return assemble_snippet(base_.config(), base_.sequence(sequence), stream(sequence), index);
}

}  // namespace selfvio
