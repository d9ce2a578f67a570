#pragma once

// Depth and trajectory evaluation: median-scaled depth statistics, KITTI
// segment errors, snippet ATE and Umeyama trajectory alignment.

#include "selfvio/alignment.hpp"
#include "selfvio/trajectory.hpp"

#include <string>
#include <vector>

namespace selfvio {

struct DepthMetricsOptions {
  double cap = 80.0;
  double min_depth = 1e-3;
  bool median_scaling = true;
};

struct DepthMetrics {
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;
  double a1 = 0, a2 = 0, a3 = 0;  // fraction with max(p/g, g/p) < 1.25, 1.25^2, 1.25^3
  double scale = 1;               // median ratio applied to the prediction
  std::size_t count = 0;          // evaluated pixels
};

/// Median of a copy of `values` (mean of the two middle elements for even sizes).
[[nodiscard]] double median(std::vector<double> values);

/// Pixels count when 0 < gt <= cap. Throws std::invalid_argument if none do.
[[nodiscard]] DepthMetrics depth_metrics(const DepthMap<double>& pred, const DepthMap<double>& gt,
                                         const DepthMetricsOptions& options = {});

/// Averages depth metrics over several frames, weighting every frame equally.
[[nodiscard]] DepthMetrics average(const std::vector<DepthMetrics>& per_frame);

[[nodiscard]] std::vector<double> kitti_lengths();        // 100, 200, ..., 800 m
[[nodiscard]] std::vector<double> kitti_short_lengths();  // 100, ..., 500 m
[[nodiscard]] std::vector<double> desk_lengths();         // 7, 14, 21, 28, 35 m

inline constexpr double kSegmentTolerance = 0.2;  // meters

struct SegmentError {
  std::size_t first = 0, last = 0;
  double length = 0;      // requested segment length (m)
  double trans_error = 0; // translation error per meter
  double rot_error = 0;   // rotation error in rad per meter
};

struct LengthErrors {
  double length = 0;
  std::size_t segments = 0;
  double trans_percent = 0;
  double rot_deg_per_100m = 0;
};

struct TrajectoryMetrics {
  std::vector<LengthErrors> per_length;  // only lengths with at least one segment
  std::vector<double> missing_lengths;   // requested lengths with no segment
  std::vector<SegmentError> segments;
  double trans_percent = 0;
  double rot_deg_per_100m = 0;
  double ate_rmse_mean = 0, ate_rmse_std = 0;  // filled by callers that also run ate_snippets
};

/// Cumulative ground-truth path length at every frame.
[[nodiscard]] std::vector<double> trajectory_distances(const Trajectory& gt);

/// Error of one frame pair: (est_i^-1 est_j)^-1 (gt_i^-1 gt_j).
[[nodiscard]] SE3Matrix<double> segment_pose_error(const Trajectory& est, const Trajectory& gt, std::size_t i,
                                                   std::size_t j);

/// KITTI relative errors over every frame pair whose ground-truth path length
/// is within `tolerance` of a requested length.
[[nodiscard]] TrajectoryMetrics kitti_relative_errors(const Trajectory& est, const Trajectory& gt,
                                                      const std::vector<double>& lengths,
                                                      double tolerance = kSegmentTolerance);

struct AteStats {
  double mean = 0, std = 0;
  std::vector<double> per_snippet;
};

/// Per snippet of `snippet_len` consecutive frames: 7-DoF align the estimated
/// positions to ground truth, then position RMSE. Snippets start at every frame.
[[nodiscard]] AteStats ate_snippets(const Trajectory& est, const Trajectory& gt, std::size_t snippet_len = 5);

struct AlignmentResult {
  Trajectory aligned;
  Similarity<double> transform;  // gt ~ s R est + t
  double rmse = 0;
};

/// Aligns `est` onto `gt` with 6 (rigid) or 7 (similarity) degrees of freedom.
[[nodiscard]] AlignmentResult umeyama_align(const Trajectory& est, const Trajectory& gt, int dof);

[[nodiscard]] double position_rmse(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b);

}  // namespace selfvio
