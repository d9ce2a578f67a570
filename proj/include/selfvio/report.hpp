#pragma once

// Structured metric output: JSON documents and fixed-width tables whose
// columns follow the usual depth and odometry result tables.

#include "selfvio/metrics.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace selfvio {

/// KITTI segment errors plus snippet ATE for one trajectory pair.
[[nodiscard]] TrajectoryMetrics evaluate_trajectory(const Trajectory& est, const Trajectory& gt,
                                                    const std::vector<double>& lengths, std::size_t snippet_len = 5);

/// Segment lengths as fractions of the ground-truth path length, for
/// sequences far shorter than the fixed KITTI or desk length sets.
[[nodiscard]] std::vector<double> relative_lengths(const Trajectory& gt, const std::vector<double>& fractions);

/// Comma-separated meters ("7,14,21"), or one of the named sets "kitti",
/// "kitti-short", "desk". Throws std::invalid_argument on anything else.
[[nodiscard]] std::vector<double> parse_lengths(const std::string& text);

[[nodiscard]] nlohmann::ordered_json to_json(const DepthMetrics& m);
[[nodiscard]] nlohmann::ordered_json to_json(const TrajectoryMetrics& m);

/// One header row and one row per entry, columns Abs Rel .. d<1.25^3.
[[nodiscard]] std::string depth_table(const std::vector<std::pair<std::string, DepthMetrics>>& rows);
/// Per-length rows followed by an "all" row; the ATE column is on the "all" row only.
[[nodiscard]] std::string odometry_table(const std::string& name, const TrajectoryMetrics& m);

/// Shortest decimal text that parses back to the same double.
[[nodiscard]] std::string format_number(double v);

}  // namespace selfvio
