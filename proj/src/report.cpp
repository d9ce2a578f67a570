#include "selfvio/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace selfvio {

TrajectoryMetrics evaluate_trajectory(const Trajectory& est, const Trajectory& gt, const std::vector<double>& lengths,
                                      std::size_t snippet_len) {
  auto m = kitti_relative_errors(est, gt, lengths);
  if (gt.size() >= snippet_len) {
    const auto ate = ate_snippets(est, gt, snippet_len);
    m.ate_rmse_mean = ate.mean;
    m.ate_rmse_std = ate.std;
  }
  return m;
}

std::vector<double> relative_lengths(const Trajectory& gt, const std::vector<double>& fractions) {
  const auto dist = trajectory_distances(gt);
  const double total = dist.empty() ? 0.0 : dist.back();
  std::vector<double> out;
  out.reserve(fractions.size());
  for (double f : fractions) out.push_back(f * total);
  return out;
}

std::vector<double> parse_lengths(const std::string& text) {
  if (text == "kitti") return kitti_lengths();
  if (text == "kitti-short") return kitti_short_lengths();
  if (text == "desk") return desk_lengths();
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    double v = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), v);
    if (r.ec != std::errc() || r.ptr != item.data() + item.size() || !(v > 0.0))
      throw std::invalid_argument("bad segment length '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("no segment lengths given");
  return out;
}

std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

nlohmann::ordered_json to_json(const DepthMetrics& m) {
  return {{"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"rmse", m.rmse}, {"rmse_log", m.rmse_log},
          {"a1", m.a1},           {"a2", m.a2},         {"a3", m.a3},     {"scale", m.scale},
          {"pixels", m.count}};
}

nlohmann::ordered_json to_json(const TrajectoryMetrics& m) {
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (const auto& l : m.per_length)
    per.push_back({{"length_m", l.length},
                   {"segments", l.segments},
                   {"t_rel_percent", l.trans_percent},
                   {"r_rel_deg_per_100m", l.rot_deg_per_100m}});
  return {{"t_rel_percent", m.trans_percent},
          {"r_rel_deg_per_100m", m.rot_deg_per_100m},
          {"ate_mean_m", m.ate_rmse_mean},
          {"ate_std_m", m.ate_rmse_std},
          {"segments", m.segments.size()},
          {"per_length", per},
          {"missing_lengths", m.missing_lengths}};
}

namespace {

std::string cell(double v, int precision) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

std::string depth_table(const std::vector<std::pair<std::string, DepthMetrics>>& rows) {
  std::ostringstream os;
  os << pad("", 10) << pad("Abs Rel", 10) << pad("Sq Rel", 10) << pad("RMSE", 10) << pad("RMSE log", 10)
     << pad("d<1.25", 10) << pad("d<1.25^2", 10) << pad("d<1.25^3", 10) << '\n';
  for (const auto& [name, m] : rows)
    os << pad(name, 10) << pad(cell(m.abs_rel, 4), 10) << pad(cell(m.sq_rel, 4), 10) << pad(cell(m.rmse, 4), 10)
       << pad(cell(m.rmse_log, 4), 10) << pad(cell(m.a1, 4), 10) << pad(cell(m.a2, 4), 10) << pad(cell(m.a3, 4), 10)
       << '\n';
  return os.str();
}

std::string odometry_table(const std::string& name, const TrajectoryMetrics& m) {
  std::ostringstream os;
  os << pad("seq", 8) << pad("length", 10) << pad("segments", 10) << pad("t_rel(%)", 10) << pad("r_rel(deg/100m)", 17)
     << pad("ATE(m)", 20) << '\n';
  for (const auto& l : m.per_length)
    os << pad(name, 8) << pad(cell(l.length, 2), 10) << pad(std::to_string(l.segments), 10)
       << pad(cell(l.trans_percent, 3), 10) << pad(cell(l.rot_deg_per_100m, 3), 17) << pad("", 20) << '\n';
  os << pad(name, 8) << pad("all", 10) << pad(std::to_string(m.segments.size()), 10)
     << pad(cell(m.trans_percent, 3), 10) << pad(cell(m.rot_deg_per_100m, 3), 17)
     << pad(cell(m.ate_rmse_mean, 4) + " +- " + cell(m.ate_rmse_std, 4), 20) << '\n';
  for (double l : m.missing_lengths) os << "# no segment of length " << format_number(l) << " m\n";
  return os.str();
}

}  // namespace selfvio
