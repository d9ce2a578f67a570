#include "selfvio/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace selfvio {

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  const auto n = values.size();
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

DepthMetrics depth_metrics(const DepthMap<double>& pred, const DepthMap<double>& gt,
                           const DepthMetricsOptions& options) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols())
    throw std::invalid_argument("depth_metrics: prediction and ground truth shapes differ");

  std::vector<double> p, g;
  p.reserve(static_cast<std::size_t>(gt.size()));
  g.reserve(static_cast<std::size_t>(gt.size()));
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    const double gv = gt.data()[i], pv = pred.data()[i];
    if (!(gv > 0.0) || gv > options.cap || !std::isfinite(gv)) continue;
    if (!(pv > 0.0) || !std::isfinite(pv)) continue;
    g.push_back(gv);
    p.push_back(pv);
  }
  if (g.empty()) throw std::invalid_argument("depth_metrics: no valid ground-truth pixels");

  DepthMetrics m;
  m.scale = options.median_scaling ? median(g) / median(p) : 1.0;
  m.count = g.size();
  const auto n = static_cast<double>(g.size());
  double sq = 0, sq_log = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double pv = std::clamp(p[i] * m.scale, options.min_depth, options.cap);
    const double gv = g[i];
    const double diff = pv - gv;
    m.abs_rel += std::abs(diff) / gv;
    m.sq_rel += diff * diff / gv;
    sq += diff * diff;
    const double ld = std::log(pv) - std::log(gv);
    sq_log += ld * ld;
    const double ratio = std::max(pv / gv, gv / pv);
    m.a1 += ratio < 1.25 ? 1.0 : 0.0;
    m.a2 += ratio < 1.25 * 1.25 ? 1.0 : 0.0;
    m.a3 += ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0;
  }
  m.abs_rel /= n;
  m.sq_rel /= n;
  m.rmse = std::sqrt(sq / n);
  m.rmse_log = std::sqrt(sq_log / n);
  m.a1 /= n;
  m.a2 /= n;
  m.a3 /= n;
  return m;
}

DepthMetrics average(const std::vector<DepthMetrics>& per_frame) {
  DepthMetrics out;
  if (per_frame.empty()) return out;
  out.scale = 0;
  for (const auto& m : per_frame) {
    out.abs_rel += m.abs_rel;
    out.sq_rel += m.sq_rel;
    out.rmse += m.rmse;
    out.rmse_log += m.rmse_log;
    out.a1 += m.a1;
    out.a2 += m.a2;
    out.a3 += m.a3;
    out.scale += m.scale;
    out.count += m.count;
  }
  const auto n = static_cast<double>(per_frame.size());
  out.abs_rel /= n;
  out.sq_rel /= n;
  out.rmse /= n;
  out.rmse_log /= n;
  out.a1 /= n;
  out.a2 /= n;
  out.a3 /= n;
  out.scale /= n;
  return out;
}

std::vector<double> kitti_lengths() { return {100, 200, 300, 400, 500, 600, 700, 800}; }
std::vector<double> kitti_short_lengths() { return {100, 200, 300, 400, 500}; }
std::vector<double> desk_lengths() { return {7, 14, 21, 28, 35}; }

std::vector<double> trajectory_distances(const Trajectory& gt) {
  std::vector<double> dist(gt.size(), 0.0);
  for (std::size_t i = 1; i < gt.size(); ++i)
    dist[i] = dist[i - 1] + (gt.poses[i].topRightCorner<3, 1>() - gt.poses[i - 1].topRightCorner<3, 1>()).norm();
  return dist;
}

SE3Matrix<double> segment_pose_error(const Trajectory& est, const Trajectory& gt, std::size_t i, std::size_t j) {
  const SE3Matrix<double> delta_est = compose(invert(est.poses[i]), est.poses[j]);
  const SE3Matrix<double> delta_gt = compose(invert(gt.poses[i]), gt.poses[j]);
  return compose(invert(delta_est), delta_gt);
}

TrajectoryMetrics kitti_relative_errors(const Trajectory& est, const Trajectory& gt,
                                        const std::vector<double>& lengths, double tolerance) {
  if (est.size() != gt.size()) throw std::invalid_argument("kitti_relative_errors: trajectories differ in length");
  const auto dist = trajectory_distances(gt);
  TrajectoryMetrics out;
  for (const double len : lengths) {
    LengthErrors le;
    le.length = len;
    double t_sum = 0, r_sum = 0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      // Coarse window by binary search, exact predicate below.
      const double lo = dist[i] + len - 2.0 * tolerance;
      auto it = std::lower_bound(dist.begin() + static_cast<std::ptrdiff_t>(i) + 1, dist.end(), lo);
      for (auto j = static_cast<std::size_t>(it - dist.begin()); j < dist.size(); ++j) {
        const double seg = dist[j] - dist[i];
        if (seg > len + 2.0 * tolerance) break;
        if (std::abs(seg - len) > tolerance) continue;
        const auto err = segment_pose_error(est, gt, i, j);
        SegmentError se;
        se.first = i;
        se.last = j;
        se.length = len;
        se.trans_error = err.topRightCorner<3, 1>().norm() / len;
        se.rot_error = rotation_angle(err) / len;
        t_sum += se.trans_error;
        r_sum += se.rot_error;
        ++le.segments;
        out.segments.push_back(se);
      }
    }
    if (le.segments == 0) {
      out.missing_lengths.push_back(len);
      continue;
    }
    le.trans_percent = 100.0 * t_sum / static_cast<double>(le.segments);
    le.rot_deg_per_100m = 100.0 * (180.0 / std::numbers::pi) * r_sum / static_cast<double>(le.segments);
    out.per_length.push_back(le);
  }
  if (!out.segments.empty()) {
    double t = 0, r = 0;
    for (const auto& s : out.segments) {
      t += s.trans_error;
      r += s.rot_error;
    }
    const auto n = static_cast<double>(out.segments.size());
    out.trans_percent = 100.0 * t / n;
    out.rot_deg_per_100m = 100.0 * (180.0 / std::numbers::pi) * r / n;
  }
  return out;
}

double position_rmse(const Eigen::Matrix3Xd& a, const Eigen::Matrix3Xd& b) {
  if (a.cols() != b.cols() || a.cols() == 0) throw std::invalid_argument("position_rmse: bad point sets");
  return std::sqrt((a - b).colwise().squaredNorm().mean());
}

AteStats ate_snippets(const Trajectory& est, const Trajectory& gt, std::size_t snippet_len) {
  if (est.size() != gt.size()) throw std::invalid_argument("ate_snippets: trajectories differ in length");
  if (snippet_len == 0 || est.size() < snippet_len)
    throw std::invalid_argument("ate_snippets: trajectory shorter than snippet length");
  const auto pe = est.positions();
  const auto pg = gt.positions();
  AteStats stats;
  const auto len = static_cast<Eigen::Index>(snippet_len);
  for (Eigen::Index i = 0; i + len <= pe.cols(); ++i) {
    const Points3<double> src = pe.middleCols(i, len);
    const Points3<double> dst = pg.middleCols(i, len);
    const auto sim = selfvio::umeyama<double>(src, dst, true, true);
    stats.per_snippet.push_back(position_rmse(sim.apply(src), dst));
  }
  const auto n = static_cast<double>(stats.per_snippet.size());
  for (const double e : stats.per_snippet) stats.mean += e / n;
  for (const double e : stats.per_snippet) stats.std += (e - stats.mean) * (e - stats.mean) / n;
  stats.std = std::sqrt(stats.std);
  return stats;
}

AlignmentResult umeyama_align(const Trajectory& est, const Trajectory& gt, int dof) {
  if (dof != 6 && dof != 7) throw std::invalid_argument("umeyama_align: dof must be 6 or 7");
  if (est.size() != gt.size()) throw std::invalid_argument("umeyama_align: trajectories differ in length");
  const Points3<double> src = est.positions();
  const Points3<double> dst = gt.positions();
  AlignmentResult out;
  out.transform = selfvio::umeyama<double>(src, dst, dof == 7);
  const auto& tf = out.transform;
  out.aligned.timestamps = est.timestamps;
  for (const auto& p : est.poses) {
    SE3Matrix<double> q = p;
    q.topLeftCorner<3, 3>() = tf.rotation * p.topLeftCorner<3, 3>();
    q.topRightCorner<3, 1>() = tf.scale * tf.rotation * p.topRightCorner<3, 1>() + tf.translation;
    out.aligned.poses.push_back(q);
  }
  out.rmse = position_rmse(out.aligned.positions(), dst);
  return out;
}

}  // namespace selfvio
