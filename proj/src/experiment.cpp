#include "selfvio/experiment.hpp"

#include "selfvio/losses.hpp"
#include "selfvio/trainer.hpp"
#include "selfvio/warp_op.hpp"

#include <Eigen/Geometry>

#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace selfvio {

namespace fs = std::filesystem;

KeyValueConfig resolve_run_config(KeyValueConfig cfg) {
  for (const auto* key : {"height", "width", "imu_rows"}) {
    const std::string net_key = std::string("net.") + key, data_key = std::string("data.") + key;
    if (!cfg.contains(net_key) && cfg.contains(data_key)) cfg.set(net_key, *cfg.find(data_key));
  }
  return cfg;
}

namespace {

void write_validation_header(std::ostream& out) {
  out << "iteration,L_g,valid_pixels,abs_rel,sq_rel,rmse,rmse_log,a1,a2,a3,ate_mean,ate_std\n";
}

void write_validation_row(std::ostream& out, std::int64_t it, const ValidationSummary& v) {
  out << it << ',' << format_number(v.l_g) << ',' << v.valid_pixels;
  if (v.depth) {
    for (double x : {v.depth->abs_rel, v.depth->sq_rel, v.depth->rmse, v.depth->rmse_log, v.depth->a1, v.depth->a2,
                     v.depth->a3})
      out << ',' << format_number(x);
  } else {
    out << ",,,,,,,";
  }
  if (v.ate)
    out << ',' << format_number(v.ate->mean) << ',' << format_number(v.ate->std);
  else
    out << ",,";
  out << '\n';
}

}  // namespace

TrainRunResult train_run(const KeyValueConfig& raw, const fs::path& out, bool resume) {
  auto cfg = resolve_run_config(raw);
  // Extending a run must not move the decay points of the schedule already followed.
  if (resume && fs::exists(out / "config.txt") && cfg.get_int("train.lr_step", 0) == 0) {
    const auto before = TrainConfig::from_config(KeyValueConfig::load(out / "config.txt"));
    cfg.set("train.lr_step", std::to_string(before.effective_lr_step()));
  }
  const auto data = DatasetConfig::from_config(cfg);
  data.validate();
  const auto net = NetConfig::from_config(cfg);
  const auto train = TrainConfig::from_config(cfg);
  if (data.train.empty()) throw ConfigError("train_run: data.train names no sequence");

  const Dataset dataset(data);
  Trainer trainer(net, train, dataset.load_all(data.train));
  std::vector<SnippetSample> val;
  if (!data.val.empty()) val = dataset.load_all(data.val);

  fs::create_directories(out);
  const auto ckpt = out / "checkpoint.bin";
  const bool resuming = resume && fs::exists(ckpt);
  if (resume && !resuming) throw std::runtime_error("nothing to resume: " + ckpt.string() + " does not exist");
  if (resuming) (void)trainer.load_checkpoint(ckpt);

  KeyValueConfig effective = data.to_config();
  net.write(effective);
  train.write(effective);
  effective.save(out / "config.txt");

  if (resuming && fs::exists(out / "losses.csv")) {
    // Rows written after the checkpoint belong to steps that will be redone.
    auto rows = LossLog::read(out / "losses.csv");
    std::erase_if(rows, [&](const LossReport& r) { return r.iteration > trainer.iteration(); });
    LossLog rewrite(out / "losses.csv", false);
    for (const auto& r : rows) rewrite.write(r);
  }
  LossLog log(out / "losses.csv", resuming);
  std::ofstream val_csv(out / "validation.csv", resuming ? std::ios::app : std::ios::trunc);
  if (!resuming) write_validation_header(val_csv);

  TrainRunResult result;
  while (trainer.iteration() < train.max_iters) {
    const auto next_stop = std::min<std::int64_t>(
        train.max_iters, (trainer.iteration() / train.val_interval + 1) * train.val_interval);
    trainer.run(static_cast<int>(next_stop - trainer.iteration()), &log);
    if (!val.empty()) {
      const auto v = trainer.validate(val);
      write_validation_row(val_csv, trainer.iteration(), v);
      val_csv.flush();
      result.validations.push_back(v);
    }
    trainer.save_checkpoint(ckpt);
  }
  if (!fs::exists(ckpt)) trainer.save_checkpoint(ckpt);
  result.iterations = trainer.iteration();
  result.events = trainer.events();
  return result;
}

RunArtifacts open_run(const fs::path& run_dir, const std::optional<fs::path>& data_root) {
  std::vector<fs::path> missing;
  for (const auto& p : {run_dir / "config.txt", run_dir / "checkpoint.bin"})
    if (!fs::exists(p)) missing.push_back(p);
  if (!missing.empty()) throw MissingArtifacts(std::move(missing));
  RunArtifacts run;
  run.config = KeyValueConfig::load(run_dir / "config.txt");
  if (data_root) run.config.set("data.root", data_root->string());
  run.data = DatasetConfig::from_config(run.config);
  run.model = load_model(run_dir / "checkpoint.bin");
  return run;
}

double reference_photometric_loss(const std::vector<SnippetSample>& samples, double far) {
  if (samples.empty()) throw std::invalid_argument("reference_photometric_loss: no samples");
  const auto batch = make_batch(samples);
  const auto b = batch.size();
  const auto h = batch.target.size(2), w = batch.target.size(3);
  auto depth = torch::empty({b, 1, h, w}, torch::kFloat);
  std::array<torch::Tensor, 2> poses{torch::empty({b, 6}, torch::kFloat), torch::empty({b, 6}, torch::kFloat)};
  for (int64_t i = 0; i < b; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    if (!s.gt_depth || !s.gt_relative)
      throw std::invalid_argument("reference_photometric_loss: " + s.sequence + "/" + std::to_string(s.index) +
                                  " lacks ground truth");
    auto d = depth[i][0];
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        const float v = (*s.gt_depth)(y, x);
        d[y][x] = v > 0.0f ? v : static_cast<float>(far);
      }
    for (int k = 0; k < 2; ++k) {
      const auto p = matrix_to_pose((*s.gt_relative)[static_cast<std::size_t>(k)]);
      for (int c = 0; c < 3; ++c) {
        poses[static_cast<std::size_t>(k)][i][c] = p.translation[c];
        poses[static_cast<std::size_t>(k)][i][c + 3] = p.rotation[c];
      }
    }
  }
  std::vector<torch::Tensor> warped, valid;
  for (int k = 0; k < 2; ++k) {
    const auto o = warp_batch(batch.sources[static_cast<std::size_t>(k)], depth, poses[static_cast<std::size_t>(k)],
                              batch.intrinsics);
    warped.push_back(o.image);
    valid.push_back(o.valid);
  }
  return photometric_loss(batch.target, warped, valid).value.item<double>();
}

DepthEvaluation evaluate_depth(SelfVioModel& model, const std::vector<SnippetSample>& samples, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("evaluate_depth: no samples");
  for (const auto& s : samples)
    if (!s.gt_depth)
      throw std::invalid_argument("evaluate_depth: " + s.sequence + "/" + std::to_string(s.index) +
                                  " has no ground-truth depth");
  const auto pred = predict_depths(model, samples, batch_size);
  DepthEvaluation out;
  out.per_frame.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.per_frame.push_back(depth_metrics(pred[i], samples[i].gt_depth->cast<double>()));
  out.mean = average(out.per_frame);
  return out;
}

LengthPolicy parse_length_policy(const std::string& text) {
  LengthPolicy p;
  if (text == "auto") {
    p.fractions = {0.1, 0.2, 0.3, 0.4, 0.5};
  } else if (text.rfind("frac:", 0) == 0) {
    p.fractions = parse_lengths(text.substr(5));
    for (double f : p.fractions)
      if (f > 1.0) throw std::invalid_argument("length fractions must lie in (0, 1]");
  } else {
    p.meters = parse_lengths(text);
  }
  return p;
}

std::vector<double> resolve_lengths(const LengthPolicy& policy, const Trajectory& gt) {
  return policy.meters.empty() ? relative_lengths(gt, policy.fractions) : policy.meters;
}

std::vector<OdometryEvaluation> evaluate_odometry(SelfVioModel& model, const std::vector<SnippetSample>& samples,
                                                  const LengthPolicy& lengths, int batch_size) {
  std::vector<OdometryEvaluation> out;
  for (auto& seq : sequence_odometry(model, samples, batch_size)) {
    OdometryEvaluation e;
    if (!seq.ground_truth.empty()) {
      e.lengths = resolve_lengths(lengths, seq.ground_truth);
      e.metrics = evaluate_trajectory(seq.estimate, seq.ground_truth, e.lengths);
    }
    e.odometry = std::move(seq);
    out.push_back(std::move(e));
  }
  return out;
}

void write_odometry(const fs::path& dir, const std::vector<OdometryEvaluation>& results) {
  fs::create_directories(dir);
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& r : results) {
    const auto& name = r.odometry.sequence;
    write_kitti_poses(dir / (name + "_est.txt"), r.odometry.estimate);
    if (!r.odometry.ground_truth.empty()) write_kitti_poses(dir / (name + "_gt.txt"), r.odometry.ground_truth);
    std::ofstream att(dir / (name + "_attention.csv"));
    att << "index,visual,inertial\n";
    for (const auto& s : r.odometry.snippets)
      att << s.index << ',' << format_number(s.attention_visual) << ',' << format_number(s.attention_inertial) << '\n';
    nlohmann::ordered_json entry = {{"snippets", r.odometry.snippets.size()},
                                    {"ground_truth", static_cast<bool>(r.metrics)}};
    if (r.metrics) {
      entry["lengths_m"] = r.lengths;
      entry["metrics"] = to_json(*r.metrics);
    }
    doc[name] = entry;
  }
  std::ofstream(dir / "metrics.json") << doc.dump(2) << '\n';
}

std::vector<RobustnessRow> robustness_sweep(SelfVioModel& model, const SnippetSource& base,
                                            const std::vector<std::string>& sequences,
                                            const MiscalibrationConfig& config,
                                            const std::vector<double>& rotations_deg, int draws,
                                            const LengthPolicy& lengths, int batch_size) {
  if (draws < 1) throw std::invalid_argument("robustness_sweep: draws must be positive");
  std::vector<RobustnessRow> rows;
  for (double deg : rotations_deg) {
    for (int k = 0; k < draws; ++k) {
      auto cfg = config;
      cfg.rotation_deg = deg;
      cfg.seed = config.seed + static_cast<std::uint64_t>(k);
      const auto view = inject_miscalibration(base, cfg);
      for (const auto& r : evaluate_odometry(model, view.load_all(sequences), lengths, batch_size)) {
        if (!r.metrics) throw std::invalid_argument("robustness_sweep: sequence " + r.odometry.sequence +
                                                    " has no ground truth");
        RobustnessRow row;
        row.rotation_deg = deg;
        row.draw = k;
        row.sequence = r.odometry.sequence;
        const Eigen::AngleAxisd aa(view.rotation_offset());
        if (aa.angle() > 0.0) row.axis = aa.axis();
        row.metrics = *r.metrics;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

std::vector<double> mean_trans_error(const std::vector<RobustnessRow>& rows, const std::vector<double>& rotations_deg) {
  std::vector<double> out;
  for (double deg : rotations_deg) {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
      if (r.rotation_deg == deg) {
        sum += r.metrics.trans_percent;
        ++n;
      }
    out.push_back(n > 0 ? sum / n : 0.0);
  }
  return out;
}

void write_robustness_csv(const fs::path& path, const std::vector<RobustnessRow>& rows) {
  std::ofstream out(path);
  out << "rotation_deg,draw,sequence,axis_x,axis_y,axis_z,t_rel_percent,r_rel_deg_per_100m,ate_mean_m\n";
  for (const auto& r : rows)
    out << format_number(r.rotation_deg) << ',' << r.draw << ',' << r.sequence << ',' << format_number(r.axis.x())
        << ',' << format_number(r.axis.y()) << ',' << format_number(r.axis.z()) << ','
        << format_number(r.metrics.trans_percent) << ',' << format_number(r.metrics.rot_deg_per_100m) << ','
        << format_number(r.metrics.ate_rmse_mean) << '\n';
}

namespace {

std::string join_paths(const std::vector<fs::path>& paths) {
  std::string s;
  for (const auto& p : paths) s += "\n  " + p.string();
  return s;
}

}  // namespace

MissingArtifacts::MissingArtifacts(std::vector<fs::path> missing)
    : std::runtime_error("missing run artifacts:" + join_paths(missing)), missing_(std::move(missing)) {}

PlotExport export_plots(const fs::path& run_dir) {
  const auto odo = run_dir / "odometry";
  std::vector<fs::path> missing;
  for (const auto& p : {run_dir / "losses.csv", odo / "metrics.json"})
    if (!fs::exists(p)) missing.push_back(p);
  nlohmann::ordered_json metrics;
  if (fs::exists(odo / "metrics.json")) {
    std::ifstream in(odo / "metrics.json");
    metrics = nlohmann::ordered_json::parse(in);
    for (const auto& [name, entry] : metrics.items()) {
      for (const auto* suffix : {"_est.txt", "_attention.csv"})
        if (!fs::exists(odo / (name + suffix))) missing.push_back(odo / (name + suffix));
      if (entry.at("ground_truth").get<bool>() && !fs::exists(odo / (name + "_gt.txt")))
        missing.push_back(odo / (name + "_gt.txt"));
    }
  }
  if (!missing.empty()) throw MissingArtifacts(std::move(missing));

  const auto plots = run_dir / "plots";
  fs::create_directories(plots);
  PlotExport result;
  result.ground_truth = true;

  {
    const auto rows = LossLog::read(run_dir / "losses.csv");
    std::ofstream out(plots / "loss_curve.csv");
    out << "iteration,L_g,L_d_gen,L_d_disc,L_final\n";
    for (const auto& r : rows)
      out << r.iteration << ',' << format_number(r.l_g) << ',' << format_number(r.l_d_gen) << ','
          << format_number(r.l_d_disc) << ',' << format_number(r.l_final) << '\n';
    result.written.push_back(plots / "loss_curve.csv");
  }

  for (const auto& [name, entry] : metrics.items()) {
    const bool has_gt = entry.at("ground_truth").get<bool>();
    result.ground_truth = result.ground_truth && has_gt;
    // Top-down view: camera x against camera z (forward).
    const auto est = read_kitti_poses(odo / (name + "_est.txt"));
    Trajectory gt;
    if (has_gt) gt = read_kitti_poses(odo / (name + "_gt.txt"));
    if (has_gt && gt.size() != est.size())
      throw std::runtime_error("export_plots: " + name + " estimate and ground truth differ in length");
    {
      const auto path = plots / (name + "_trajectory.csv");
      std::ofstream out(path);
      out << (has_gt ? "frame,est_x,est_y,gt_x,gt_y\n" : "frame,est_x,est_y\n");
      for (std::size_t i = 0; i < est.size(); ++i) {
        const auto& p = est.poses[i];
        out << i << ',' << format_number(p(0, 3)) << ',' << format_number(p(2, 3));
        if (has_gt) out << ',' << format_number(gt.poses[i](0, 3)) << ',' << format_number(gt.poses[i](2, 3));
        out << '\n';
      }
      result.written.push_back(path);
    }
    if (has_gt) {
      const auto path = plots / (name + "_errors.csv");
      std::ofstream out(path);
      out << "length_m,segments,t_rel_percent,r_rel_deg_per_100m\n";
      for (const auto& l : entry.at("metrics").at("per_length"))
        out << format_number(l.at("length_m").get<double>()) << ',' << l.at("segments").get<std::size_t>() << ','
            << format_number(l.at("t_rel_percent").get<double>()) << ','
            << format_number(l.at("r_rel_deg_per_100m").get<double>()) << '\n';
      result.written.push_back(path);
    }
    {
      const auto path = plots / (name + "_attention.csv");
      fs::copy_file(odo / (name + "_attention.csv"), path, fs::copy_options::overwrite_existing);
      result.written.push_back(path);
    }
  }
  return result;
}

}  // namespace selfvio
