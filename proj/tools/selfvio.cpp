// selfvio: dataset generation, training, evaluation, miscalibration sweeps and
// plot-data export. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include "selfvio/experiment.hpp"
#include "selfvio/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <torch/version.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace selfvio;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

json versions() {
  return {{"selfvio", kVersion},
          {"torch", TORCH_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}};
}

/// Every command leaves one of these beside its outputs.
void write_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& argv,
                    json details) {
  json m = {{"command", command}, {"argv", argv}, {"versions", versions()}};
  for (auto& [k, v] : details.items()) m[k] = v;
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  std::ofstream(path) << m.dump(2) << '\n';
}

json path_list(const std::vector<fs::path>& paths) {
  json out = json::array();
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

/// --data, then SELFVIO_DATA_ROOT, then whatever the config says.
std::optional<fs::path> data_root_override(const std::string& flag) {
  if (!flag.empty()) return fs::absolute(flag);
  if (const char* env = std::getenv("SELFVIO_DATA_ROOT"); env && *env) return fs::absolute(env);
  return std::nullopt;
}

Eigen::Vector3d parse_vec3(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) throw std::invalid_argument("expected x,y,z but got '" + text + "'");
  return {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
}

std::vector<std::string> split_sequences(const DatasetConfig& data, const std::string& split_name) {
  if (split_name == "train") return data.train;
  if (split_name == "val") return data.val;
  if (split_name == "test") return data.test;
  throw std::invalid_argument("unknown split '" + split_name + "' (train, val, test)");
}

std::vector<std::string> pick_sequences(const DatasetConfig& data, const std::string& split_name) {
  auto seqs = split_sequences(data, split_name);
  if (seqs.empty()) throw std::runtime_error("split '" + split_name + "' names no sequence");
  return seqs;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string scene = "layers", motion = "wiggle", out, seq = "00", split = "train";
  int frames = 50, width = 160, height = 48, supersample = 3;
  double fx = 0, fy = 0, cx = -1, cy = -1;
  std::uint64_t seed = 0;
};

int run_synth(const SynthArgs& a, const std::vector<std::string>& argv) {
  CameraIntrinsics<double> k;
  k.width = a.width;
  k.height = a.height;
  k.fx = a.fx > 0 ? a.fx : 0.625 * a.width;
  k.fy = a.fy > 0 ? a.fy : k.fx;
  k.cx = a.cx >= 0 ? a.cx : (a.width - 1) / 2.0;
  k.cy = a.cy >= 0 ? a.cy : (a.height - 1) / 2.0;
  auto scene = make_scene(a.scene, make_motion(a.motion), a.frames, k, a.seed);
  scene.supersample = a.supersample;
  // Stored configs name the root absolutely so runs work from any directory.
  const auto out = fs::absolute(a.out);
  auto cfg = generate_synthetic(scene, out, a.seq);
  if (a.split != "train") {
    std::erase(cfg.train, a.seq);
    (a.split == "val" ? cfg.val : a.split == "test" ? cfg.test : throw std::invalid_argument("bad split")).push_back(a.seq);
    cfg.validate();
    cfg.to_config().save(out / "dataset.cfg");
  }
  write_manifest(out / ("manifest_synth_" + a.seq + ".json"), "synth", argv,
                 {{"seed", a.seed},
                  {"scene", a.scene},
                  {"motion", a.motion},
                  {"frames", a.frames},
                  {"supersample", a.supersample},
                  {"sequence", a.seq},
                  {"split", a.split},
                  {"intrinsics", {k.fx, k.fy, k.cx, k.cy, k.width, k.height}},
                  {"dataset_config", cfg.to_config().to_text()}});
  std::cout << "wrote sequence " << a.seq << " (" << a.frames << " frames) to " << a.out << '\n';
  return 0;
}

struct TrainArgs {
  std::string config, data, out;
  int max_iters = -1;
  std::vector<std::string> overrides;
  bool resume = false;
};

int run_train(const TrainArgs& a, const std::vector<std::string>& argv) {
  KeyValueConfig cfg;
  if (!a.config.empty()) cfg = KeyValueConfig::load(a.config);
  if (const auto root = data_root_override(a.data)) cfg.set("data.root", root->string());
  // A data root that holds a generated dataset.cfg supplies the data.* keys the config leaves out.
  if (const auto root = cfg.find("data.root"); root && fs::exists(fs::path(*root) / "dataset.cfg")) {
    const auto generated = KeyValueConfig::load(fs::path(*root) / "dataset.cfg");
    for (const auto& [k, v] : generated.values())
      if (!cfg.contains(k)) cfg.set(k, v);
  }
  cfg.apply_overrides(a.overrides);
  if (a.max_iters > 0) {
    cfg.set("train.max_iters", std::to_string(a.max_iters));
    if (cfg.get_int("train.val_interval", 1000) > a.max_iters) cfg.set("train.val_interval", std::to_string(a.max_iters));
  }
  const auto result = train_run(cfg, a.out, a.resume);
  const auto effective = KeyValueConfig::load(fs::path(a.out) / "config.txt");
  write_manifest(fs::path(a.out) / "manifest.json", "train", argv,
                 {{"seed", effective.get_int("train.seed", 1)},
                  {"resumed", a.resume},
                  {"iterations", result.iterations},
                  {"config", effective.to_text()},
                  {"events", result.events},
                  {"outputs", {"config.txt", "losses.csv", "validation.csv", "checkpoint.bin"}}});
  std::cout << "trained " << result.iterations << " iterations into " << a.out << '\n';
  if (!result.validations.empty()) std::cout << "last validation L_g " << result.validations.back().l_g << '\n';
  return 0;
}

struct EvalDepthArgs {
  std::string run, data, split = "test", out;
  int batch = 8;
};

int run_eval_depth(const EvalDepthArgs& a, const std::vector<std::string>& argv) {
  auto run = open_run(a.run, data_root_override(a.data));
  const Dataset dataset(run.data);
  const auto seqs = pick_sequences(run.data, a.split);
  const auto eval = evaluate_depth(run.model, dataset.load_all(seqs), a.batch);
  const fs::path out = a.out.empty() ? fs::path(a.run) : fs::path(a.out);
  fs::create_directories(out);
  json doc = {{"split", a.split}, {"sequences", seqs}, {"frames", eval.per_frame.size()}, {"mean", to_json(eval.mean)}};
  std::ofstream(out / "depth_metrics.json") << doc.dump(2) << '\n';
  write_manifest(out / "manifest_eval_depth.json", "eval-depth", argv,
                 {{"run", a.run}, {"split", a.split}, {"data_root", run.data.root.string()},
                  {"outputs", {"depth_metrics.json"}}});
  std::cout << depth_table({{a.split, eval.mean}});
  return 0;
}

struct EvalOdomArgs {
  std::string est, gt, lengths, run, data, split = "test", out;
  int batch = 8;
};

int run_eval_odom(const EvalOdomArgs& a, const std::vector<std::string>& argv) {
  if (!a.est.empty()) {
    const auto est = read_kitti_poses(a.est);
    const auto gt = read_kitti_poses(a.gt);
    const auto lengths = resolve_lengths(parse_length_policy(a.lengths.empty() ? "desk" : a.lengths), gt);
    const auto m = evaluate_trajectory(est, gt, lengths);
    const auto table = odometry_table(fs::path(a.est).stem().string(), m);
    std::cout << table;
    if (!a.out.empty()) {
      const fs::path out(a.out);
      fs::create_directories(out);
      std::ofstream(out / "odometry_metrics.json") << json{{"lengths_m", lengths}, {"metrics", to_json(m)}}.dump(2)
                                                   << '\n';
      std::ofstream(out / "odometry_table.txt") << table;
      write_manifest(out / "manifest_eval_odom.json", "eval-odom", argv,
                     {{"est", a.est}, {"gt", a.gt}, {"lengths_m", lengths},
                      {"outputs", {"odometry_metrics.json", "odometry_table.txt"}}});
    }
    return 0;
  }
  auto run = open_run(a.run, data_root_override(a.data));
  const Dataset dataset(run.data);
  const auto seqs = pick_sequences(run.data, a.split);
  const auto results =
      evaluate_odometry(run.model, dataset.load_all(seqs), parse_length_policy(a.lengths.empty() ? "auto" : a.lengths),
                        a.batch);
  const fs::path out = a.out.empty() ? fs::path(a.run) / "odometry" : fs::path(a.out);
  write_odometry(out, results);
  bool all_gt = true;
  for (const auto& r : results) {
    if (r.metrics)
      std::cout << odometry_table(r.odometry.sequence, *r.metrics);
    else
      std::cout << r.odometry.sequence << ": no ground truth, trajectory only\n";
    all_gt = all_gt && r.metrics.has_value();
  }
  write_manifest(out / "manifest.json", "eval-odom", argv,
                 {{"run", a.run}, {"split", a.split}, {"data_root", run.data.root.string()},
                  {"lengths", a.lengths.empty() ? "auto" : a.lengths}, {"ground_truth", all_gt}});
  return 0;
}

struct InjectArgs {
  std::string run, data, split = "test", out, rotations = "5,30", axis = "0,0,1", lever = "0,0,0", lengths = "auto";
  double kappa = 1.0, time_offset_ms = 0.0;
  std::uint64_t seed = 0;
  int draws = 5, batch = 8;
};

int run_inject(const InjectArgs& a, const std::vector<std::string>& argv) {
  auto run = open_run(a.run, data_root_override(a.data));
  const Dataset dataset(run.data);
  const auto seqs = pick_sequences(run.data, a.split);
  MiscalibrationConfig mc;
  mc.kappa = a.kappa;
  mc.mean_axis = parse_vec3(a.axis);
  mc.translation = parse_vec3(a.lever);
  mc.time_offset_ms = a.time_offset_ms;
  mc.seed = a.seed;
  mc.validate();
  const auto rotations = parse_lengths(a.rotations);  // positive comma-separated numbers
  const auto rows =
      robustness_sweep(run.model, dataset, seqs, mc, rotations, a.draws, parse_length_policy(a.lengths), a.batch);
  const fs::path out = a.out.empty() ? fs::path(a.run) / "robustness" : fs::path(a.out);
  fs::create_directories(out);
  write_robustness_csv(out / "robustness.csv", rows);
  const auto means = mean_trans_error(rows, rotations);
  json summary = json::array();
  std::cout << "rotation_deg  mean t_rel(%)\n";
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    summary.push_back({{"rotation_deg", rotations[i]}, {"mean_t_rel_percent", means[i]}});
    std::cout << rotations[i] << "  " << means[i] << '\n';
  }
  std::ofstream(out / "robustness_summary.json") << summary.dump(2) << '\n';
  write_manifest(out / "manifest.json", "inject", argv,
                 {{"run", a.run}, {"split", a.split}, {"seed", a.seed}, {"kappa", a.kappa}, {"axis", a.axis},
                  {"lever_arm_m", a.lever}, {"time_offset_ms", a.time_offset_ms}, {"draws", a.draws},
                  {"rotations_deg", rotations}, {"lengths", a.lengths},
                  {"outputs", {"robustness.csv", "robustness_summary.json"}}});
  return 0;
}

int run_export(const std::string& run_dir, const std::vector<std::string>& argv) {
  const auto result = export_plots(run_dir);
  write_manifest(fs::path(run_dir) / "plots" / "manifest.json", "export-plots", argv,
                 {{"run", run_dir}, {"ground_truth", result.ground_truth}, {"outputs", path_list(result.written)}});
  for (const auto& p : result.written) std::cout << p.string() << '\n';
  if (!result.ground_truth) std::cout << "note: some sequences had no ground truth; gt columns omitted\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Self-supervised visual-inertial odometry toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render a synthetic sequence into the dataset layout");
  synth->add_option("--scene", sa.scene, "plane, ground or layers")
      ->check(CLI::IsMember({"plane", "ground", "layers"}));
  synth->add_option("--motion", sa.motion, "static, line, circle or wiggle")
      ->check(CLI::IsMember({"static", "line", "circle", "wiggle"}));
  synth->add_option("--frames", sa.frames, "number of frames")->check(CLI::Range(3, 100000));
  synth->add_option("--out", sa.out, "dataset root")->required();
  synth->add_option("--seq", sa.seq, "sequence name");
  synth->add_option("--split", sa.split, "split to list the sequence under")
      ->check(CLI::IsMember({"train", "val", "test"}));
  synth->add_option("--width", sa.width, "image width")->check(CLI::PositiveNumber);
  synth->add_option("--height", sa.height, "image height")->check(CLI::PositiveNumber);
  synth->add_option("--fx", sa.fx, "focal length x (default 0.625 * width)");
  synth->add_option("--fy", sa.fy, "focal length y (default fx)");
  synth->add_option("--cx", sa.cx, "principal point x (default image centre)");
  synth->add_option("--cy", sa.cy, "principal point y (default image centre)");
  synth->add_option("--seed", sa.seed, "texture seed");
  synth->add_option("--supersample", sa.supersample, "rays per pixel side for anti-aliasing")
      ->check(CLI::Range(1, 16));

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoint, loss CSV and manifest");
  train->add_option("--config", ta.config, "key = value config file (data.*, net.*, train.*)")
      ->check(CLI::ExistingFile);
  train->add_option("--data", ta.data, "data root (overrides SELFVIO_DATA_ROOT and data.root)");
  train->add_option("--out", ta.out, "run directory")->required();
  train->add_option("--max-iters", ta.max_iters, "override train.max_iters")->check(CLI::PositiveNumber);
  train->add_option("--set", ta.overrides, "key=value override, repeatable");
  train->add_flag("--resume", ta.resume, "continue from <out>/checkpoint.bin");

  EvalDepthArgs da;
  auto* eval_depth = app.add_subcommand("eval-depth", "Depth metrics of a trained run on a split");
  eval_depth->add_option("--run", da.run, "run directory")->required()->check(CLI::ExistingDirectory);
  eval_depth->add_option("--data", da.data, "data root override");
  eval_depth->add_option("--split", da.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_depth->add_option("--out", da.out, "output directory (default: the run)");
  eval_depth->add_option("--batch", da.batch, "batch size")->check(CLI::PositiveNumber);

  EvalOdomArgs oa;
  auto* eval_odom = app.add_subcommand("eval-odom", "Odometry errors from pose files or a trained run");
  auto* est_opt = eval_odom->add_option("--est", oa.est, "estimated poses (KITTI format)")->check(CLI::ExistingFile);
  auto* gt_opt = eval_odom->add_option("--gt", oa.gt, "ground-truth poses (KITTI format)")->check(CLI::ExistingFile);
  auto* run_opt = eval_odom->add_option("--run", oa.run, "run directory")->check(CLI::ExistingDirectory);
  est_opt->needs(gt_opt);
  gt_opt->needs(est_opt);
  run_opt->excludes(est_opt)->excludes(gt_opt);
  eval_odom->add_option("--lengths", oa.lengths,
                        "segment lengths: meters 'a,b,..', 'kitti', 'kitti-short', 'desk', 'auto' or 'frac:a,b,..' "
                        "(default desk for files, auto for runs)");
  eval_odom->add_option("--data", oa.data, "data root override");
  eval_odom->add_option("--split", oa.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval_odom->add_option("--out", oa.out, "output directory");
  eval_odom->add_option("--batch", oa.batch, "batch size")->check(CLI::PositiveNumber);

  InjectArgs ia;
  auto* inject = app.add_subcommand("inject", "Evaluate under injected camera/IMU miscalibration");
  inject->add_option("--run", ia.run, "run directory")->required()->check(CLI::ExistingDirectory);
  inject->add_option("--data", ia.data, "data root override");
  inject->add_option("--split", ia.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  inject->add_option("--rotations", ia.rotations, "rotation magnitudes in degrees, comma separated");
  inject->add_option("--kappa", ia.kappa, "vMF concentration of the offset axis")->check(CLI::PositiveNumber);
  inject->add_option("--axis", ia.axis, "vMF mean axis x,y,z");
  inject->add_option("--lever", ia.lever, "translational offset x,y,z in meters");
  inject->add_option("--time-offset-ms", ia.time_offset_ms, "IMU time offset in milliseconds");
  inject->add_option("--seed", ia.seed, "seed of the first axis draw");
  inject->add_option("--draws", ia.draws, "axis draws per magnitude")->check(CLI::PositiveNumber);
  inject->add_option("--lengths", ia.lengths, "segment lengths, as for eval-odom");
  inject->add_option("--out", ia.out, "output directory (default <run>/robustness)");
  inject->add_option("--batch", ia.batch, "batch size")->check(CLI::PositiveNumber);

  std::string plot_run;
  auto* plots = app.add_subcommand("export-plots", "Write plot-ready CSVs for a finished run");
  plots->add_option("--run", plot_run, "run directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*synth) return run_synth(sa, args);
    if (*train) return run_train(ta, args);
    if (*eval_depth) return run_eval_depth(da, args);
    if (*eval_odom) {
      if (oa.est.empty() && oa.run.empty()) {
        std::cerr << "eval-odom: give --est and --gt, or --run\n";
        return 1;
      }
      return run_eval_odom(oa, args);
    }
    if (*inject) return run_inject(ia, args);
    if (*plots) return run_export(plot_run, args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
