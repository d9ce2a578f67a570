#include "learn_support.hpp"

#include "selfvio/experiment.hpp"

#include <doctest.h>

#include <fstream>
#include <json.hpp>

using namespace selfvio;
namespace fs = std::filesystem;

namespace {

DatasetConfig tiny_dataset(const fs::path& root, int frames = 7) {
  const auto scene = make_scene("layers", make_motion("wiggle"), frames, testing::tiny_camera(), 3);
  return generate_synthetic(scene, root, "00");
}

KeyValueConfig tiny_run_config(const DatasetConfig& data, int iters) {
  auto cfg = data.to_config();
  testing::tiny_net().write(cfg);
  cfg.apply_overrides({"train.batch_size=4", "train.augment=true", "train.seed=5", "train.lr_step=3",
                       "train.max_iters=" + std::to_string(iters), "train.val_interval=3"});
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("length policies") {
  CHECK(parse_length_policy("auto").fractions == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
  CHECK(parse_length_policy("frac:0.25").fractions == std::vector<double>{0.25});
  CHECK(parse_length_policy("desk").meters == desk_lengths());
  CHECK(parse_length_policy("3,6").meters == std::vector<double>{3, 6});
  CHECK_THROWS_AS((void)parse_length_policy("frac:1.5"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_length_policy("frac:"), std::invalid_argument);
}

TEST_CASE("a resumed run writes the same loss log as an uninterrupted one") {
  testing::TempDir dir("exp_resume");
  const auto data = tiny_dataset(dir.path() / "data");
  (void)train_run(tiny_run_config(data, 6), dir.path() / "full");
  (void)train_run(tiny_run_config(data, 3), dir.path() / "split");
  const auto more = train_run(tiny_run_config(data, 6), dir.path() / "split", true);
  CHECK(more.iterations == 6);
  CHECK(LossLog::read(dir.path() / "full" / "losses.csv").size() == 6);
  CHECK(slurp(dir.path() / "full" / "losses.csv") == slurp(dir.path() / "split" / "losses.csv"));
  CHECK_THROWS((void)train_run(tiny_run_config(data, 6), dir.path() / "nothing", true));
}

TEST_CASE("odometry files and plot export of a finished run") {
  testing::TempDir dir("exp_plots");
  const auto data = tiny_dataset(dir.path() / "data", 8);
  const auto run_dir = dir.path() / "run";
  (void)train_run(tiny_run_config(data, 3), run_dir);
  auto run = open_run(run_dir);
  const auto samples = Dataset(run.data).load_all(run.data.train);
  const auto results = evaluate_odometry(run.model, samples, parse_length_policy("auto"));
  REQUIRE(results.size() == 1);
  REQUIRE(results[0].metrics.has_value());
  CHECK(results[0].lengths.size() == 5);
  write_odometry(run_dir / "odometry", results);

  const auto plots = export_plots(run_dir);
  CHECK(plots.ground_truth);
  CHECK(plots.written.size() == 4);
  const auto traj = lines(run_dir / "plots" / "00_trajectory.csv");
  CHECK(traj.front() == "frame,est_x,est_y,gt_x,gt_y");
  CHECK(traj.size() == results[0].odometry.estimate.size() + 1);
  CHECK(results[0].odometry.estimate.size() == results[0].odometry.ground_truth.size());
  CHECK(lines(run_dir / "plots" / "00_attention.csv").size() == samples.size() + 1);
  CHECK(lines(run_dir / "plots" / "00_errors.csv").size() == results[0].metrics->per_length.size() + 1);
  CHECK(lines(run_dir / "plots" / "loss_curve.csv").size() == 4);

  std::ifstream in(run_dir / "odometry" / "metrics.json");
  const auto doc = nlohmann::json::parse(in);
  CHECK(doc.at("00").at("ground_truth").get<bool>());
  CHECK(doc.at("00").at("snippets").get<std::size_t>() == samples.size());
}

TEST_CASE("plot export names every missing input") {
  testing::TempDir dir("exp_missing");
  try {
    (void)export_plots(dir.path());
    FAIL("expected MissingArtifacts");
  } catch (const MissingArtifacts& e) {
    CHECK(e.missing().size() == 2);
    CHECK(std::string(e.what()).find("losses.csv") != std::string::npos);
  }
  fs::create_directories(dir.path() / "odometry");
  std::ofstream(dir.path() / "losses.csv") << "iteration\n";
  std::ofstream(dir.path() / "odometry" / "metrics.json") << R"({"05": {"snippets": 3, "ground_truth": true}})";
  try {
    (void)export_plots(dir.path());
    FAIL("expected MissingArtifacts");
  } catch (const MissingArtifacts& e) {
    CHECK(e.missing().size() == 3);  // estimate, attention and ground truth of sequence 05
  }
  CHECK_FALSE(fs::exists(dir.path() / "plots"));
}

TEST_CASE("sequences without ground truth still get trajectories") {
  testing::TempDir dir("exp_nogt");
  const auto data = tiny_dataset(dir.path() / "data");
  fs::remove(data.root / "00" / "poses.txt");
  const auto run_dir = dir.path() / "run";
  (void)train_run(tiny_run_config(data, 3), run_dir);
  auto run = open_run(run_dir);
  const auto results = evaluate_odometry(run.model, Dataset(run.data).load_all(run.data.train), parse_length_policy("auto"));
  REQUIRE(results.size() == 1);
  CHECK_FALSE(results[0].metrics.has_value());
  CHECK(results[0].odometry.estimate.size() > 0);
  write_odometry(run_dir / "odometry", results);
  CHECK_FALSE(fs::exists(run_dir / "odometry" / "00_gt.txt"));
  const auto plots = export_plots(run_dir);
  CHECK_FALSE(plots.ground_truth);
  CHECK(lines(run_dir / "plots" / "00_trajectory.csv").front() == "frame,est_x,est_y");
  CHECK_FALSE(fs::exists(run_dir / "plots" / "00_errors.csv"));
}

TEST_CASE("robustness sweep reuses the axis draws across magnitudes and is deterministic") {
  testing::TempDir dir("exp_sweep");
  const auto data = tiny_dataset(dir.path() / "data");
  torch::manual_seed(2);
  auto net = testing::tiny_net();
  SelfVioModel model(net);
  const Dataset base(data);
  MiscalibrationConfig mc;
  mc.kappa = 1.0;
  mc.seed = 40;
  const std::vector<double> rot{5.0, 30.0};
  const auto rows = robustness_sweep(model, base, data.train, mc, rot, 3, parse_length_policy("auto"));
  REQUIRE(rows.size() == 6);
  for (int k = 0; k < 3; ++k) {
    CHECK(rows[static_cast<std::size_t>(k)].draw == k);
    CHECK(rows[static_cast<std::size_t>(k)].rotation_deg == 5.0);
    CHECK(rows[static_cast<std::size_t>(k + 3)].rotation_deg == 30.0);
    CHECK((rows[static_cast<std::size_t>(k)].axis - rows[static_cast<std::size_t>(k + 3)].axis).norm() < 1e-9);
  }
  CHECK((rows[0].axis - rows[1].axis).norm() > 1e-6);
  const auto again = robustness_sweep(model, base, data.train, mc, rot, 3, parse_length_policy("auto"));
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].metrics.trans_percent == rows[i].metrics.trans_percent);
  const auto means = mean_trans_error(rows, rot);
  CHECK(means[0] == doctest::Approx((rows[0].metrics.trans_percent + rows[1].metrics.trans_percent +
                                     rows[2].metrics.trans_percent) / 3));
  CHECK_THROWS_AS((void)robustness_sweep(model, base, data.train, mc, rot, 0, parse_length_policy("auto")),
                  std::invalid_argument);
}

TEST_CASE("ground-truth geometry explains the frames better than a frozen camera") {
  testing::TempDir dir("exp_floor");
  const auto data = tiny_dataset(dir.path() / "data");
  auto samples = Dataset(data).load_all(data.train);
  const double floor = reference_photometric_loss(samples);
  for (auto& s : samples) s.gt_relative = {Eigen::Matrix4d::Identity(), Eigen::Matrix4d::Identity()};
  const double frozen = reference_photometric_loss(samples);
  CHECK(floor >= 0.0);
  CHECK(floor < 0.5 * frozen);
}
