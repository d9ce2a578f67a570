#include "selfvio/dataio.hpp"

#include "selfvio/png_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace selfvio {

namespace {

constexpr double kTimeEpsilon = 1e-9;

std::string frame_name(int frame, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06d%s", frame, ext);
  return buf;
}

std::vector<double> read_times(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> t;
  double v = 0;
  while (in >> v) t.push_back(v);
  if (!in.eof()) throw DataError("malformed timestamp in " + path.string());
  return t;
}

Plane<float> resize_nearest(const Plane<float>& p, int h, int w) {
  if (p.rows() == h && p.cols() == w) return p;
  Plane<float> out(h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const auto sv = std::min<Eigen::Index>(p.rows() - 1, std::lround(v * double(p.rows()) / h));
      const auto su = std::min<Eigen::Index>(p.cols() - 1, std::lround(u * double(p.cols()) / w));
      out(v, u) = p(sv, su);
    }
  return out;
}

CameraIntrinsics<double> scaled_intrinsics(const CameraIntrinsics<double>& k, int width, int height) {
  const double sx = double(width) / k.width, sy = double(height) / k.height;
  return {k.fx * sx, k.fy * sy, k.cx * sx, k.cy * sy, width, height};
}

}  // namespace

void ImageSnippet::validate() const {
  if (!(timestamps[0] < timestamps[1] && timestamps[1] < timestamps[2]))
    throw DataError("snippet timestamps must be strictly increasing");
  if (!target.same_shape(sources[0]) || !target.same_shape(sources[1]))
    throw DataError("snippet frames differ in shape");
}

ImuWindow gather_imu_window(const ImuStream& imu, double t_begin, double t_end, int rows) {
  if (rows <= 0) throw std::invalid_argument("gather_imu_window: rows must be positive");
  ImuWindow w;
  w.samples = Eigen::Matrix<float, Eigen::Dynamic, 6, Eigen::RowMajor>::Zero(rows, 6);
  const auto first = std::lower_bound(imu.times.begin(), imu.times.end(), t_begin - kTimeEpsilon);
  for (auto it = first; it != imu.times.end() && *it < t_end - kTimeEpsilon; ++it) {
    if (w.real_rows == rows) break;
    const auto i = static_cast<Eigen::Index>(it - imu.times.begin());
    w.samples.row(w.real_rows) = imu.samples.row(i).cast<float>();
    w.sample_times.push_back(*it);
    ++w.real_rows;
  }
  return w;
}

void DatasetConfig::validate() const {
  if (height <= 0 || width <= 0) throw ConfigError("dataset: image size must be positive");
  if (imu_rows <= 0) throw ConfigError("dataset: imu_rows must be positive");
  std::set<std::string> seen;
  for (const auto* list : {&train, &val, &test})
    for (const auto& s : *list)
      if (!seen.insert(s).second) throw ConfigError("dataset: sequence '" + s + "' appears in more than one split");
}

DatasetConfig DatasetConfig::from_config(const KeyValueConfig& cfg) {
  DatasetConfig d;
  d.root = cfg.get_string("data.root", "");
  d.height = static_cast<int>(cfg.get_int("data.height", d.height));
  d.width = static_cast<int>(cfg.get_int("data.width", d.width));
  d.imu_rows = static_cast<int>(cfg.get_int("data.imu_rows", d.imu_rows));
  d.train = cfg.get_list("data.train");
  d.val = cfg.get_list("data.val");
  d.test = cfg.get_list("data.test");
  const std::string prefix = "data.intrinsics.";
  for (const auto& [key, value] : cfg.values()) {
    if (key.rfind(prefix, 0) != 0) continue;
    std::istringstream ss(value);
    CameraIntrinsics<double> k;
    if (!(ss >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height))
      throw ConfigError(key + ": expected 'fx fy cx cy width height'");
    k.validate();
    d.intrinsics[key.substr(prefix.size())] = k;
  }
  d.validate();
  return d;
}

KeyValueConfig DatasetConfig::to_config() const {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
    return s;
  };
  KeyValueConfig cfg;
  cfg.set("data.root", root.string());
  cfg.set("data.height", std::to_string(height));
  cfg.set("data.width", std::to_string(width));
  cfg.set("data.imu_rows", std::to_string(imu_rows));
  cfg.set("data.train", join(train));
  cfg.set("data.val", join(val));
  cfg.set("data.test", join(test));
  for (const auto& [name, k] : intrinsics) {
    std::ostringstream ss;
    ss.precision(17);
    ss << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' ' << k.height;
    cfg.set("data.intrinsics." + name, ss.str());
  }
  return cfg;
}

std::filesystem::path SequenceData::image_path(int frame) const {
  return dir / "image_2" / frame_name(frame, ".png");
}

std::filesystem::path SequenceData::depth_path(int frame) const { return dir / "depth" / frame_name(frame, ".bin"); }

ImuStream read_imu_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::array<double, 7>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::array<double, 7> r{};
    for (auto& v : r)
      if (!(ss >> v)) throw DataError("malformed IMU line in " + path.string() + ": " + line);
    rows.push_back(r);
  }
  ImuStream imu;
  imu.samples.resize(static_cast<Eigen::Index>(rows.size()), 6);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && !(rows[i][0] > rows[i - 1][0])) throw DataError("IMU timestamps not increasing in " + path.string());
    imu.times.push_back(rows[i][0]);
    for (int c = 0; c < 6; ++c) imu.samples(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c + 1)];
  }
  return imu;
}

CameraIntrinsics<double> read_calib_file(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CameraIntrinsics<double> k;
  if (!(in >> k.fx >> k.fy >> k.cx >> k.cy)) throw DataError("expected 'fx fy cx cy' in " + path.string());
  k.width = width;
  k.height = height;
  k.validate();
  return k;
}

SequenceData load_sequence(const std::filesystem::path& root, const std::string& name) {
  SequenceData seq;
  seq.name = name;
  seq.dir = root / name;
  if (!std::filesystem::is_directory(seq.dir)) throw DataError("missing sequence directory " + seq.dir.string());
  seq.frame_times = read_times(seq.dir / "times.txt");
  for (std::size_t i = 1; i < seq.frame_times.size(); ++i)
    if (!(seq.frame_times[i] > seq.frame_times[i - 1]))
      throw DataError("frame timestamps not increasing in " + (seq.dir / "times.txt").string());
  seq.imu = read_imu_file(seq.dir / "imu.txt");
  if (seq.frame_times.empty()) throw DataError("sequence has no frames: " + seq.dir.string());
  const auto first = seq.image_path(0);
  if (!std::filesystem::exists(first)) throw DataError("missing image " + first.string());
  const auto probe = read_png(first);
  seq.intrinsics = read_calib_file(seq.dir / "calib.txt", probe.width(), probe.height());
  const auto poses = seq.dir / "poses.txt";
  if (std::filesystem::exists(poses)) {
    auto gt = read_kitti_poses(poses);
    if (gt.size() != seq.frame_times.size()) throw DataError("poses.txt frame count mismatch in " + seq.dir.string());
    gt.timestamps = seq.frame_times;
    seq.ground_truth = std::move(gt);
  }
  return seq;
}

std::vector<int> SnippetSource::snippet_indices(const std::string& name) const {
  std::vector<int> idx;
  const int n = sequence(name).frame_count();
  for (int i = 1; i + 1 < n; ++i) idx.push_back(i);
  return idx;
}

std::vector<SnippetSample> SnippetSource::load_all(const std::vector<std::string>& sequences) const {
  std::vector<SnippetSample> out;
  for (const auto& s : sequences)
    for (const int i : snippet_indices(s)) out.push_back(load_snippet(s, i));
  return out;
}

SnippetSample assemble_snippet(const DatasetConfig& config, const SequenceData& seq, const ImuStream& imu,
                               int index) {
  if (index < 1 || index + 1 >= seq.frame_count())
    throw DataError("snippet index " + std::to_string(index) + " has no neighbours in sequence " + seq.name);
  SnippetSample s;
  s.sequence = seq.name;
  s.index = index;

  auto load_frame = [&](int f) {
    const auto path = seq.image_path(f);
    if (!std::filesystem::exists(path)) throw DataError("missing image " + path.string());
    return resize_bilinear(read_png(path), config.height, config.width);
  };
  s.snippet.target = load_frame(index);
  s.snippet.sources = {load_frame(index - 1), load_frame(index + 1)};
  s.snippet.timestamps = {seq.frame_times[static_cast<std::size_t>(index - 1)],
                          seq.frame_times[static_cast<std::size_t>(index)],
                          seq.frame_times[static_cast<std::size_t>(index + 1)]};
  s.snippet.validate();

  s.imu = gather_imu_window(imu, s.snippet.timestamps[0], s.snippet.timestamps[2], config.imu_rows);

  const auto it = config.intrinsics.find(seq.name);
  const auto& native = it != config.intrinsics.end() ? it->second : seq.intrinsics;
  s.intrinsics = scaled_intrinsics(native, config.width, config.height);

  if (seq.ground_truth) {
    const auto& p = seq.ground_truth->poses;
    const auto& t = p[static_cast<std::size_t>(index)];
    s.gt_relative = std::array<SE3Matrix<double>, 2>{compose(invert(p[static_cast<std::size_t>(index - 1)]), t),
                                                     compose(invert(p[static_cast<std::size_t>(index + 1)]), t)};
  }
  const auto depth = seq.depth_path(index);
  if (std::filesystem::exists(depth)) s.gt_depth = resize_nearest(read_depth_bin(depth), config.height, config.width);
  return s;
}

Dataset::Dataset(DatasetConfig config) : config_(std::move(config)) {
  config_.validate();
  for (const auto* list : {&config_.train, &config_.val, &config_.test})
    for (const auto& name : *list) sequences_.emplace(name, load_sequence(config_.root, name));
}

const SequenceData& Dataset::sequence(const std::string& name) const {
  const auto it = sequences_.find(name);
  if (it == sequences_.end()) throw DataError("unknown sequence '" + name + "'");
  return it->second;
}

std::vector<std::string> Dataset::sequence_names() const {
  std::vector<std::string> names;
  for (const auto& [n, _] : sequences_) names.push_back(n);
  return names;
}

SnippetSample Dataset::load_snippet(const std::string& name, int index) const {
  const auto& seq = sequence(name);
  return assemble_snippet(config_, seq, seq.imu, index);
}

AugmentParams sample_augment_params(std::uint64_t seed, int height, int width, double max_scale) {
  std::mt19937_64 rng(seed);
  AugmentParams p;
  p.scale = std::uniform_real_distribution<double>(1.0, std::max(1.0, max_scale))(rng);
  const auto sh = static_cast<int>(std::lround(height * p.scale));
  const auto sw = static_cast<int>(std::lround(width * p.scale));
  p.crop_x = std::uniform_int_distribution<int>(0, sw - width)(rng);
  p.crop_y = std::uniform_int_distribution<int>(0, sh - height)(rng);
  p.flip = std::bernoulli_distribution(0.5)(rng);
  return p;
}

SnippetSample apply_augment(const SnippetSample& sample, const AugmentParams& params) {
  const int h = sample.snippet.target.height(), w = sample.snippet.target.width();
  const double sx = double(std::lround(w * params.scale)) / w;
  const double sy = double(std::lround(h * params.scale)) / h;

  auto transform_plane = [&](const Plane<float>& src) {
    Plane<float> out(h, w);
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        const int uu = params.flip ? w - 1 - u : u;
        out(v, u) = sample_clamped(src, static_cast<float>((uu + params.crop_x) / sx),
                                   static_cast<float>((v + params.crop_y) / sy));
      }
    return out;
  };
  auto transform_image = [&](const ImageTensor<float>& img) {
    ImageTensor<float> out;
    for (const auto& c : img.channels) out.channels.push_back(transform_plane(c));
    return out;
  };

  SnippetSample out = sample;
  out.snippet.target = transform_image(sample.snippet.target);
  out.snippet.sources = {transform_image(sample.snippet.sources[0]), transform_image(sample.snippet.sources[1])};
  if (sample.gt_depth) out.gt_depth = transform_plane(*sample.gt_depth);

  auto& k = out.intrinsics;
  k.fx *= sx;
  k.fy *= sy;
  k.cx = k.cx * sx - params.crop_x;
  k.cy = k.cy * sy - params.crop_y;
  if (params.flip) {
    k.cx = (w - 1) - k.cx;
    out.imu.samples.col(0) *= -1.0f;
    out.imu.samples.col(4) *= -1.0f;
    out.imu.samples.col(5) *= -1.0f;
    if (out.gt_relative) {
      const SE3Matrix<double> mirror = Eigen::Vector4d(-1, 1, 1, 1).asDiagonal();
      for (auto& t : *out.gt_relative) t = mirror * t * mirror;
    }
  }
  return out;
}

SnippetSample augment(const SnippetSample& sample, std::uint64_t seed) {
  return apply_augment(sample,
                       sample_augment_params(seed, sample.snippet.target.height(), sample.snippet.target.width()));
}

}  // namespace selfvio
