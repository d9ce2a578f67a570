#include "selfvio/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>

namespace selfvio {

namespace {

std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_num(const std::string& s) {
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

torch::Tensor torch_rng_state() {
  auto gen = at::detail::getDefaultCPUGenerator();
  std::lock_guard<std::mutex> lock(gen.mutex());
  return gen.get_state();
}

void set_torch_rng_state(const torch::Tensor& state) {
  auto gen = at::detail::getDefaultCPUGenerator();
  std::lock_guard<std::mutex> lock(gen.mutex());
  gen.set_state(state);
}

// Each trainer keeps its own dropout stream; it is swapped into the global
// generator for the duration of a step.
class RngScope {
 public:
  explicit RngScope(torch::Tensor& state) : state_(state) { set_torch_rng_state(state_); }
  ~RngScope() { state_ = torch_rng_state(); }
  RngScope(const RngScope&) = delete;
  RngScope& operator=(const RngScope&) = delete;

 private:
  torch::Tensor& state_;
};

}  // namespace

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  if (batch_size <= 0 || max_iters <= 0 || val_interval <= 0)
    throw ConfigError("train: batch_size, max_iters and val_interval must be positive");
  if (val_interval > max_iters) throw ConfigError("train: val_interval must not exceed max_iters");
  if (!(lr > 0.0) || !(gamma > 0.0) || lr_step < 0) throw ConfigError("train: lr, gamma must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("train: Adam moments must lie in [0, 1)");
  if (beta < 0.0) throw ConfigError("train: beta must be positive (or 0 to calibrate)");
  if (adversarial && beta == 0.0 && warmup_iters < static_cast<int>(kMinBetaHistory))
    throw ConfigError("train: beta calibration needs warmup_iters >= " + std::to_string(kMinBetaHistory));
  if (!(clip_norm > 0.0) || max_consecutive_skips <= 0 || threads <= 0)
    throw ConfigError("train: clip_norm, max_consecutive_skips and threads must be positive");
}

double TrainConfig::lr_at(std::int64_t iteration) const {
  return lr * std::pow(gamma, static_cast<double>(iteration) / static_cast<double>(effective_lr_step()));
}

void TrainConfig::write(KeyValueConfig& cfg) const {
  cfg.set("train.batch_size", std::to_string(batch_size));
  cfg.set("train.max_iters", std::to_string(max_iters));
  cfg.set("train.val_interval", std::to_string(val_interval));
  cfg.set("train.lr", num(lr));
  cfg.set("train.beta1", num(beta1));
  cfg.set("train.beta2", num(beta2));
  cfg.set("train.gamma", num(gamma));
  cfg.set("train.lr_step", std::to_string(lr_step));
  cfg.set("train.seed", std::to_string(seed));
  cfg.set("train.warmup_iters", std::to_string(warmup_iters));
  cfg.set("train.beta", num(beta));
  cfg.set("train.adversarial", adversarial ? "true" : "false");
  cfg.set("train.use_mask", use_mask ? "true" : "false");
  cfg.set("train.update_all_on_final", update_all_on_final ? "true" : "false");
  cfg.set("train.augment", augment ? "true" : "false");
  cfg.set("train.clip_norm", num(clip_norm));
  cfg.set("train.max_consecutive_skips", std::to_string(max_consecutive_skips));
  cfg.set("train.threads", std::to_string(threads));
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& cfg) {
  TrainConfig t;
  t.batch_size = static_cast<int>(cfg.get_int("train.batch_size", t.batch_size));
  t.max_iters = static_cast<int>(cfg.get_int("train.max_iters", t.max_iters));
  t.val_interval = static_cast<int>(cfg.get_int("train.val_interval", std::min(t.val_interval, t.max_iters)));
  t.lr = cfg.get_double("train.lr", t.lr);
  t.beta1 = cfg.get_double("train.beta1", t.beta1);
  t.beta2 = cfg.get_double("train.beta2", t.beta2);
  t.gamma = cfg.get_double("train.gamma", t.gamma);
  t.lr_step = static_cast<int>(cfg.get_int("train.lr_step", t.lr_step));
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", static_cast<long long>(t.seed)));
  t.warmup_iters = static_cast<int>(cfg.get_int("train.warmup_iters", t.warmup_iters));
  t.beta = cfg.get_double("train.beta", t.beta);
  t.adversarial = cfg.get_bool("train.adversarial", t.adversarial);
  t.use_mask = cfg.get_bool("train.use_mask", t.use_mask);
  t.update_all_on_final = cfg.get_bool("train.update_all_on_final", t.update_all_on_final);
  t.augment = cfg.get_bool("train.augment", t.augment);
  t.clip_norm = cfg.get_double("train.clip_norm", t.clip_norm);
  t.max_consecutive_skips = static_cast<int>(cfg.get_int("train.max_consecutive_skips", t.max_consecutive_skips));
  t.threads = static_cast<int>(cfg.get_int("train.threads", t.threads));
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// LossLog

LossLog::LossLog(const std::filesystem::path& path, bool append) {
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out_.open(path, fresh ? std::ios::trunc : std::ios::app);
  if (!out_) throw std::runtime_error("cannot open loss log " + path.string());
  if (fresh) out_ << kHeader << '\n';
}

void LossLog::write(const LossReport& r) {
  out_ << r.iteration << ',' << num(r.l_g) << ',' << num(r.l_d_gen) << ',' << num(r.l_d_disc) << ','
       << num(r.l_final) << ',' << num(r.beta) << ',' << num(r.lr) << '\n';
  out_.flush();
}

std::vector<LossReport> LossLog::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loss log " + path.string());
  std::string line;
  std::getline(in, line);
  if (trim(line) != kHeader) throw std::runtime_error("loss log " + path.string() + " has an unexpected header");
  std::vector<LossReport> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw std::runtime_error("loss log line with " + std::to_string(f.size()) + " fields");
    LossReport r;
    r.iteration = static_cast<std::int64_t>(parse_num(f[0]));
    r.l_g = parse_num(f[1]);
    r.l_d_gen = parse_num(f[2]);
    r.l_d_disc = parse_num(f[3]);
    r.l_final = parse_num(f[4]);
    r.beta = parse_num(f[5]);
    r.lr = parse_num(f[6]);
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const NetConfig& net, const TrainConfig& train, std::vector<SnippetSample> train_set)
    : net_(net), cfg_(train), train_(std::move(train_set)), rng_(train.seed) {
  net_.validate();
  cfg_.validate();
  if (train_.empty()) throw std::invalid_argument("trainer: empty training set");
  torch::set_num_threads(cfg_.threads);
  torch::manual_seed(cfg_.seed);
  model_ = SelfVioModel(net_);
  torch_rng_ = torch_rng_state();
  const auto opts = torch::optim::AdamOptions(cfg_.lr).betas({cfg_.beta1, cfg_.beta2});
  gen_opt_ = std::make_unique<torch::optim::Adam>(model_->generator_parameters(), opts);
  disc_opt_ = std::make_unique<torch::optim::Adam>(model_->discriminator_parameters(), opts);
  if (cfg_.beta > 0.0) beta_ = cfg_.beta;
}

void Trainer::set_lr(double lr) {
  for (auto* opt : {gen_opt_.get(), disc_opt_.get()})
    for (auto& group : opt->param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

std::uint64_t Trainer::config_hash() const {
  KeyValueConfig cfg;
  net_.write(cfg);
  TrainConfig t = cfg_;
  t.lr_step = cfg_.effective_lr_step();
  t.max_iters = 1;  // run length and bookkeeping may change across resumes
  t.val_interval = 1;
  t.threads = 1;
  t.write(cfg);
  return fnv1a(cfg.to_text());
}

LossReport Trainer::step() {
  const std::size_t n = train_.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t b = std::min<std::size_t>(n, static_cast<std::size_t>(cfg_.batch_size));
  if (b < n) {
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(idx[i], idx[pick(rng_)]);
    }
    idx.resize(b);
  }
  if (!cfg_.augment) {
    std::vector<const SnippetSample*> ptrs;
    for (auto i : idx) ptrs.push_back(&train_[i]);
    return train_step(make_batch(ptrs));
  }
  std::vector<SnippetSample> augmented;
  augmented.reserve(b);
  for (auto i : idx) augmented.push_back(augment(train_[i], rng_()));
  return train_step(make_batch(augmented));
}

LossReport Trainer::train_step(const Batch& batch) {
  RngScope rng_scope(torch_rng_);
  model_->train();
  LossReport r;
  r.iteration = iteration_ + 1;
  r.lr = cfg_.lr_at(iteration_);
  set_lr(r.lr);
  const bool adversarial = cfg_.adversarial;
  r.warmup = adversarial && !beta_;
  r.beta = beta_.value_or(0.0);

  // Batch-norm statistics move during the forward pass; a skipped step puts them back.
  saved_buffers_.clear();
  for (const auto& b : model_->buffers()) saved_buffers_.push_back(b.detach().clone());

  const auto out = model_->forward(batch);
  if (!torch::isfinite(out.poses).all().item<bool>() || !torch::isfinite(out.depth).all().item<bool>()) {
    r.l_g = r.l_d_gen = r.l_final = std::numeric_limits<double>::quiet_NaN();
    ++iteration_;
    return skip(r);
  }
  const auto rec = model_->reconstruct(batch, out);
  std::vector<torch::Tensor> masks = rec.valid;
  if (!cfg_.use_mask)
    for (auto& m : masks) m = torch::ones_like(m);
  const auto photo = photometric_loss(batch.target, rec.warped, masks);
  r.valid_pixels = photo.valid_pixels;
  if (photo.empty) events_.push_back("iteration " + std::to_string(r.iteration) + ": empty valid mask");

  // Generator side. D's weights are frozen so gradients only pass through it.
  auto& disc = model_->discriminator;
  for (auto& p : disc->parameters()) p.requires_grad_(false);
  torch::Tensor l_d_gen = torch::zeros({}, batch.target.options());
  if (adversarial) l_d_gen = generator_adversarial_loss(disc->forward(rec.fake));
  const torch::Tensor adv_term = r.warmup || !adversarial ? torch::zeros_like(l_d_gen) : l_d_gen * r.beta;
  const torch::Tensor l_final = photo.value + adv_term;
  r.l_g = photo.value.item<double>();
  r.l_d_gen = l_d_gen.item<double>();
  r.l_final = l_final.item<double>();

  gen_opt_->zero_grad();
  const auto gen_params = model_->generator_parameters();
  if (cfg_.update_all_on_final || r.warmup || !adversarial) {
    l_final.backward();
  } else {
    photo.value.backward({}, /*retain_graph=*/true);
    const auto g_params = model_->depth_parameters();
    const auto extra = torch::autograd::grad({adv_term}, g_params, {}, false, false, /*allow_unused=*/true);
    for (std::size_t i = 0; i < g_params.size(); ++i) {
      if (!extra[i].defined()) continue;
      auto& grad = g_params[i].mutable_grad();
      grad = grad.defined() ? grad + extra[i] : extra[i];
    }
  }
  for (auto& p : disc->parameters()) p.requires_grad_(true);
  const double gen_norm = torch::nn::utils::clip_grad_norm_(gen_params, cfg_.clip_norm);

  bool finite = std::isfinite(r.l_final) && std::isfinite(gen_norm);
  torch::Tensor l_d_disc;
  double disc_norm = 0.0;
  if (finite && adversarial) {
    disc_opt_->zero_grad();
    l_d_disc = discriminator_loss(disc->forward(batch.target), disc->forward(rec.fake.detach()));
    r.l_d_disc = l_d_disc.item<double>();
    l_d_disc.backward();
    disc_norm = torch::nn::utils::clip_grad_norm_(model_->discriminator_parameters(), cfg_.clip_norm);
    finite = std::isfinite(r.l_d_disc) && std::isfinite(disc_norm);
  }

  ++iteration_;
  if (!finite) return skip(r);
  consecutive_skips_ = 0;
  gen_opt_->step();
  if (adversarial) disc_opt_->step();

  if (r.warmup) {
    warm_g_.push_back(r.l_g);
    warm_d_.push_back(r.l_d_gen);
    if (static_cast<int>(warm_g_.size()) >= cfg_.warmup_iters) {
      beta_ = calibrate_beta(warm_g_, warm_d_);
      events_.push_back("iteration " + std::to_string(r.iteration) + ": beta calibrated to " + num(*beta_));
    }
  }
  last_ = r;
  return r;
}

LossReport Trainer::skip(LossReport r) {
  r.skipped = true;
  {
    torch::NoGradGuard no_grad;
    auto buffers = model_->buffers();
    for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i].copy_(saved_buffers_[i]);
  }
  gen_opt_->zero_grad();
  disc_opt_->zero_grad();
  ++consecutive_skips_;
  events_.push_back("iteration " + std::to_string(r.iteration) + ": non-finite loss or gradient, step skipped");
  if (consecutive_skips_ >= cfg_.max_consecutive_skips)
    throw TrainingAborted("training aborted after " + std::to_string(consecutive_skips_) +
                          " consecutive non-finite steps (last L_g=" + num(r.l_g) + ", L_d_gen=" + num(r.l_d_gen) +
                          ", L_d_disc=" + num(r.l_d_disc) + ")");
  last_ = r;
  return r;
}

std::vector<LossReport> Trainer::run(int iterations, LossLog* log) {
  std::vector<LossReport> out;
  for (int i = 0; i < iterations; ++i) {
    out.push_back(step());
    if (log) log->write(out.back());
  }
  return out;
}

ValidationSummary Trainer::validate(const std::vector<SnippetSample>& val) {
  if (val.empty()) throw std::invalid_argument("validate: empty validation set");
  const bool was_training = model_->is_training();
  model_->eval();
  ValidationSummary s;
  s.snippets = val.size();
  double weighted = 0.0;
  bool all_depth = true;
  std::vector<DepthMetrics> per_frame;
  {
    torch::NoGradGuard no_grad;
    const std::size_t step = static_cast<std::size_t>(cfg_.batch_size);
    for (std::size_t i = 0; i < val.size(); i += step) {
      std::vector<const SnippetSample*> chunk;
      for (std::size_t j = i; j < std::min(val.size(), i + step); ++j) chunk.push_back(&val[j]);
      const auto batch = make_batch(chunk);
      const auto out = model_->forward(batch);
      const auto rec = model_->reconstruct(batch, out);
      std::vector<torch::Tensor> masks = rec.valid;
      if (!cfg_.use_mask)
        for (auto& m : masks) m = torch::ones_like(m);
      const auto photo = photometric_loss(batch.target, rec.warped, masks);
      weighted += photo.value.item<double>() * static_cast<double>(photo.valid_pixels);
      s.valid_pixels += photo.valid_pixels;
      const auto depth = out.depth.to(torch::kDouble).contiguous();
      for (std::size_t k = 0; k < chunk.size(); ++k) {
        if (!chunk[k]->gt_depth) {
          all_depth = false;
          continue;
        }
        const auto d = depth[static_cast<int64_t>(k)];
        const DepthMap<double> pred =
            Eigen::Map<const Plane<double>>(d.data_ptr<double>(), d.size(1), d.size(2));
        per_frame.push_back(depth_metrics(pred, chunk[k]->gt_depth->cast<double>()));
      }
    }
  }
  s.l_g = s.valid_pixels > 0 ? weighted / static_cast<double>(s.valid_pixels) : 0.0;
  if (all_depth && !per_frame.empty()) s.depth = average(per_frame);

  // ATE needs whole runs of consecutive targets with ground truth.
  try {
    AteStats total;
    for (const auto& seq : sequence_odometry(model_, val, cfg_.batch_size)) {
      if (seq.ground_truth.empty() || seq.estimate.size() < 5) continue;
      const auto a = ate_snippets(seq.estimate, seq.ground_truth, 5);
      total.per_snippet.insert(total.per_snippet.end(), a.per_snippet.begin(), a.per_snippet.end());
    }
    if (!total.per_snippet.empty()) {
      const double n = static_cast<double>(total.per_snippet.size());
      total.mean = std::accumulate(total.per_snippet.begin(), total.per_snippet.end(), 0.0) / n;
      double var = 0.0;
      for (double v : total.per_snippet) var += (v - total.mean) * (v - total.mean);
      total.std = std::sqrt(var / n);
      s.ate = total;
    }
  } catch (const std::invalid_argument&) {
    // Not a set of complete sequences; photometric and depth numbers still stand.
  }
  model_->train(was_training);
  return s;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'V', 'I', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

void put_record(std::string& out, const std::string& key, const std::string& value) {
  put<std::uint64_t>(out, key.size());
  out += key;
  put<std::uint64_t>(out, value.size());
  out += value;
}

std::string take_string(const std::string& in, std::size_t& pos) {
  const auto n = take<std::uint64_t>(in, pos);
  if (n > in.size() - pos) throw CheckpointError("checkpoint record overruns the payload");
  std::string s = in.substr(pos, n);
  pos += n;
  return s;
}

std::string tensor_bytes(const torch::Tensor& t) {
  const auto c = t.detach().contiguous().cpu();
  std::string out;
  put<std::int32_t>(out, static_cast<std::int32_t>(c.scalar_type()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim()));
  for (auto s : c.sizes()) put<std::int64_t>(out, s);
  out.append(static_cast<const char*>(c.data_ptr()), c.nbytes());
  return out;
}

struct RawTensor {
  torch::ScalarType type;
  std::vector<std::int64_t> shape;
  std::string data;
};

RawTensor parse_tensor(const std::string& bytes, const std::string& name) {
  std::size_t pos = 0;
  RawTensor r;
  r.type = static_cast<torch::ScalarType>(take<std::int32_t>(bytes, pos));
  const auto dim = take<std::uint32_t>(bytes, pos);
  if (dim > 16) throw CheckpointError("checkpoint tensor " + name + " has an implausible rank");
  std::int64_t numel = 1;
  for (std::uint32_t i = 0; i < dim; ++i) {
    r.shape.push_back(take<std::int64_t>(bytes, pos));
    numel *= r.shape.back();
  }
  r.data = bytes.substr(pos);
  if (static_cast<std::int64_t>(r.data.size()) != numel * static_cast<std::int64_t>(c10::elementSize(r.type)))
    throw CheckpointError("checkpoint tensor " + name + " has the wrong byte count");
  return r;
}

std::string doubles_bytes(const std::vector<double>& v) {
  std::string out;
  for (double d : v) put(out, d);
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  if (s.size() % sizeof(double) != 0) throw CheckpointError("checkpoint history is malformed");
  std::vector<double> v(s.size() / sizeof(double));
  if (!v.empty()) std::memcpy(v.data(), s.data(), s.size());
  return v;
}

std::string report_bytes(const LossReport& r) {
  std::string out;
  put(out, r.iteration);
  for (double d : {r.l_g, r.l_d_gen, r.l_d_disc, r.l_final, r.beta, r.lr}) put(out, d);
  put(out, r.valid_pixels);
  put<std::uint8_t>(out, r.warmup);
  put<std::uint8_t>(out, r.skipped);
  return out;
}

LossReport parse_report(const std::string& s) {
  std::size_t pos = 0;
  LossReport r;
  r.iteration = take<std::int64_t>(s, pos);
  r.l_g = take<double>(s, pos);
  r.l_d_gen = take<double>(s, pos);
  r.l_d_disc = take<double>(s, pos);
  r.l_final = take<double>(s, pos);
  r.beta = take<double>(s, pos);
  r.lr = take<double>(s, pos);
  r.valid_pixels = take<std::int64_t>(s, pos);
  r.warmup = take<std::uint8_t>(s, pos) != 0;
  r.skipped = take<std::uint8_t>(s, pos) != 0;
  return r;
}

std::map<std::string, torch::Tensor> named_state(const torch::nn::Module& m) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : m.named_parameters()) out["param." + p.key()] = p.value();
  for (const auto& b : m.named_buffers()) out["buffer." + b.key()] = b.value();
  return out;
}

std::string optimizer_bytes(const torch::optim::Optimizer& opt) {
  std::ostringstream os;
  torch::serialize::OutputArchive archive;
  opt.save(archive);
  archive.save_to(os);
  return os.str();
}


}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  std::string payload;
  put_record(payload, "meta.iteration", std::to_string(iteration_));
  put_record(payload, "meta.beta", beta_ ? num(*beta_) : "none");
  put_record(payload, "meta.config_hash", std::to_string(config_hash()));
  put_record(payload, "meta.consecutive_skips", std::to_string(consecutive_skips_));
  put_record(payload, "meta.last_report", report_bytes(last_));
  put_record(payload, "config.net", net_.to_text());
  {
    KeyValueConfig t;
    cfg_.write(t);
    put_record(payload, "config.train", t.to_text());
  }
  {
    std::ostringstream os;
    os << rng_;
    put_record(payload, "rng.sampler", os.str());
  }
  put_record(payload, "rng.torch", tensor_bytes(torch_rng_));
  put_record(payload, "history.l_g", doubles_bytes(warm_g_));
  put_record(payload, "history.l_d", doubles_bytes(warm_d_));
  for (const auto& [name, t] : named_state(*model_)) put_record(payload, name, tensor_bytes(t));
  put_record(payload, "optim.generator", optimizer_bytes(*gen_opt_));
  put_record(payload, "optim.discriminator", optimizer_bytes(*disc_opt_));

  std::string file(kMagic, sizeof kMagic);
  put<std::uint32_t>(file, kCheckpointVersion);
  put<std::uint64_t>(file, payload.size());
  put<std::uint64_t>(file, fnv1a(payload));
  file += payload;

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp);
    out.write(file.data(), static_cast<std::streamsize>(file.size()));
    if (!out) throw CheckpointError("short write to checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::map<std::string, std::string> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (file.size() < sizeof kMagic + 20 || std::memcmp(file.data(), kMagic, sizeof kMagic) != 0)
    throw CheckpointError(path.string() + " is not a checkpoint");
  std::size_t pos = sizeof kMagic;
  const auto version = take<std::uint32_t>(file, pos);
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  const auto size = take<std::uint64_t>(file, pos);
  const auto checksum = take<std::uint64_t>(file, pos);
  if (size != file.size() - pos) throw CheckpointError("checkpoint " + path.string() + " is truncated");
  const std::string payload = file.substr(pos);
  if (fnv1a(payload) != checksum) throw CheckpointError("checkpoint " + path.string() + " failed its checksum");

  std::map<std::string, std::string> rec;
  for (std::size_t p = 0; p < payload.size();) {
    auto key = take_string(payload, p);
    rec[key] = take_string(payload, p);
  }
  return rec;
}

namespace {

const std::string& need_record(const std::map<std::string, std::string>& rec, const std::string& k) {
  const auto it = rec.find(k);
  if (it == rec.end()) throw CheckpointError("checkpoint lacks record " + k);
  return it->second;
}

/// Checks every tensor record against the module before anything is copied.
std::map<std::string, RawTensor> matching_tensors(const std::map<std::string, std::string>& rec,
                                                  const std::map<std::string, torch::Tensor>& state) {
  std::map<std::string, RawTensor> tensors;
  for (const auto& [name, t] : state) {
    auto raw = parse_tensor(need_record(rec, name), name);
    if (raw.type != t.scalar_type() || raw.shape != t.sizes().vec())
      throw CheckpointError("checkpoint tensor " + name + " does not match the model");
    tensors.emplace(name, std::move(raw));
  }
  return tensors;
}

void copy_tensors(const std::map<std::string, RawTensor>& tensors, const std::map<std::string, torch::Tensor>& state) {
  torch::NoGradGuard no_grad;
  for (const auto& [name, t] : state) {
    const auto& raw = tensors.at(name);
    std::memcpy(t.data_ptr(), raw.data.data(), raw.data.size());
  }
}

}  // namespace

SelfVioModel load_model(const std::filesystem::path& path) {
  const auto rec = read_checkpoint(path);
  const auto net = NetConfig::from_config(KeyValueConfig::parse(need_record(rec, "config.net")));
  SelfVioModel model(net);
  const auto state = named_state(*model);
  copy_tensors(matching_tensors(rec, state), state);
  model->eval();
  return model;
}

KeyValueConfig checkpoint_config(const std::filesystem::path& path) {
  const auto rec = read_checkpoint(path);
  auto cfg = KeyValueConfig::parse(need_record(rec, "config.net"));
  const auto train = KeyValueConfig::parse(need_record(rec, "config.train"));
  for (const auto& [k, v] : train.values()) cfg.set(k, v);
  return cfg;
}

CheckpointMeta Trainer::load_checkpoint(const std::filesystem::path& path) {
  const auto rec = read_checkpoint(path);
  auto need = [&](const std::string& k) -> const std::string& { return need_record(rec, k); };

  // Everything is parsed and checked before any member changes.
  CheckpointMeta meta;
  meta.iteration = std::stoll(need("meta.iteration"));
  meta.config_hash = std::stoull(need("meta.config_hash"));
  if (meta.config_hash != config_hash())
    throw CheckpointError("checkpoint was written for a different configuration");
  if (need("meta.beta") != "none") meta.beta = parse_num(need("meta.beta"));
  meta.last = parse_report(need("meta.last_report"));
  const int skips = std::stoi(need("meta.consecutive_skips"));
  std::mt19937_64 sampler;
  {
    std::istringstream is(need("rng.sampler"));
    is >> sampler;
    if (!is) throw CheckpointError("checkpoint sampler state is malformed");
  }
  const auto torch_rng = parse_tensor(need("rng.torch"), "rng.torch");
  const auto hist_g = parse_doubles(need("history.l_g"));
  const auto hist_d = parse_doubles(need("history.l_d"));

  const auto state = named_state(*model_);
  const auto tensors = matching_tensors(rec, state);
  // Optimizer archives are loaded into scratch optimizers first.
  const auto opts = torch::optim::AdamOptions(cfg_.lr).betas({cfg_.beta1, cfg_.beta2});
  auto load_opt = [&](const std::string& key, std::vector<torch::Tensor> params) {
    auto opt = std::make_unique<torch::optim::Adam>(std::move(params), opts);
    try {
      std::istringstream is(need(key));
      torch::serialize::InputArchive archive;
      archive.load_from(is);
      opt->load(archive);
    } catch (const c10::Error& e) {
      throw CheckpointError("checkpoint optimizer state " + key + " is unreadable: " + e.what_without_backtrace());
    }
    return opt;
  };
  auto gen_opt = load_opt("optim.generator", model_->generator_parameters());
  auto disc_opt = load_opt("optim.discriminator", model_->discriminator_parameters());

  copy_tensors(tensors, state);
  gen_opt_ = std::move(gen_opt);
  disc_opt_ = std::move(disc_opt);
  {
    auto rng_state = torch::empty(torch_rng.shape, torch::TensorOptions().dtype(torch_rng.type));
    std::memcpy(rng_state.data_ptr(), torch_rng.data.data(), torch_rng.data.size());
    torch_rng_ = rng_state;
  }
  rng_ = sampler;
  iteration_ = meta.iteration;
  beta_ = meta.beta;
  consecutive_skips_ = skips;
  warm_g_ = hist_g;
  warm_d_ = hist_d;
  last_ = meta.last;
  return meta;
}

}  // namespace selfvio
