#include "udepth/training.hpp"

#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "udepth/config.hpp"

namespace udepth {

namespace {

std::string join(const std::vector<int64_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    out += (i ? "," : "") + std::to_string(v[i]);
  }
  return out;
}

std::vector<int64_t> split_ints(const std::string& text, const std::string& key) {
  std::vector<int64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    out.push_back(parse_int(item, key));
  }
  if (out.empty()) {
    throw ConfigError(key + ": empty list");
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }

std::string to_string(SmoothnessTarget t) {
  switch (t) {
    case SmoothnessTarget::kComposite:
      return "composite";
    case SmoothnessTarget::kReal:
      return "real";
    case SmoothnessTarget::kBoth:
      return "both";
  }
  return "composite";
}

std::vector<torch::Tensor> concat(std::vector<torch::Tensor> a, const std::vector<torch::Tensor>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

nlohmann::json breakdown_json(const LossBreakdown& b) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& t : b.terms) {
    terms[t.name] = {{"value", t.value}, {"weight", t.weight}};
  }
  return {{"terms", terms}, {"total", b.total}};
}

// Serialises a mt19937_64 state through its stream operators.
std::string rng_to_string(const Rng& rng) {
  std::ostringstream s;
  s << rng;
  return s.str();
}

void rng_from_string(Rng& rng, const std::string& text) {
  std::istringstream s(text);
  s >> rng;
  if (!s) {
    throw IoError("corrupt random-stream state in checkpoint");
  }
}

// Validates the config and seeds torch before any weight is initialised.
const NetworkConfig& seeded_network(const TrainConfig& cfg) {
  cfg.validate();
  torch::manual_seed(cfg.seed);
  return cfg.network;
}

}  // namespace

void TrainConfig::validate() const {
  network.validate();
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(learning_rate > 0.0) || !(decayed_learning_rate > 0.0)) fail("learning rates must be positive");
  if (decay_epoch < 0) fail("decay_epoch must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
    fail("adam betas must lie in [0,1)");
  if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0)) fail("loss weights alpha, beta, gamma must be positive");
  if (!(ssim_weight >= 0.0 && ssim_weight <= 1.0)) fail("ssim_weight must lie in [0,1]");
  if (!(min_depth > 0.0 && min_depth < max_depth)) fail("need 0 < min_depth < max_depth");
  if (!(initial_depth > min_depth && initial_depth < max_depth)) fail("initial_depth must lie inside (min_depth, max_depth)");
  if (batch_size < 1 || composite_batch_size < 1) fail("batch sizes must be >= 1");
  if (epochs < 1) fail("epochs must be >= 1");
  if (max_iterations < 0 || checkpoint_every < 0 || validate_every < 0) fail("iteration counts must be >= 0");
  if (grad_clip && !(grad_clip_norm > 0.0)) fail("grad_clip_norm must be positive");
  if (!(eval.min_depth > 0.0 && eval.min_depth < eval.max_depth)) fail("need 0 < eval_min_depth < eval_max_depth");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  const auto& n = network;
  return {
      {"height", std::to_string(n.height)},
      {"width", std::to_string(n.width)},
      {"stage_widths", join(n.stage_widths)},
      {"stage_depths", join(n.stage_depths)},
      {"decoder_widths", join(n.decoder_widths)},
      {"stem_width", std::to_string(n.stem_width)},
      {"lka_kernel", std::to_string(n.lka_kernel)},
      {"lka_dilated_kernel", std::to_string(n.lka_dilated_kernel)},
      {"lka_dilation", std::to_string(n.lka_dilation)},
      {"mlp_ratio", fmt(n.mlp_ratio)},
      {"pose_widths", join(n.pose_widths)},
      {"share_pose_encoder", fmt(n.share_pose_encoder)},
      {"learning_rate", fmt(learning_rate)},
      {"decayed_learning_rate", fmt(decayed_learning_rate)},
      {"decay_epoch", std::to_string(decay_epoch)},
      {"adam_beta1", fmt(adam_beta1)},
      {"adam_beta2", fmt(adam_beta2)},
      {"alpha", fmt(alpha)},
      {"beta", fmt(beta)},
      {"gamma", fmt(gamma)},
      {"ssim_weight", fmt(ssim_weight)},
      {"min_depth", fmt(min_depth)},
      {"max_depth", fmt(max_depth)},
      {"initial_depth", fmt(initial_depth)},
      {"batch_size", std::to_string(batch_size)},
      {"composite_batch_size", std::to_string(composite_batch_size)},
      {"epochs", std::to_string(epochs)},
      {"max_iterations", std::to_string(max_iterations)},
      {"seed", std::to_string(seed)},
      {"auto_masking", fmt(auto_masking)},
      {"utsf", fmt(utsf)},
      {"sky_loss", fmt(sky_loss)},
      {"cutmix", fmt(cutmix)},
      {"optimizer1", fmt(optimizer1)},
      {"grad_clip", fmt(grad_clip)},
      {"grad_clip_norm", fmt(grad_clip_norm)},
      {"supervise_disparity", fmt(supervise_disparity)},
      {"opt1_smoothness", to_string(opt1_smoothness)},
      {"synthetic_exhaustion", synthetic_exhaustion == SyntheticExhaustion::kReshuffle ? "reshuffle" : "cycle"},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"validate_every", std::to_string(validate_every)},
      {"target_abs_rel", fmt(target_abs_rel)},
      {"eval_min_depth", fmt(eval.min_depth)},
      {"eval_max_depth", fmt(eval.max_depth)},
      {"eval_median_scaling", fmt(eval.median_scaling)},
  };
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  auto& n = network;
  auto d = [&] { return parse_double(value, key); };
  auto i = [&] { return parse_int(value, key); };
  auto b = [&] { return parse_bool(value, key); };
  if (key == "height") n.height = i();
  else if (key == "width") n.width = i();
  else if (key == "stage_widths") n.stage_widths = split_ints(value, key);
  else if (key == "stage_depths") n.stage_depths = split_ints(value, key);
  else if (key == "decoder_widths") n.decoder_widths = split_ints(value, key);
  else if (key == "stem_width") n.stem_width = i();
  else if (key == "lka_kernel") n.lka_kernel = i();
  else if (key == "lka_dilated_kernel") n.lka_dilated_kernel = i();
  else if (key == "lka_dilation") n.lka_dilation = i();
  else if (key == "mlp_ratio") n.mlp_ratio = d();
  else if (key == "pose_widths") n.pose_widths = split_ints(value, key);
  else if (key == "share_pose_encoder") n.share_pose_encoder = b();
  else if (key == "learning_rate") learning_rate = d();
  else if (key == "decayed_learning_rate") decayed_learning_rate = d();
  else if (key == "decay_epoch") decay_epoch = i();
  else if (key == "adam_beta1") adam_beta1 = d();
  else if (key == "adam_beta2") adam_beta2 = d();
  else if (key == "alpha") alpha = d();
  else if (key == "beta") beta = d();
  else if (key == "gamma") gamma = d();
  else if (key == "ssim_weight") ssim_weight = d();
  else if (key == "min_depth") min_depth = d();
  else if (key == "max_depth") max_depth = d();
  else if (key == "initial_depth") initial_depth = d();
  else if (key == "batch_size") batch_size = i();
  else if (key == "composite_batch_size") composite_batch_size = i();
  else if (key == "epochs") epochs = i();
  else if (key == "max_iterations") max_iterations = i();
  else if (key == "seed") {
    const auto v = i();
    if (v < 0) throw ConfigError("seed must be >= 0");
    seed = static_cast<uint64_t>(v);
  }
  else if (key == "auto_masking") auto_masking = b();
  else if (key == "utsf") utsf = b();
  else if (key == "sky_loss") sky_loss = b();
  else if (key == "cutmix") cutmix = b();
  else if (key == "optimizer1") optimizer1 = b();
  else if (key == "grad_clip") grad_clip = b();
  else if (key == "grad_clip_norm") grad_clip_norm = d();
  else if (key == "supervise_disparity") supervise_disparity = b();
  else if (key == "opt1_smoothness") {
    if (value == "composite") opt1_smoothness = SmoothnessTarget::kComposite;
    else if (value == "real") opt1_smoothness = SmoothnessTarget::kReal;
    else if (value == "both") opt1_smoothness = SmoothnessTarget::kBoth;
    else throw ConfigError(key + ": expected composite, real or both, got '" + value + "'");
  }
  else if (key == "synthetic_exhaustion") {
    if (value == "reshuffle") synthetic_exhaustion = SyntheticExhaustion::kReshuffle;
    else if (value == "cycle") synthetic_exhaustion = SyntheticExhaustion::kCycle;
    else throw ConfigError(key + ": expected reshuffle or cycle, got '" + value + "'");
  }
  else if (key == "checkpoint_every") checkpoint_every = i();
  else if (key == "validate_every") validate_every = i();
  else if (key == "target_abs_rel") target_abs_rel = d();
  else if (key == "eval_min_depth") eval.min_depth = d();
  else if (key == "eval_max_depth") eval.max_depth = d();
  else if (key == "eval_median_scaling") eval.median_scaling = b();
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) {
    out += k + " = " + v + "\n";
  }
  return out;
}

TrainConfig TrainConfig::from_text(const std::string& text, const std::string& origin) {
  TrainConfig cfg;
  for (const auto& [key, entry] : parse_key_values(text, origin)) {
    try {
      cfg.set(key, entry.value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(entry.line) + ": " + e.what());
    }
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_text(read_text_file(path), path.string());
}

std::vector<std::string> config_diff(const TrainConfig& a, const TrainConfig& b, const std::vector<std::string>& ignore) {
  std::vector<std::string> out;
  const auto ea = a.entries();
  const auto eb = b.entries();
  for (size_t i = 0; i < ea.size(); ++i) {
    if (std::find(ignore.begin(), ignore.end(), ea[i].first) != ignore.end()) {
      continue;
    }
    if (ea[i].second != eb[i].second) {
      out.push_back(ea[i].first + ": " + ea[i].second + " -> " + eb[i].second);
    }
  }
  return out;
}

const std::vector<std::string>& resumable_keys() {
  static const std::vector<std::string> keys{"epochs", "max_iterations", "checkpoint_every", "validate_every",
                                             "target_abs_rel"};
  return keys;
}

Networks::Networks(const NetworkConfig& cfg) : depth(cfg), color(cfg), motion(cfg) {}

std::vector<torch::Tensor> optimizer1_parameters(Networks& nets) {
  return concat(nets.depth->parameters(), nets.color->parameters());
}

std::vector<torch::Tensor> optimizer2_parameters(Networks& nets) {
  return concat(nets.depth->parameters(), nets.motion->parameters());
}

Trainer::Trainer(TrainConfig config, TrainingData data)
    : config_(std::move(config)),
      data_(std::move(data)),
      nets_(seeded_network(config_)),
      rng_(config_.seed) {
  require(!data_.train.empty(), "Trainer: empty real training split");
  if (config_.optimizer1) {
    require(!data_.synthetic.empty(), "Trainer: optimizer 1 needs synthetic samples");
  }
  if (config_.utsf && !data_.train.front().has_stereo()) {
    throw ConfigError("utsf is on but the real split has no stereo source");
  }
  nets_.depth->set_initial_disparity(
      depth_to_disp(torch::tensor(config_.initial_depth, torch::kFloat64), config_.min_depth, config_.max_depth)
          .item<double>());
  const auto& first = data_.train.front();
  if (first.height() != config_.network.height || first.width() != config_.network.width) {
    throw ConfigError("real samples are " + std::to_string(first.height()) + "x" + std::to_string(first.width()) +
                      " but the network expects " + std::to_string(config_.network.height) + "x" +
                      std::to_string(config_.network.width));
  }
  real_batches_ = static_cast<int64_t>(data_.train.size()) / config_.batch_size;
  require(real_batches_ >= 1, "Trainer: fewer real samples than batch_size");
  synthetic_batches_ =
      std::max<int64_t>(1, static_cast<int64_t>(data_.synthetic.size()) / config_.composite_batch_size);
  if (config_.optimizer1) {
    require(static_cast<int64_t>(data_.synthetic.size()) >= config_.composite_batch_size,
            "Trainer: fewer synthetic samples than composite_batch_size");
  }
  plan_ = epoch_scheduler(real_batches_, synthetic_batches_, config_.epochs, config_.seed,
                          config_.synthetic_exhaustion);
  auto options = torch::optim::AdamOptions(config_.learning_rate).betas({config_.adam_beta1, config_.adam_beta2});
  opt1_ = std::make_unique<torch::optim::Adam>(optimizer1_parameters(nets_), options);
  opt2_ = std::make_unique<torch::optim::Adam>(optimizer2_parameters(nets_), options);
  state_.learning_rate = config_.learning_rate_at(0);
  state_.rng_state = rng_to_string(rng_);
}

int64_t Trainer::total_iterations() const {
  const auto planned = static_cast<int64_t>(plan_.size());
  return config_.max_iterations > 0 ? std::min(planned, config_.max_iterations) : planned;
}

void Trainer::phase(Phase p) const {
  if (phase_hook_) {
    phase_hook_(p);
  }
}

void Trainer::set_learning_rate(double lr) {
  for (auto* opt : {opt1_.get(), opt2_.get()}) {
    for (auto& group : opt->param_groups()) {
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }
  }
  state_.learning_rate = lr;
}

void Trainer::clip(const std::vector<torch::Tensor>& params) {
  if (config_.grad_clip) {
    torch::nn::utils::clip_grad_norm_(params, config_.grad_clip_norm);
  }
}

torch::Tensor Trainer::smooth_term(const torch::Tensor& disp, const torch::Tensor& image) const {
  return smoothness(disp, image);
}

std::vector<RealSample> Trainer::real_batch(int64_t epoch, int64_t index) const {
  std::vector<int64_t> order(data_.train.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle(config_.seed ^ (0xA5A5A5A5ULL + 0x9E3779B97F4A7C15ULL * static_cast<uint64_t>(epoch + 1)));
  std::shuffle(order.begin(), order.end(), shuffle);
  std::vector<RealSample> out;
  for (int64_t k = 0; k < config_.batch_size; ++k) {
    out.push_back(data_.train[order[index * config_.batch_size + k]]);
  }
  return out;
}

std::vector<SyntheticSample> Trainer::synthetic_batch(int64_t pass, int64_t index) const {
  std::vector<int64_t> order(data_.synthetic.size());
  std::iota(order.begin(), order.end(), 0);
  const auto key = config_.synthetic_exhaustion == SyntheticExhaustion::kCycle ? 0 : pass;
  Rng shuffle(config_.seed ^ (0x5A5A5A5AULL + 0xC2B2AE3D27D4EB4FULL * static_cast<uint64_t>(key + 1)));
  std::shuffle(order.begin(), order.end(), shuffle);
  std::vector<SyntheticSample> out;
  const auto n = static_cast<int64_t>(order.size());
  for (int64_t k = 0; k < config_.composite_batch_size; ++k) {
    out.push_back(data_.synthetic[order[(index * config_.composite_batch_size + k) % n]]);
  }
  return out;
}

LossBreakdown Trainer::step_optimizer1(const std::vector<RealSample>& real,
                                       const std::vector<SyntheticSample>& synthetic) {
  require(!real.empty(), "step_optimizer1: no real samples");
  std::vector<SyntheticSample> supervised;
  for (const auto& s : synthetic) {
    if (!s.depth.defined()) {
      std::cerr << "warning: synthetic sample '" << s.id << "' has no depth label, skipped\n";
      continue;
    }
    supervised.push_back(s);
  }
  const auto batch = stack_real(real);

  // (1) Frozen inference.
  phase(Phase::kFrozenInference);
  torch::Tensor real_disp;
  torch::Tensor syn_color;
  torch::Tensor syn2real;
  {
    torch::NoGradGuard no_grad;
    real_disp = nets_.depth->forward(batch.target);
    if (!supervised.empty()) {
      std::vector<torch::Tensor> colors;
      for (const auto& s : supervised) {
        colors.push_back(s.color);
      }
      syn_color = torch::stack(colors);
      syn2real = nets_.color->forward(nets_.depth->forward(syn_color));
    }
  }

  // (2) Syn-Real CutMix composites.
  phase(Phase::kComposite);
  std::vector<CompositePair> composites;
  for (size_t k = 0; k < supervised.size(); ++k) {
    const auto& s = supervised[k];
    const auto label = config_.supervise_disparity ? 1.0 / s.depth : s.depth;
    if (config_.cutmix) {
      composites.push_back(compose_syn_real(s.color, syn2real[k], label, rng_));
    } else {
      CompositePair raw;
      raw.image = s.color;
      raw.depth_label = label;
      raw.provenance = torch::zeros({1, s.color.size(1), s.color.size(2)}, torch::kUInt8);
      composites.push_back(std::move(raw));
    }
  }

  // (3) Supervised update.
  phase(Phase::kSupervisedUpdate);
  opt1_->zero_grad();
  auto d2c = color_reconstruction_loss(nets_.color->forward(real_disp.detach()), batch.target);
  auto zero = torch::zeros({}, batch.target.options());
  auto sD = zero;
  auto sm = zero;
  if (!composites.empty()) {
    const auto mixed = assemble_batch(real, composites, rng_);
    auto [images, labels] = mixed.supervised_tensors();
    auto disp = nets_.depth->forward(images);
    auto pred = config_.supervise_disparity ? disp : disp_to_depth(disp, config_.min_depth, config_.max_depth);
    sD = supervised_depth_loss(pred, labels);
    if (config_.opt1_smoothness != SmoothnessTarget::kReal) {
      sm = sm + smooth_term(disp, images);
    }
  }
  if (config_.opt1_smoothness != SmoothnessTarget::kComposite) {
    sm = sm + smooth_term(nets_.depth->forward(batch.target), batch.target);
  }
  auto loss = optimizer1_loss(d2c, sD, sm, config_.gamma);
  loss.total.backward();
  clip(optimizer1_parameters(nets_));
  opt1_->step();
  opt1_->zero_grad();
  return loss.breakdown;
}

WeightedLoss Trainer::unsupervised_loss(const RealBatch& batch, UnsupervisedOutputs* outputs) {
  if (config_.utsf && !batch.has_stereo()) {
    throw ConfigError("utsf is on but the batch has no stereo source");
  }
  auto& motion = *nets_.motion;
  const auto disp = nets_.depth->forward(batch.target);
  const auto depth = disp_to_depth(disp, config_.min_depth, config_.max_depth);
  const auto to_prev = motion.pose(batch.prev, batch.target);
  const auto to_next = motion.pose(batch.next, batch.target);
  std::vector<WarpResult> warped{reproject(batch.prev, depth, to_prev, batch.K),
                                 reproject(batch.next, depth, to_next, batch.K)};
  std::vector<torch::Tensor> temporal_pes;
  for (const auto& w : warped) {
    temporal_pes.push_back(photometric_error(w.image, batch.target, config_.ssim_weight));
  }
  auto mask = window_validity(warped[0].validity) * window_validity(warped[1].validity);
  if (config_.auto_masking) {
    mask = mask * auto_mask(warped, {batch.prev, batch.next}, batch.target);
  }
  FusedLoss data;
  torch::Tensor raw_frames[2];
  torch::Tensor raw_domains[2];
  if (config_.utsf) {
    const auto stereo = reproject(batch.stereo, depth, batch.stereo_pose, batch.K);
    mask = mask * window_validity(stereo.validity);
    const auto spatial_pe = photometric_error(stereo.image, batch.target, config_.ssim_weight);
    raw_frames[0] = motion.uncertainty(batch.prev, batch.target);
    raw_frames[1] = motion.uncertainty(batch.next, batch.target);
    raw_domains[0] = motion.uncertainty(batch.target, batch.target);
    raw_domains[1] = motion.uncertainty(batch.stereo, batch.target);
    data = utsf_loss(temporal_pes, spatial_pe, {raw_frames[0], raw_frames[1]}, {raw_domains[0], raw_domains[1]},
                     config_.alpha, mask);
  } else {
    // Per-pixel minimum over the temporal frames, averaged over kept pixels.
    const auto best = torch::minimum(temporal_pes[0], temporal_pes[1]);
    const auto m = mask.detach();
    data.data = (best * m).sum() / m.sum().clamp_min(1.0);
  }
  const auto sm = smooth_term(disp, batch.target);
  const auto sky = config_.sky_loss ? sky_regularization(disp, batch.sky) : torch::zeros({}, disp.options());
  if (outputs != nullptr) {
    outputs->disp = disp.detach();
    outputs->mask = mask.detach();
    for (int k = 0; k < 2; ++k) {
      outputs->raw_frames[k] = raw_frames[k].defined() ? raw_frames[k].detach() : torch::Tensor();
      outputs->raw_domains[k] = raw_domains[k].defined() ? raw_domains[k].detach() : torch::Tensor();
    }
  }
  if (!config_.utsf) {
    return optimizer2_loss(data.data, sm, sky, config_.beta, config_.gamma);
  }
  return optimizer2_loss(data, sm, sky, config_.beta, config_.gamma);
}

LossBreakdown Trainer::step_optimizer2(const RealBatch& batch) {
  phase(Phase::kUnsupervisedUpdate);
  opt2_->zero_grad();
  auto loss = unsupervised_loss(batch);
  loss.total.backward();
  clip(optimizer2_parameters(nets_));
  opt2_->step();
  opt2_->zero_grad();
  return loss.breakdown;
}

MetricsReport Trainer::evaluate(const std::vector<RealSample>& samples) {
  require(!samples.empty(), "evaluate: empty split");
  torch::NoGradGuard no_grad;
  std::vector<MetricsReport> reports;
  for (const auto& s : samples) {
    require(s.gt_depth.defined(), "evaluate: sample '" + s.id + "' has no ground-truth depth");
    const auto disp = nets_.depth->forward(s.target.unsqueeze(0));
    const auto pred = disp_to_depth(disp, config_.min_depth, config_.max_depth)[0];
    const auto valid = ((s.gt_depth > config_.eval.min_depth) & (s.gt_depth < config_.eval.max_depth)).to(torch::kFloat32);
    reports.push_back(depth_metrics(pred, s.gt_depth, valid, config_.eval));
  }
  return aggregate_reports(reports);
}

void Trainer::set_run_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  run_dir_ = dir;
}

void Trainer::log_line(const std::string& file, const nlohmann::json& record) const {
  if (!run_dir_) {
    return;
  }
  std::ofstream out(*run_dir_ / file, std::ios::app);
  if (!out) {
    throw IoError("cannot append to " + (*run_dir_ / file).string());
  }
  out << record.dump() << "\n";
}

std::optional<IterationRecord> Trainer::run_iteration() {
  if (state_.iteration >= total_iterations()) {
    return std::nullopt;
  }
  const auto& step = plan_[static_cast<size_t>(state_.iteration)];
  state_.epoch = step.epoch;
  set_learning_rate(config_.learning_rate_at(step.epoch));

  IterationRecord rec;
  rec.iteration = state_.iteration;
  rec.epoch = step.epoch;
  rec.learning_rate = state_.learning_rate;
  const auto real = real_batch(step.epoch, step.real_batch);
  if (config_.optimizer1) {
    rec.optimizer1 = step_optimizer1(real, synthetic_batch(step.synthetic_pass, step.synthetic_batch));
  }
  rec.optimizer2 = step_optimizer2(stack_real(real));
  ++state_.iteration;
  state_.rng_state = rng_to_string(rng_);

  for (int k : {1, 2}) {
    const auto* b = k == 1 ? (rec.optimizer1 ? &*rec.optimizer1 : nullptr) : &rec.optimizer2;
    if (b != nullptr) {
      auto j = breakdown_json(*b);
      j["iteration"] = rec.iteration;
      j["epoch"] = rec.epoch;
      j["optimizer"] = k;
      j["lr"] = rec.learning_rate;
      log_line("losses.jsonl", j);
    }
  }

  const bool epoch_end = state_.iteration == total_iterations() ||
                         plan_[static_cast<size_t>(state_.iteration)].epoch != step.epoch;
  const bool validate_now = config_.validate_every > 0 ? state_.iteration % config_.validate_every == 0 : epoch_end;
  if (validate_now && !data_.val.empty()) {
    rec.validation = evaluate(data_.val);
    auto j = rec.validation->to_json();
    j["iteration"] = state_.iteration;
    j["epoch"] = step.epoch;
    log_line("validation.jsonl", j);
    if (rec.validation->abs_rel < state_.best_abs_rel) {
      state_.best_abs_rel = rec.validation->abs_rel;
      state_.best_iteration = state_.iteration;
      if (run_dir_) {
        save_checkpoint(*run_dir_ / "best.ckpt");
      }
    }
  }
  if (run_dir_ && config_.checkpoint_every > 0 && state_.iteration % config_.checkpoint_every == 0) {
    save_checkpoint(*run_dir_ / ("step_" + std::to_string(state_.iteration) + ".ckpt"));
  }
  return rec;
}

TrainState Trainer::run(const std::function<bool(const IterationRecord&)>& on_iteration) {
  while (auto rec = run_iteration()) {
    if (on_iteration && !on_iteration(*rec)) {
      break;
    }
    if (config_.target_abs_rel > 0.0 && rec->validation && rec->validation->abs_rel < config_.target_abs_rel) {
      break;
    }
  }
  if (run_dir_) {
    save_checkpoint(*run_dir_ / "last.ckpt");
  }
  return state_;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  torch::serialize::OutputArchive archive;
  archive.write("format_version", c10::IValue(kCheckpointVersion));
  archive.write("config", c10::IValue(config_.to_text()));
  archive.write("iteration", c10::IValue(state_.iteration));
  archive.write("epoch", c10::IValue(state_.epoch));
  archive.write("learning_rate", c10::IValue(state_.learning_rate));
  archive.write("best_abs_rel", c10::IValue(state_.best_abs_rel));
  archive.write("best_iteration", c10::IValue(state_.best_iteration));
  archive.write("rng_state", c10::IValue(rng_to_string(rng_)));
  auto block = [&](const std::string& name, const torch::nn::Module& m) {
    torch::serialize::OutputArchive sub;
    m.save(sub);
    archive.write(name, sub);
  };
  block("depth_net", *nets_.depth);
  block("color_net", *nets_.color);
  block("motion_net", *nets_.motion);
  for (auto [name, opt] : {std::pair{"optimizer1", opt1_.get()}, std::pair{"optimizer2", opt2_.get()}}) {
    torch::serialize::OutputArchive sub;
    opt->save(sub);
    archive.write(name, sub);
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  const auto tmp = path.string() + ".tmp";
  archive.save_to(tmp);
  std::filesystem::rename(tmp, path);
}

namespace {

torch::serialize::InputArchive open_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("checkpoint not found: " + path.string());
  }
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw IoError("cannot read checkpoint " + path.string());
  }
  c10::IValue version;
  if (!archive.try_read("format_version", version) || version.toInt() != kCheckpointVersion) {
    throw IoError("unsupported checkpoint format in " + path.string());
  }
  return archive;
}

c10::IValue read_value(torch::serialize::InputArchive& archive, const std::string& key) {
  c10::IValue v;
  if (!archive.try_read(key, v)) {
    throw IoError("checkpoint is missing '" + key + "'");
  }
  return v;
}

}  // namespace

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  auto archive = open_checkpoint(path);
  const auto stored = TrainConfig::from_text(read_value(archive, "config").toStringRef(), path.string());
  const auto diff = config_diff(stored, config_, resumable_keys());
  if (!diff.empty()) {
    std::string msg = "checkpoint config does not match:";
    for (const auto& line : diff) {
      msg += "\n  " + line;
    }
    throw ConfigError(msg);
  }
  for (auto [name, module] : {std::pair<const char*, torch::nn::Module*>{"depth_net", nets_.depth.get()},
                              {"color_net", nets_.color.get()},
                              {"motion_net", nets_.motion.get()}}) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(name, sub)) {
      throw IoError("checkpoint is missing '" + std::string(name) + "'");
    }
    module->load(sub);
  }
  for (auto [name, opt] : {std::pair{"optimizer1", opt1_.get()}, std::pair{"optimizer2", opt2_.get()}}) {
    torch::serialize::InputArchive sub;
    if (!archive.try_read(name, sub)) {
      throw IoError("checkpoint is missing '" + std::string(name) + "'");
    }
    opt->load(sub);
  }
  state_.iteration = read_value(archive, "iteration").toInt();
  state_.epoch = read_value(archive, "epoch").toInt();
  state_.best_abs_rel = read_value(archive, "best_abs_rel").toDouble();
  state_.best_iteration = read_value(archive, "best_iteration").toInt();
  state_.rng_state = read_value(archive, "rng_state").toStringRef();
  rng_from_string(rng_, state_.rng_state);
  set_learning_rate(read_value(archive, "learning_rate").toDouble());
}

TrainConfig checkpoint_config(const std::filesystem::path& path) {
  auto archive = open_checkpoint(path);
  return TrainConfig::from_text(read_value(archive, "config").toStringRef(), path.string());
}

void load_networks(const std::filesystem::path& path, Networks& nets, bool depth, bool color, bool motion) {
  auto archive = open_checkpoint(path);
  for (auto [name, wanted, module] :
       {std::tuple<const char*, bool, torch::nn::Module*>{"depth_net", depth, nets.depth.get()},
        {"color_net", color, nets.color.get()},
        {"motion_net", motion, nets.motion.get()}}) {
    if (!wanted) {
      continue;
    }
    torch::serialize::InputArchive sub;
    if (!archive.try_read(name, sub)) {
      throw InvalidInput("checkpoint " + path.string() + " has no '" + name + "' block");
    }
    module->load(sub);
  }
}

double fit_color_net(ColorNet& net, const torch::Tensor& disp, const torch::Tensor& color, int64_t steps, double lr,
                     int64_t batch_size, uint64_t seed) {
  require(disp.dim() == 4 && color.dim() == 4 && disp.size(0) == color.size(0), "fit_color_net: mismatched inputs");
  require(steps >= 0 && batch_size >= 1, "fit_color_net: bad schedule");
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(lr).betas({0.9, 0.999}));
  Rng rng(seed);
  const int64_t n = disp.size(0);
  std::vector<int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  int64_t cursor = n;
  for (int64_t s = 0; s < steps; ++s) {
    std::vector<int64_t> idx;
    for (int64_t k = 0; k < std::min(batch_size, n); ++k) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx.push_back(order[cursor++]);
    }
    auto index = torch::tensor(idx, torch::kLong);
    opt.zero_grad();
    auto loss = color_reconstruction_loss(net->forward(disp.index_select(0, index)), color.index_select(0, index));
    loss.backward();
    opt.step();
  }
  torch::NoGradGuard no_grad;
  return (net->forward(disp) - color).abs().mean().item<double>();
}

MetricsReport region_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid,
                             const torch::Tensor& region, const EvalProtocol& protocol) {
  auto p = pred.to(torch::kFloat64);
  double scale = 1.0;
  if (protocol.median_scaling) {
    auto scaled = median_scale(p, gt.to(torch::kFloat64), valid.to(torch::kFloat32));
    p = scaled.depth;
    scale = scaled.scale;
  }
  auto unscaled = protocol;
  unscaled.median_scaling = false;
  auto kept = ((valid > 0.5) & (region > 0.5)).to(torch::kFloat32);
  auto report = depth_metrics(p, gt.to(torch::kFloat64), kept, unscaled);
  report.scale = scale;
  report.protocol = protocol;
  return report;
}

}  // namespace udepth
