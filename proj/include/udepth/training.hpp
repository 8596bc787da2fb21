#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "udepth/augmentation.hpp"
#include "udepth/data.hpp"
#include "udepth/evaluation.hpp"
#include "udepth/losses.hpp"
#include "udepth/models.hpp"

namespace udepth {

/// Which prediction the optimizer-1 smoothness term regularises.
enum class SmoothnessTarget { kComposite, kReal, kBoth };

struct TrainConfig {
  NetworkConfig network = NetworkConfig::toy();

  double learning_rate = 1e-4;
  double decayed_learning_rate = 1e-5;
  int64_t decay_epoch = 15;  // 0-based epoch index from which the decayed rate applies
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;

  double alpha = kUncertaintyAlpha;
  double beta = kSmoothnessBeta;
  double gamma = kGamma;
  double ssim_weight = kSsimWeight;
  double min_depth = kDefaultMinDepth;
  double max_depth = kDefaultMaxDepth;
  double initial_depth = 10.0;  // metres predicted by the untrained depth net

  int64_t batch_size = 4;            // real samples per iteration
  int64_t composite_batch_size = 4;  // synthetic samples per iteration
  int64_t epochs = 20;
  int64_t max_iterations = 0;  // 0: run every planned iteration
  uint64_t seed = 0;

  bool auto_masking = false;
  bool utsf = true;
  bool sky_loss = true;
  bool cutmix = true;
  bool optimizer1 = true;
  bool grad_clip = false;
  double grad_clip_norm = 10.0;
  bool supervise_disparity = true;
  SmoothnessTarget opt1_smoothness = SmoothnessTarget::kComposite;
  SyntheticExhaustion synthetic_exhaustion = SyntheticExhaustion::kReshuffle;

  int64_t checkpoint_every = 0;  // iterations; 0 disables periodic checkpoints
  int64_t validate_every = 0;    // iterations; 0 validates at the end of each epoch
  double target_abs_rel = 0.0;   // stop once validation abs_rel drops below this; 0 disables
  EvalProtocol eval;

  /// Throws ConfigError on an unusable combination.
  void validate() const;
  /// Learning rate in effect during a 0-based epoch.
  double learning_rate_at(int64_t epoch) const { return epoch >= decay_epoch ? decayed_learning_rate : learning_rate; }

  /// Every key with its current value, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// Sets one key from text. Unknown keys and bad values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  std::string to_text() const;
  /// Defaults overridden by the keys present in `text`.
  static TrainConfig from_text(const std::string& text, const std::string& origin = "config");
  static TrainConfig load(const std::filesystem::path& path);
};

/// Keys whose values differ between two configs, as "key: a -> b" lines.
/// Keys in `ignore` are skipped.
std::vector<std::string> config_diff(const TrainConfig& a, const TrainConfig& b,
                                     const std::vector<std::string>& ignore = {});

/// Keys that may change when resuming (they only extend or shorten the run).
const std::vector<std::string>& resumable_keys();

struct TrainState {
  int64_t iteration = 0;
  int64_t epoch = 0;
  double learning_rate = 0.0;
  double best_abs_rel = std::numeric_limits<double>::infinity();
  int64_t best_iteration = -1;
  std::string rng_state;
};

/// The four ordered phases of one training iteration.
enum class Phase {
  kFrozenInference = 1,    // depths and syn-to-real colours without gradients
  kComposite = 2,          // Syn-Real CutMix composites
  kSupervisedUpdate = 3,   // optimizer-1 update
  kUnsupervisedUpdate = 4  // optimizer-2 update
};

struct Networks {
  explicit Networks(const NetworkConfig& cfg);
  DepthNet depth;
  ColorNet color;
  MotionNet motion;
};

struct TrainingData {
  std::vector<RealSample> train;
  std::vector<RealSample> val;
  std::vector<SyntheticSample> synthetic;
};

struct IterationRecord {
  int64_t iteration = 0;
  int64_t epoch = 0;
  double learning_rate = 0.0;
  std::optional<LossBreakdown> optimizer1;
  LossBreakdown optimizer2;
  std::optional<MetricsReport> validation;
};

/// Per-pixel tensors from one unsupervised forward pass, kept for
/// inspection and figures.
struct UnsupervisedOutputs {
  torch::Tensor disp;
  torch::Tensor raw_frames[2];   // [B,1,H,W] for the previous and next frame
  torch::Tensor raw_domains[2];  // temporal and spatial
  torch::Tensor mask;
};

class Trainer {
 public:
  Trainer(TrainConfig config, TrainingData data);

  const TrainConfig& config() const { return config_; }
  const TrainState& state() const { return state_; }
  Networks& nets() { return nets_; }
  torch::optim::Adam& optimizer1() { return *opt1_; }
  torch::optim::Adam& optimizer2() { return *opt2_; }
  int64_t total_iterations() const;
  int64_t iterations_per_epoch() const { return real_batches_; }

  /// Steps ① to ③: frozen inference, compositing, one optimizer-1 update.
  LossBreakdown step_optimizer1(const std::vector<RealSample>& real, const std::vector<SyntheticSample>& synthetic);
  /// Step ④: one optimizer-2 update on a real batch.
  LossBreakdown step_optimizer2(const RealBatch& batch);
  /// The loss of step ④ without updating anything.
  WeightedLoss unsupervised_loss(const RealBatch& batch, UnsupervisedOutputs* outputs = nullptr);

  /// Next planned iteration: both steps, learning-rate schedule, validation
  /// and checkpoint cadence. Returns nullopt when the plan is finished.
  std::optional<IterationRecord> run_iteration();
  /// Runs until the plan ends, the validation target is reached or
  /// `on_iteration` returns false.
  TrainState run(const std::function<bool(const IterationRecord&)>& on_iteration = {});

  /// Median-scaled metrics of the depth net over a split.
  MetricsReport evaluate(const std::vector<RealSample>& samples);

  /// Writes JSONL loss/validation logs and checkpoints into `dir`.
  void set_run_dir(const std::filesystem::path& dir);
  void set_phase_hook(std::function<void(Phase)> hook) { phase_hook_ = std::move(hook); }

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores weights, optimizer moments, counters and random streams.
  /// Throws ConfigError listing differing keys when the stored config does
  /// not match this trainer's config outside resumable_keys().
  void load_checkpoint(const std::filesystem::path& path);

  /// Samples of real batch `index` in `epoch` and synthetic batch `index` of
  /// restart `pass`.
  std::vector<RealSample> real_batch(int64_t epoch, int64_t index) const;
  std::vector<SyntheticSample> synthetic_batch(int64_t pass, int64_t index) const;

 private:
  void phase(Phase p) const;
  void set_learning_rate(double lr);
  void clip(const std::vector<torch::Tensor>& params);
  void log_line(const std::string& file, const nlohmann::json& record) const;
  torch::Tensor smooth_term(const torch::Tensor& disp, const torch::Tensor& image) const;

  TrainConfig config_;
  TrainingData data_;
  Networks nets_;
  std::unique_ptr<torch::optim::Adam> opt1_;
  std::unique_ptr<torch::optim::Adam> opt2_;
  std::vector<PlannedStep> plan_;
  int64_t real_batches_ = 0;
  int64_t synthetic_batches_ = 0;
  TrainState state_;
  Rng rng_;
  std::function<void(Phase)> phase_hook_;
  std::optional<std::filesystem::path> run_dir_;
};

/// Parameters owned by each optimizer: depth + colour for optimizer 1,
/// depth + pose + uncertainty for optimizer 2.
std::vector<torch::Tensor> optimizer1_parameters(Networks& nets);
std::vector<torch::Tensor> optimizer2_parameters(Networks& nets);

/// Fits a colour net to (disparity, colour) pairs with the colour
/// reconstruction loss alone. Returns the final mean L1 error.
double fit_color_net(ColorNet& net, const torch::Tensor& disp, const torch::Tensor& color, int64_t steps, double lr,
                     int64_t batch_size, uint64_t seed);

/// Object-region metrics: the median scale comes from all `valid` pixels,
/// the statistics from `region` only.
MetricsReport region_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid,
                             const torch::Tensor& region, const EvalProtocol& protocol = {});

/// Checkpoint format version written by save_checkpoint.
inline constexpr int64_t kCheckpointVersion = 1;

/// Reads only the config stored in a checkpoint.
TrainConfig checkpoint_config(const std::filesystem::path& path);
/// Loads the named network blocks of a checkpoint into `nets`. Throws
/// InvalidInput if a requested block is missing.
void load_networks(const std::filesystem::path& path, Networks& nets, bool depth, bool color, bool motion);

}  // namespace udepth
