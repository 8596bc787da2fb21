// Command-line entry point: toy data generation, training, evaluation,
// depth-to-colour transfer and figure export.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "udepth/config.hpp"
#include "udepth/data.hpp"
#include "udepth/evaluation.hpp"
#include "udepth/geometry.hpp"
#include "udepth/losses.hpp"
#include "udepth/training.hpp"
#include "udepth/visualize.hpp"

#ifndef UDEPTH_GIT_DESCRIBE
#define UDEPTH_GIT_DESCRIBE "unknown"
#endif

namespace fs = std::filesystem;
using namespace udepth;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

/// Bad invocation: reported as a usage error rather than a runtime failure.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

/// One manifest per output directory, rewritten in place when a command
/// runs again into the same directory.
class Manifest {
 public:
  Manifest(std::string command, fs::path out, uint64_t seed, std::string config_path)
      : out_(std::move(out)) {
    j_ = {{"command", std::move(command)},
          {"config_path", std::move(config_path)},
          {"seed", seed},
          {"git_describe", UDEPTH_GIT_DESCRIBE},
          {"output_dir", fs::absolute(out_).lexically_normal().string()},
          {"started", now_utc()},
          {"finished", nullptr}};
  }
  nlohmann::json& extra() { return j_; }
  void write(bool finished) {
    if (finished) {
      j_["finished"] = now_utc();
    }
    fs::create_directories(out_);
    write_text_file(out_ / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  fs::path out_;
  nlohmann::json j_;
};

std::string joined_argv(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    s += (i ? " " : "") + std::string(argv[i]);
  }
  return s;
}

fs::path data_root(const std::string& flag) {
  if (!flag.empty()) {
    return flag;
  }
  if (const char* env = std::getenv("UDEPTH_DATA_ROOT"); env != nullptr && *env != '\0') {
    return env;
  }
  throw UsageError("no dataset given: pass --data or set UDEPTH_DATA_ROOT");
}

void require_dir(const fs::path& p, const std::string& what) {
  if (!fs::is_directory(p)) {
    throw IoError(what + " not found: " + p.string());
  }
}

std::vector<SyntheticSourceInfo> synthetic_sources(const fs::path& root) {
  std::vector<SyntheticSourceInfo> out;
  const auto dir = root / "synthetic";
  if (!fs::is_directory(dir)) {
    return out;
  }
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory()) {
      dirs.push_back(e.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    out.push_back(register_synthetic_source(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs {
  std::string out;
  uint64_t seed = 0;
  int num_scenes = 8;
  int val_scenes = -1;
  int64_t height = 64;
  int64_t width = 128;
  double min_depth = 0.1;
  double max_depth = 100.0;
  std::string domain = "real_a";
  bool moving_object = false;
};

int cmd_gen_data(const GenArgs& a) {
  if (!(a.min_depth > 0.0) || !(a.max_depth > a.min_depth)) {
    throw UsageError("invalid depth range [" + std::to_string(a.min_depth) + ", " + std::to_string(a.max_depth) +
                     "]: need 0 < min-depth < max-depth");
  }
  if (a.num_scenes < 1) {
    throw UsageError("--num-scenes must be at least 1");
  }
  const int val = a.val_scenes >= 0 ? a.val_scenes : (a.num_scenes >= 2 ? std::max(1, a.num_scenes / 5) : 0);
  if (val >= a.num_scenes) {
    throw UsageError("--val-scenes must leave at least one training scene");
  }
  const fs::path out = a.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) {
    throw IoError("cannot create output directory " + out.string());
  }
  {
    // Fail early and with the path when the directory is not writable.
    const auto probe = out / ".write_probe";
    std::ofstream f(probe);
    if (!f) {
      throw IoError("output directory is not writable: " + out.string());
    }
    f.close();
    fs::remove(probe);
  }

  ToySceneSpec spec;
  spec.height = a.height;
  spec.width = a.width;
  spec.min_depth = a.min_depth;
  spec.max_depth = a.max_depth;
  spec.near_m = std::clamp(spec.near_m, a.min_depth, a.max_depth);
  spec.far_m = std::clamp(spec.far_m, spec.near_m, a.max_depth);
  spec.domain = color_domain_from_string(a.domain);
  spec.moving_object = a.moving_object;
  if (a.moving_object) {
    spec.object_motion = {0.6, 0.0, 0.0};
  }

  std::vector<RealSample> train, valid;
  std::vector<SyntheticSample> synthetic;
  for (int i = 0; i < a.num_scenes; ++i) {
    spec.seed = a.seed * 1000003ULL + static_cast<uint64_t>(i);
    auto scene = generate_toy_scene(spec);
    (i < a.num_scenes - val ? train : valid).push_back(scene.real);
    synthetic.push_back(scene.synthetic);
  }
  write_real_samples(out, "train", train);
  if (!valid.empty()) {
    write_real_samples(out, "val", valid);
  }
  write_synthetic_source(out / "synthetic" / "toy", "toy", synthetic, "meters", kDepthPngScale);
  std::cout << "wrote " << train.size() << " train, " << valid.size() << " val and " << synthetic.size()
            << " synthetic samples to " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string resume;
  std::optional<uint64_t> seed;
  bool no_utsf = false;
  std::vector<std::string> sets;
};

/// Builds the config and prints where every value came from.
TrainConfig resolve_config(const TrainArgs& a) {
  std::map<std::string, std::string> source;
  TrainConfig cfg;
  for (const auto& [k, v] : cfg.entries()) {
    source[k] = "default";
  }
  if (!a.config.empty()) {
    if (!fs::exists(a.config)) {
      throw IoError("config file not found: " + a.config);
    }
    cfg = TrainConfig::load(a.config);
    for (const auto& [k, e] : parse_key_values(read_text_file(a.config), a.config)) {
      source[k] = "file";
    }
  }
  for (const auto& s : a.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw UsageError("--set expects key=value, got '" + s + "'");
    }
    auto key = s.substr(0, eq);
    auto value = s.substr(eq + 1);
    auto trim = [](std::string& x) {
      x.erase(0, x.find_first_not_of(" \t"));
      x.erase(x.find_last_not_of(" \t") + 1);
    };
    trim(key);
    trim(value);
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--set ") + s + ": " + e.what());
    }
    source[key] = "flag";
  }
  if (a.seed) {
    cfg.seed = *a.seed;
    source["seed"] = "flag";
  }
  if (a.no_utsf) {
    cfg.utsf = false;
    source["utsf"] = "flag";
  }
  cfg.validate();

  std::cout << "config (precedence: flag > file > default)\n";
  for (const auto& [k, v] : cfg.entries()) {
    std::cout << "  " << std::left << std::setw(24) << k << std::setw(24) << v << source[k] << "\n";
  }
  return cfg;
}

int cmd_train(const TrainArgs& a, const std::string& argv_line) {
  if (a.out.empty()) {
    throw UsageError("train needs --out");
  }
  const auto cfg = resolve_config(a);
  const auto root = data_root(a.data);
  require_dir(root, "dataset");
  require_dir(root / "real", "real split directory");

  TrainingData data;
  data.train = load_real_split(root, "train");
  if (fs::exists(root / "real" / "splits" / "val.txt")) {
    data.val = load_real_split(root, "val");
  }
  if (cfg.optimizer1) {
    const auto sources = synthetic_sources(root);
    if (sources.empty()) {
      throw IoError("optimizer1 is on but there is no synthetic source under " + (root / "synthetic").string());
    }
    UnifyOptions u;
    u.height = cfg.network.height;
    u.width = cfg.network.width;
    u.min_depth = cfg.min_depth;
    u.max_depth = cfg.max_depth;
    u.seed = cfg.seed;
    data.synthetic = unify_synthetic(sources, u);
  }

  const fs::path out = a.out;
  Manifest manifest(argv_line, out, cfg.seed, a.config.empty() ? "" : fs::absolute(a.config).string());
  manifest.extra()["data_root"] = fs::absolute(root).lexically_normal().string();
  if (!a.resume.empty()) {
    manifest.extra()["resumed_from"] = a.resume;
  }
  Trainer trainer(cfg, std::move(data));
  trainer.set_run_dir(out);
  write_text_file(out / "config.txt", cfg.to_text());
  if (!a.resume.empty()) {
    trainer.load_checkpoint(a.resume);
    std::cout << "resumed at iteration " << trainer.state().iteration << "\n";
  }
  manifest.write(false);

  const auto total = trainer.total_iterations();
  const auto state = trainer.run([&](const IterationRecord& r) {
    if (r.validation) {
      std::cout << "iter " << r.iteration + 1 << "/" << total << " epoch " << r.epoch << " lr " << r.learning_rate
                << " loss2 " << r.optimizer2.total << " val abs_rel " << r.validation->abs_rel << std::endl;
    }
    return true;
  });
  trainer.save_checkpoint(out / "last.ckpt");
  manifest.extra()["iterations"] = state.iteration;
  if (state.best_iteration >= 0) {
    manifest.extra()["best_abs_rel"] = state.best_abs_rel;
    manifest.extra()["best_iteration"] = state.best_iteration;
  }
  manifest.write(true);
  std::cout << "finished at iteration " << state.iteration;
  if (state.best_iteration >= 0) {
    std::cout << ", best val abs_rel " << state.best_abs_rel << " at " << state.best_iteration;
  }
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "val";
  std::string out;
  std::string config;
  bool save_depth = false;
  std::string median_scale = "on";
};

/// Keys that must agree for weights to be usable with a given data layout.
const std::vector<std::string>& architecture_keys() {
  static const std::vector<std::string> keys{
      "height",       "width",           "stage_widths",       "stage_depths", "decoder_widths",
      "stem_width",   "lka_kernel",      "lka_dilated_kernel", "lka_dilation", "mlp_ratio",
      "pose_widths",  "share_pose_encoder", "min_depth",       "max_depth"};
  return keys;
}

std::vector<std::string> architecture_diff(const TrainConfig& expected, const TrainConfig& stored) {
  std::vector<std::string> ignore;
  for (const auto& [k, v] : expected.entries()) {
    if (std::find(architecture_keys().begin(), architecture_keys().end(), k) == architecture_keys().end()) {
      ignore.push_back(k);
    }
  }
  return config_diff(expected, stored, ignore);
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    s += (i ? sep : "") + v[i];
  }
  return s;
}

int cmd_eval(const EvalArgs& a, const std::string& argv_line) {
  if (a.checkpoint.empty() || a.out.empty()) {
    throw UsageError("eval needs --checkpoint and --out");
  }
  if (a.median_scale != "on" && a.median_scale != "off") {
    throw UsageError("--median-scale must be on or off");
  }
  auto cfg = checkpoint_config(a.checkpoint);
  if (!a.config.empty()) {
    const auto diff = architecture_diff(TrainConfig::load(a.config), cfg);
    if (!diff.empty()) {
      throw ConfigError("checkpoint does not match " + a.config + ": " + join(diff, "; "));
    }
  }
  const auto root = data_root(a.data);
  require_dir(root, "dataset");
  const auto samples = load_real_split(root, a.split);
  require(!samples.empty(), "split '" + a.split + "' is empty");
  if (samples.front().height() != cfg.network.height || samples.front().width() != cfg.network.width) {
    auto wanted = cfg;
    wanted.network.height = samples.front().height();
    wanted.network.width = samples.front().width();
    throw ConfigError("checkpoint is incompatible with split '" + a.split +
                      "': " + join(architecture_diff(wanted, cfg), "; "));
  }

  Networks nets(cfg.network);
  load_networks(a.checkpoint, nets, true, false, false);
  nets.depth->eval();
  EvalProtocol protocol = cfg.eval;
  protocol.median_scaling = a.median_scale == "on";

  const fs::path out = a.out;
  Manifest manifest(argv_line, out, cfg.seed, a.config);
  manifest.extra()["checkpoint"] = a.checkpoint;
  manifest.extra()["data_root"] = fs::absolute(root).lexically_normal().string();
  manifest.write(false);

  torch::NoGradGuard no_grad;
  std::vector<MetricsReport> reports;
  nlohmann::json per_sample = nlohmann::json::array();
  for (const auto& s : samples) {
    require(s.gt_depth.defined(), "sample '" + s.id + "' has no ground-truth depth");
    const auto pred = disp_to_depth(nets.depth->forward(s.target.unsqueeze(0)), cfg.min_depth, cfg.max_depth)[0];
    const auto valid = ((s.gt_depth > protocol.min_depth) & (s.gt_depth < protocol.max_depth)).to(torch::kFloat32);
    reports.push_back(depth_metrics(pred, s.gt_depth, valid, protocol));
    per_sample.push_back({{"id", s.id}, {"metrics", reports.back().to_json()}});
    if (a.save_depth) {
      const auto scaled = protocol.median_scaling ? pred * reports.back().scale : pred;
      write_depth(out / "depth" / (s.id + ".png"), scaled.clamp(0.0, 65535.0 / kDepthPngScale), kDepthPngScale);
    }
  }
  const auto agg = aggregate_reports(reports);
  nlohmann::json report = {{"split", a.split}, {"aggregate", agg.to_json()}, {"per_sample", per_sample}};
  write_text_file(out / "report.json", report.dump(2) + "\n");
  manifest.write(true);
  std::cout << std::setprecision(4) << "abs_rel " << agg.abs_rel << "  sq_rel " << agg.sq_rel << "  rmse " << agg.rmse
            << "  rmse_log " << agg.rmse_log << "  a1 " << agg.a1 << "  a2 " << agg.a2 << "  a3 " << agg.a3 << "  ("
            << agg.n_samples << " samples)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// d2c

struct D2cArgs {
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string depth_dir;
  std::string out;
};

int cmd_d2c(const D2cArgs& a, const std::string& argv_line) {
  if (a.checkpoint.empty() || a.out.empty()) {
    throw UsageError("d2c needs --checkpoint and --out");
  }
  const auto cfg = checkpoint_config(a.checkpoint);
  if (!cfg.optimizer1) {
    throw ConfigError("checkpoint " + a.checkpoint + " has no trained colour net (optimizer1 was off)");
  }
  std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
  if (!a.depth_dir.empty()) {
    require_dir(a.depth_dir, "depth directory");
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(a.depth_dir)) {
      if (e.path().extension() == ".png") {
        found.push_back(e.path());
      }
    }
    std::sort(found.begin(), found.end());
    inputs.insert(inputs.end(), found.begin(), found.end());
  }
  if (inputs.empty()) {
    throw UsageError("d2c needs depth inputs (positional files or --depth-dir)");
  }
  Networks nets(cfg.network);
  load_networks(a.checkpoint, nets, false, true, false);
  nets.color->eval();

  const fs::path out = a.out;
  Manifest manifest(argv_line, out, cfg.seed, "");
  manifest.extra()["checkpoint"] = a.checkpoint;
  manifest.write(false);
  torch::NoGradGuard no_grad;
  for (const auto& in : inputs) {
    if (!fs::exists(in)) {
      throw IoError("depth input not found: " + in.string());
    }
    const auto depth = read_depth(in, kDepthPngScale);
    if (depth.size(1) != cfg.network.height || depth.size(2) != cfg.network.width) {
      throw InvalidInput(in.string() + " is " + std::to_string(depth.size(1)) + "x" + std::to_string(depth.size(2)) +
                         " but the colour net expects " + std::to_string(cfg.network.height) + "x" +
                         std::to_string(cfg.network.width));
    }
    const auto disp = depth_to_disp(depth.clamp(cfg.min_depth, cfg.max_depth), cfg.min_depth, cfg.max_depth);
    const auto color = nets.color->forward(disp.unsqueeze(0).to(torch::kFloat32))[0];
    write_rgb(out / in.filename(), color);
  }
  manifest.write(true);
  std::cout << "colourised " << inputs.size() << " depth maps into " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// visualize

struct VisArgs {
  std::string run;
  std::string out;
  std::string data;
  std::string checkpoint;
  std::string split = "val";
  int num_samples = 4;
};

std::optional<fs::path> run_data_root(const VisArgs& a) {
  if (!a.data.empty()) {
    return fs::path(a.data);
  }
  const auto manifest = fs::path(a.run) / "manifest.json";
  if (fs::exists(manifest)) {
    const auto j = nlohmann::json::parse(read_text_file(manifest));
    if (j.contains("data_root")) {
      return fs::path(j["data_root"].get<std::string>());
    }
  }
  if (const char* env = std::getenv("UDEPTH_DATA_ROOT"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return std::nullopt;
}

int cmd_visualize(const VisArgs& a, const std::string& argv_line) {
  if (a.run.empty()) {
    throw UsageError("visualize needs --run");
  }
  require_dir(a.run, "run directory");
  const fs::path run = a.run;
  const fs::path out = a.out.empty() ? run / "figures" : fs::path(a.out);
  const auto losses = read_loss_series(run / "losses.jsonl");
  if (losses.empty()) {
    std::cerr << "udepth: warning: no loss records in " << (run / "losses.jsonl").string() << "; nothing written\n";
    return 0;
  }

  Manifest manifest(argv_line, out, 0, "");
  manifest.extra()["run"] = fs::absolute(run).lexically_normal().string();
  std::vector<std::string> written;
  for (int k : {1, 2}) {
    std::vector<Series> series;
    const auto prefix = "opt" + std::to_string(k) + "/";
    for (const auto& [name, s] : losses) {
      if (name.rfind(prefix, 0) == 0) {
        series.push_back(s);
      }
    }
    if (!series.empty()) {
      const auto file = "loss_opt" + std::to_string(k) + ".png";
      write_image(out / file, plot_series(series, "optimizer " + std::to_string(k) + " losses"));
      written.push_back(file);
    }
  }
  const auto val = read_validation_series(run / "validation.jsonl");
  if (!val.x.empty()) {
    write_image(out / "validation.png", plot_series({val}, "validation abs_rel"));
    written.push_back("validation.png");
  }

  fs::path ckpt = a.checkpoint;
  if (ckpt.empty()) {
    ckpt = fs::exists(run / "best.ckpt") ? run / "best.ckpt" : run / "last.ckpt";
  }
  const auto root = run_data_root(a);
  if (fs::exists(ckpt) && root && fs::exists(*root / "real" / "splits" / (a.split + ".txt"))) {
    const auto cfg = checkpoint_config(ckpt);
    Networks nets(cfg.network);
    load_networks(ckpt, nets, true, false, true);
    nets.depth->eval();
    nets.motion->eval();
    auto samples = load_real_split(*root, a.split);
    if (static_cast<int>(samples.size()) > a.num_samples) {
      samples.resize(static_cast<size_t>(a.num_samples));
    }
    torch::NoGradGuard no_grad;
    std::vector<std::vector<cv::Mat>> depth_rows, unc_rows;
    for (const auto& s : samples) {
      const auto x = s.target.unsqueeze(0);
      const auto pred = disp_to_depth(nets.depth->forward(x), cfg.min_depth, cfg.max_depth)[0];
      std::vector<cv::Mat> row{color_panel(s.target), depth_panel(pred)};
      if (s.gt_depth.defined()) {
        row.push_back(depth_panel(s.gt_depth.clamp_min(cfg.min_depth)));
      }
      depth_rows.push_back(row);
      if (s.has_stereo()) {
        const auto w = uncertainty_weights(
            {nets.motion->uncertainty(x, x), nets.motion->uncertainty(s.stereo.unsqueeze(0), x)});
        unc_rows.push_back({color_panel(s.target), weight_panel(w[0][0]), weight_panel(w[1][0])});
      }
    }
    write_image(out / "depth_grid.png", panel_grid(depth_rows, {"image", "predicted depth", "ground truth"}));
    written.push_back("depth_grid.png");
    if (!unc_rows.empty()) {
      write_image(out / "uncertainty_grid.png",
                  panel_grid(unc_rows, {"image", "temporal weight", "spatial weight"}));
      written.push_back("uncertainty_grid.png");
    }
  } else {
    std::cerr << "udepth: warning: no checkpoint or dataset for " << run.string()
              << "; writing loss curves only\n";
  }
  manifest.extra()["figures"] = written;
  manifest.write(true);
  for (const auto& f : written) {
    std::cout << (out / f).string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  const auto argv_line = joined_argv(argc, argv);

  CLI::App app{"Self-supervised monocular depth with synthetic colour transfer"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "Generate a toy real + synthetic dataset");
  g->add_option("--out", gen.out, "Dataset directory")->required();
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--num-scenes", gen.num_scenes, "Scenes to render (train + val)");
  g->add_option("--val-scenes", gen.val_scenes, "Scenes held out for validation (default: a fifth)");
  g->add_option("--height", gen.height);
  g->add_option("--width", gen.width);
  g->add_option("--min-depth", gen.min_depth, "Metres");
  g->add_option("--max-depth", gen.max_depth, "Metres; sky is rendered at this depth");
  g->add_option("--domain", gen.domain, "Real colour domain")->check(CLI::IsMember({"real_a", "real_b"}));
  g->add_flag("--moving-object", gen.moving_object, "Add an independently moving object to each scene");

  TrainArgs tr;
  std::optional<uint64_t> train_seed;
  auto* t = app.add_subcommand("train", "Train the depth, colour, pose and uncertainty nets");
  t->add_option("--config", tr.config, "key = value config file");
  t->add_option("--data", tr.data, "Dataset root (default: $UDEPTH_DATA_ROOT)");
  t->add_option("--out", tr.out, "Run directory")->required();
  t->add_option("--seed", train_seed, "Overrides the config seed");
  t->add_option("--resume", tr.resume, "Checkpoint to continue from");
  t->add_flag("--no-utsf", tr.no_utsf, "Temporal minimum + auto-masking instead of uncertainty fusion");
  t->add_option("--set", tr.sets, "Override one config key (repeatable)")->type_name("KEY=VALUE");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data, "Dataset root (default: $UDEPTH_DATA_ROOT)");
  e->add_option("--split", ev.split);
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--config", ev.config, "Reject the checkpoint unless its architecture matches this config");
  e->add_flag("--save-depth", ev.save_depth, "Write one predicted depth PNG per sample");
  e->add_option("--median-scale", ev.median_scale, "on | off");
  uint64_t unused_seed = 0;
  e->add_option("--seed", unused_seed, "Accepted for uniformity; evaluation is deterministic");

  D2cArgs dc;
  auto* d = app.add_subcommand("d2c", "Colourise depth maps with a trained colour net");
  d->add_option("--checkpoint", dc.checkpoint)->required();
  d->add_option("inputs", dc.inputs, "16-bit depth PNGs (metres * 256)");
  d->add_option("--depth-dir", dc.depth_dir, "Directory of depth PNGs");
  d->add_option("--out", dc.out)->required();
  d->add_option("--seed", unused_seed, "Accepted for uniformity; colourisation is deterministic");

  VisArgs vis;
  auto* v = app.add_subcommand("visualize", "Export loss curves and depth / uncertainty grids");
  v->add_option("--run", vis.run, "Run directory")->required();
  v->add_option("--out", vis.out, "Figure directory (default: <run>/figures)");
  v->add_option("--data", vis.data, "Dataset root (default: from the run manifest)");
  v->add_option("--checkpoint", vis.checkpoint, "Default: <run>/best.ckpt, else last.ckpt");
  v->add_option("--split", vis.split);
  v->add_option("--num-samples", vis.num_samples);
  v->add_option("--seed", unused_seed, "Accepted for uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::cerr << "udepth: usage error: " << err.what() << "\n";
    return kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen);
    if (t->parsed()) {
      tr.seed = train_seed;
      return cmd_train(tr, argv_line);
    }
    if (e->parsed()) return cmd_eval(ev, argv_line);
    if (d->parsed()) return cmd_d2c(dc, argv_line);
    if (v->parsed()) return cmd_visualize(vis, argv_line);
  } catch (const UsageError& err) {
    std::cerr << "udepth: usage error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& err) {
    std::string msg = err.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::cerr << "udepth: error: " << msg << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
