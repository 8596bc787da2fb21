#include "udepth/evaluation.hpp"

#include "udepth/losses.hpp"

namespace udepth {

nlohmann::json MetricsReport::to_json() const {
  return {{"abs_rel", abs_rel},
          {"sq_rel", sq_rel},
          {"rmse", rmse},
          {"rmse_log", rmse_log},
          {"a1", a1},
          {"a2", a2},
          {"a3", a3},
          {"n_pixels", n_pixels},
          {"n_samples", n_samples},
          {"scale", scale},
          {"min_depth", protocol.min_depth},
          {"max_depth", protocol.max_depth},
          {"median_scaling", protocol.median_scaling}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.abs_rel = j.at("abs_rel").get<double>();
  r.sq_rel = j.at("sq_rel").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.rmse_log = j.at("rmse_log").get<double>();
  r.a1 = j.at("a1").get<double>();
  r.a2 = j.at("a2").get<double>();
  r.a3 = j.at("a3").get<double>();
  r.n_pixels = j.at("n_pixels").get<int64_t>();
  r.n_samples = j.value("n_samples", int64_t{1});
  r.scale = j.value("scale", 1.0);
  r.protocol.min_depth = j.at("min_depth").get<double>();
  r.protocol.max_depth = j.at("max_depth").get<double>();
  r.protocol.median_scaling = j.at("median_scaling").get<bool>();
  return r;
}

ScaledPrediction median_scale(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid) {
  require_same_shape(pred, gt, "median_scale");
  require_same_shape(pred, valid, "median_scale");
  auto m = valid > 0.5;
  auto p = pred.detach().to(torch::kFloat64).masked_select(m);
  auto g = gt.detach().to(torch::kFloat64).masked_select(m);
  if (p.numel() == 0) {
    throw DegenerateInput("median_scale: no valid pixels");
  }
  const double mp = median_of(p).item<double>();
  if (!(mp > 0.0)) {
    throw DegenerateInput("median_scale: predicted median is not positive");
  }
  const double ratio = median_of(g).item<double>() / mp;
  return {pred * ratio, ratio};
}

MetricsReport depth_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid,
                            const EvalProtocol& protocol) {
  require_same_shape(pred, gt, "depth_metrics");
  require_same_shape(pred, valid, "depth_metrics");
  require(protocol.min_depth < protocol.max_depth, "depth_metrics: min_depth must be below max_depth");
  MetricsReport r;
  r.protocol = protocol;
  r.n_samples = 1;
  auto p_full = pred.detach().to(torch::kFloat64);
  if (protocol.median_scaling) {
    auto scaled = median_scale(p_full, gt, valid);
    p_full = scaled.depth;
    r.scale = scaled.scale;
  }
  auto m = valid > 0.5;
  auto p = p_full.masked_select(m).clamp(protocol.min_depth, protocol.max_depth);
  auto g = gt.detach().to(torch::kFloat64).masked_select(m).clamp(protocol.min_depth, protocol.max_depth);
  if (g.numel() == 0) {
    throw DegenerateInput("depth_metrics: no valid pixels");
  }
  if (!(p > 0).all().item<bool>() || !(g > 0).all().item<bool>()) {
    throw InvalidInput("depth_metrics: non-positive depth after clamping");
  }
  auto diff = p - g;
  auto ratio = torch::maximum(p / g, g / p);
  r.abs_rel = (diff.abs() / g).mean().item<double>();
  r.sq_rel = (diff * diff / g).mean().item<double>();
  r.rmse = (diff * diff).mean().sqrt().item<double>();
  auto dlog = p.log() - g.log();
  r.rmse_log = (dlog * dlog).mean().sqrt().item<double>();
  r.a1 = (ratio < 1.25).to(torch::kFloat64).mean().item<double>();
  r.a2 = (ratio < 1.25 * 1.25).to(torch::kFloat64).mean().item<double>();
  r.a3 = (ratio < 1.25 * 1.25 * 1.25).to(torch::kFloat64).mean().item<double>();
  r.n_pixels = g.numel();
  return r;
}

MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports) {
  require(!reports.empty(), "aggregate_reports: no reports");
  MetricsReport out;
  out.protocol = reports.front().protocol;
  out.scale = 0.0;
  double total = 0.0;
  for (const auto& r : reports) {
    require(r.protocol == out.protocol, "aggregate_reports: protocol mismatch");
    const double w = static_cast<double>(r.n_samples);
    out.abs_rel += w * r.abs_rel;
    out.sq_rel += w * r.sq_rel;
    out.rmse += w * r.rmse;
    out.rmse_log += w * r.rmse_log;
    out.a1 += w * r.a1;
    out.a2 += w * r.a2;
    out.a3 += w * r.a3;
    out.scale += w * r.scale;
    out.n_pixels += r.n_pixels;
    out.n_samples += r.n_samples;
    total += w;
  }
  for (double* v : {&out.abs_rel, &out.sq_rel, &out.rmse, &out.rmse_log, &out.a1, &out.a2, &out.a3, &out.scale}) {
    *v /= total;
  }
  return out;
}

ReportComparison compare_reports(const MetricsReport& before, const MetricsReport& after) {
  if (!(before.protocol == after.protocol)) {
    throw InvalidInput("compare_reports: reports were produced under different protocols");
  }
  ReportComparison c;
  c.deltas = {{"abs_rel", after.abs_rel - before.abs_rel}, {"sq_rel", after.sq_rel - before.sq_rel},
              {"rmse", after.rmse - before.rmse},          {"rmse_log", after.rmse_log - before.rmse_log},
              {"a1", after.a1 - before.a1},                {"a2", after.a2 - before.a2},
              {"a3", after.a3 - before.a3}};
  const double dr = c.deltas["abs_rel"];
  const double de = c.deltas["rmse"];
  if (dr < 0 && de < 0) {
    c.verdict = "improved";
  } else if (dr > 0 && de > 0) {
    c.verdict = "regressed";
  } else if (dr == 0 && de == 0) {
    c.verdict = "unchanged";
  } else {
    c.verdict = "mixed";
  }
  return c;
}

}  // namespace udepth
