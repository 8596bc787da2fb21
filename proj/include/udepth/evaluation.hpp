#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "udepth/common.hpp"

namespace udepth {

/// Evaluation settings that must agree for two reports to be comparable.
struct EvalProtocol {
  double min_depth = 0.1;
  double max_depth = 80.0;
  bool median_scaling = true;

  bool operator==(const EvalProtocol&) const = default;
};

struct MetricsReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  double a3 = 0.0;
  int64_t n_pixels = 0;
  int64_t n_samples = 0;
  double scale = 1.0;  // median ratio applied (mean over samples when aggregated)
  EvalProtocol protocol;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

struct ScaledPrediction {
  torch::Tensor depth;
  double scale = 1.0;
};

/// pred * median(gt[valid]) / median(pred[valid]). Throws DegenerateInput
/// when no pixel is valid or the predicted median is not positive.
ScaledPrediction median_scale(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid);

/// Standard depth error and threshold-accuracy statistics for one sample.
/// Both maps are clamped to [min_depth, max_depth]; thresholds are strict.
/// Median scaling is applied first when the protocol asks for it.
MetricsReport depth_metrics(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid,
                            const EvalProtocol& protocol = {});

/// Per-sample mean of reports sharing one protocol.
MetricsReport aggregate_reports(const std::vector<MetricsReport>& reports);

struct ReportComparison {
  std::map<std::string, double> deltas;  // after - before
  std::string verdict;                   // improved | regressed | unchanged | mixed
};

/// Throws InvalidInput when the protocols differ.
ReportComparison compare_reports(const MetricsReport& before, const MetricsReport& after);

}  // namespace udepth
