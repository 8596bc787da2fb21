#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "udepth/common.hpp"

namespace udepth {

/// Depth panels use OpenCV's MAGMA map over inverse depth, normalised by the
/// 95th percentile of each panel's inverse depth: near is bright, far is dark.
cv::Mat depth_panel(const torch::Tensor& depth);

/// Spatial-domain fusion weight in [0,1] as grey levels: white means the
/// stereo reprojection is trusted more, black the temporal one, mid grey an
/// even split.
cv::Mat weight_panel(const torch::Tensor& spatial_weight);

/// [3,H,W] RGB in [0,1] to an 8-bit BGR image.
cv::Mat color_panel(const torch::Tensor& image);

/// Row-major grid of equally sized panels with a caption strip above each
/// column. Rows may be shorter than the caption list.
cv::Mat panel_grid(const std::vector<std::vector<cv::Mat>>& rows, const std::vector<std::string>& captions,
                   int scale = 2);

/// One named series of (x, y) points.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line plot with a shared x axis, log-scaled y and a legend.
cv::Mat plot_series(const std::vector<Series>& series, const std::string& title, int width = 720, int height = 400);

/// Loss series from a losses.jsonl log: one series per optimizer total and
/// per named term, keyed "opt<k>/<name>".
std::map<std::string, Series> read_loss_series(const std::filesystem::path& jsonl);

/// Validation abs_rel by iteration from a validation.jsonl log.
Series read_validation_series(const std::filesystem::path& jsonl);

void write_image(const std::filesystem::path& path, const cv::Mat& image);

}  // namespace udepth
