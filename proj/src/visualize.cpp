#include "udepth/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace udepth {

namespace {

cv::Mat to_u8(const torch::Tensor& map01) {
  auto u8 = (map01.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat m(static_cast<int>(u8.size(0)), static_cast<int>(u8.size(1)), CV_8UC1);
  std::memcpy(m.data, u8.data_ptr<uint8_t>(), u8.numel());
  return m;
}

torch::Tensor squeeze_map(const torch::Tensor& t, const char* what) {
  auto m = t.detach();
  while (m.dim() > 2) {
    require(m.size(0) == 1, std::string(what) + ": expected a single map");
    m = m[0];
  }
  require(m.dim() == 2, std::string(what) + ": expected a 2-D map");
  return m;
}

const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44},  {40, 39, 214},
                               {189, 103, 148}, {75, 86, 140}, {194, 119, 227}, {127, 127, 127}};

}  // namespace

cv::Mat depth_panel(const torch::Tensor& depth) {
  auto d = squeeze_map(depth, "depth_panel").to(torch::kFloat64);
  require((d > 0).all().item<bool>(), "depth_panel: depth must be positive");
  auto inv = 1.0 / d;
  auto sorted = std::get<0>(inv.flatten().sort());
  const double hi = sorted[static_cast<int64_t>(0.95 * static_cast<double>(sorted.numel() - 1))].item<double>();
  cv::Mat colored;
  cv::applyColorMap(to_u8(inv / hi), colored, cv::COLORMAP_MAGMA);
  return colored;
}

cv::Mat weight_panel(const torch::Tensor& spatial_weight) {
  cv::Mat gray = to_u8(squeeze_map(spatial_weight, "weight_panel"));
  cv::Mat bgr;
  cv::cvtColor(gray, bgr, cv::COLOR_GRAY2BGR);
  return bgr;
}

cv::Mat color_panel(const torch::Tensor& image) {
  require(image.dim() == 3 && image.size(0) == 3, "color_panel: expected [3,H,W]");
  auto hwc = (image.detach().to(torch::kFloat32).clamp(0.0, 1.0) * 255.0)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .flip({2})
                 .contiguous();
  cv::Mat m(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3);
  std::memcpy(m.data, hwc.data_ptr<uint8_t>(), hwc.numel());
  return m;
}

cv::Mat panel_grid(const std::vector<std::vector<cv::Mat>>& rows, const std::vector<std::string>& captions,
                   int scale) {
  require(!rows.empty() && !rows.front().empty(), "panel_grid: no panels");
  const int ph = rows.front().front().rows * scale;
  const int pw = rows.front().front().cols * scale;
  const int cols = static_cast<int>(std::max<size_t>(captions.size(), rows.front().size()));
  const int caption_h = 22;
  const int gap = 4;
  cv::Mat canvas(caption_h + static_cast<int>(rows.size()) * (ph + gap), cols * (pw + gap), CV_8UC3,
                 cv::Scalar(255, 255, 255));
  for (int c = 0; c < static_cast<int>(captions.size()); ++c) {
    cv::putText(canvas, captions[c], {c * (pw + gap) + 4, 15}, cv::FONT_HERSHEY_SIMPLEX, 0.45, {0, 0, 0}, 1,
                cv::LINE_AA);
  }
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < rows[r].size(); ++c) {
      cv::Mat big;
      cv::resize(rows[r][c], big, {pw, ph}, 0, 0, cv::INTER_NEAREST);
      big.copyTo(canvas(cv::Rect(static_cast<int>(c) * (pw + gap), caption_h + static_cast<int>(r) * (ph + gap), pw, ph)));
    }
  }
  return canvas;
}

cv::Mat plot_series(const std::vector<Series>& series, const std::string& title, int width, int height) {
  require(!series.empty(), "plot_series: nothing to plot");
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] > 0) {
        x0 = std::min(x0, s.x[i]);
        x1 = std::max(x1, s.x[i]);
        y0 = std::min(y0, std::log10(s.y[i]));
        y1 = std::max(y1, std::log10(s.y[i]));
      }
    }
  }
  require(std::isfinite(x0), "plot_series: no positive values");
  if (x1 == x0) x1 = x0 + 1;
  y0 = std::floor(y0);
  y1 = std::max(std::ceil(y1), y0 + 1);

  cv::Mat img(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
  const cv::Rect area(60, 30, width - 80 - 150, height - 70);
  cv::rectangle(img, area, {0, 0, 0});
  auto px = [&](double x, double y) {
    return cv::Point(area.x + static_cast<int>((x - x0) / (x1 - x0) * area.width),
                     area.y + area.height - static_cast<int>((std::log10(y) - y0) / (y1 - y0) * area.height));
  };
  for (int e = static_cast<int>(y0); e <= static_cast<int>(y1); ++e) {
    const int y = area.y + area.height - static_cast<int>((e - y0) / (y1 - y0) * area.height);
    cv::line(img, {area.x, y}, {area.x + area.width, y}, {225, 225, 225});
    cv::putText(img, "1e" + std::to_string(e), {8, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  }
  cv::putText(img, std::to_string(static_cast<long long>(x0)), {area.x, area.y + area.height + 18},
              cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, std::to_string(static_cast<long long>(x1)), {area.x + area.width - 30, area.y + area.height + 18},
              cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, "iteration", {area.x + area.width / 2 - 30, height - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.45,
              {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(img, title, {area.x, 20}, cv::FONT_HERSHEY_SIMPLEX, 0.55, {0, 0, 0}, 1, cv::LINE_AA);

  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto colour = kPalette[k % std::size(kPalette)];
    std::vector<cv::Point> pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (s.y[i] > 0) pts.push_back(px(s.x[i], s.y[i]));
    }
    if (pts.size() == 1) {
      cv::circle(img, pts.front(), 3, colour, cv::FILLED);
    } else if (!pts.empty()) {
      cv::polylines(img, pts, false, colour, 1, cv::LINE_AA);
    }
    const int ly = area.y + 12 + static_cast<int>(k) * 18;
    cv::line(img, {area.x + area.width + 10, ly - 4}, {area.x + area.width + 30, ly - 4}, colour, 2);
    cv::putText(img, s.name, {area.x + area.width + 35, ly}, cv::FONT_HERSHEY_SIMPLEX, 0.4, {0, 0, 0}, 1,
                cv::LINE_AA);
  }
  return img;
}

std::map<std::string, Series> read_loss_series(const std::filesystem::path& jsonl) {
  std::map<std::string, Series> out;
  std::ifstream in(jsonl);
  if (!in) {
    return out;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto prefix = "opt" + std::to_string(j.at("optimizer").get<int>()) + "/";
    const double it = j.at("iteration").get<double>();
    auto add = [&](const std::string& name, double v) {
      auto& s = out[prefix + name];
      s.name = prefix + name;
      s.x.push_back(it);
      s.y.push_back(v);
    };
    add("total", j.at("total").get<double>());
    for (const auto& [name, term] : j.at("terms").items()) {
      add(name, term.at("value").get<double>());
    }
  }
  return out;
}

Series read_validation_series(const std::filesystem::path& jsonl) {
  Series s;
  s.name = "val abs_rel";
  std::ifstream in(jsonl);
  std::string line;
  while (in && std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    s.x.push_back(j.at("iteration").get<double>());
    s.y.push_back(j.at("abs_rel").get<double>());
  }
  return s;
}

void write_image(const std::filesystem::path& path, const cv::Mat& image) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), image)) {
    throw IoError("cannot write image " + path.string());
  }
}

}  // namespace udepth
