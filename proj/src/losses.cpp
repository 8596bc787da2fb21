#include "udepth/losses.hpp"

#include <cmath>
#include <limits>

namespace F = torch::nn::functional;

namespace udepth {

namespace {

torch::Tensor mean_pool3(const torch::Tensor& x) {
  return F::avg_pool2d(x, F::AvgPool2dFuncOptions(3).stride(1));
}

torch::Tensor mask_or_ones(const torch::Tensor& mask, const torch::Tensor& like) {
  if (!mask.defined()) {
    return torch::ones_like(like);
  }
  require_same_shape(mask, like, "mask");
  return mask.to(like.dtype());
}

void require_pair(const std::vector<torch::Tensor>& maps, const char* what) {
  if (maps.size() != 2) {
    throw InvalidInput(std::string(what) + ": expected exactly two maps, got " + std::to_string(maps.size()));
  }
}

}  // namespace

torch::Tensor ssim_dissimilarity(const torch::Tensor& x, const torch::Tensor& y) {
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  auto pad = F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect);
  auto xp = F::pad(x, pad);
  auto yp = F::pad(y, pad);
  auto mu_x = mean_pool3(xp);
  auto mu_y = mean_pool3(yp);
  auto sigma_x = mean_pool3(xp * xp) - mu_x * mu_x;
  auto sigma_y = mean_pool3(yp * yp) - mu_y * mu_y;
  auto sigma_xy = mean_pool3(xp * yp) - mu_x * mu_y;
  auto num = (2.0 * mu_x * mu_y + C1) * (2.0 * sigma_xy + C2);
  auto den = (mu_x * mu_x + mu_y * mu_y + C1) * (sigma_x + sigma_y + C2);
  return ((1.0 - num / den) / 2.0).clamp(0.0, 1.0);
}

torch::Tensor photometric_error(const torch::Tensor& pred, const torch::Tensor& target, double ssim_weight) {
  require_image(pred, "photometric_error");
  require_same_shape(pred, target, "photometric_error");
  require(pred.size(2) >= 2 && pred.size(3) >= 2, "photometric_error: images must be at least 2x2");
  auto l1 = (pred - target).abs();
  if (ssim_weight == 0.0) {
    return l1.mean(1, true);
  }
  return (ssim_weight * ssim_dissimilarity(pred, target) + (1.0 - ssim_weight) * l1).mean(1, true);
}

torch::Tensor window_validity(const torch::Tensor& validity) {
  require_image(validity, "window_validity");
  require(validity.size(1) == 1 && validity.size(2) >= 2 && validity.size(3) >= 2,
          "window_validity: expected a [B,1,H,W] mask of at least 2x2");
  // A pixel keeps its validity only if every sample in its reflected 3x3
  // window is valid: a min-pool, written as a negated max-pool.
  auto padded = F::pad(validity, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReflect));
  return -F::max_pool2d(-padded, F::MaxPool2dFuncOptions(3).stride(1));
}

torch::Tensor smoothness(const torch::Tensor& disp, const torch::Tensor& image) {
  require_image(disp, "smoothness");
  require_image(image, "smoothness");
  require(disp.size(0) == image.size(0) && disp.size(2) == image.size(2) && disp.size(3) == image.size(3),
          "smoothness: disparity and image shapes disagree");
  auto mean_disp = disp.mean({2, 3}, true);
  if ((mean_disp == 0).any().item<bool>()) {
    throw InvalidInput("smoothness: disparity has zero mean");
  }
  auto d = disp / mean_disp;
  auto loss = torch::zeros({}, disp.options());
  if (disp.size(3) > 1) {
    auto dx = (d.slice(3, 0, -1) - d.slice(3, 1)).abs();
    auto ix = (image.slice(3, 0, -1) - image.slice(3, 1)).abs().mean(1, true);
    loss = loss + (dx * torch::exp(-ix)).mean();
  }
  if (disp.size(2) > 1) {
    auto dy = (d.slice(2, 0, -1) - d.slice(2, 1)).abs();
    auto iy = (image.slice(2, 0, -1) - image.slice(2, 1)).abs().mean(1, true);
    loss = loss + (dy * torch::exp(-iy)).mean();
  }
  return loss;
}

torch::Tensor auto_mask_from_errors(const std::vector<torch::Tensor>& warped_errors,
                                    const std::vector<torch::Tensor>& raw_errors) {
  require(!warped_errors.empty() && warped_errors.size() == raw_errors.size(),
          "auto_mask: need at least one related frame and matching raw/warped lists");
  auto best_warped = std::get<0>(torch::cat(warped_errors, 1).min(1, true));
  auto best_raw = std::get<0>(torch::cat(raw_errors, 1).min(1, true));
  return (best_warped < best_raw).to(warped_errors.front().dtype());
}

torch::Tensor auto_mask(const std::vector<WarpResult>& warped, const std::vector<torch::Tensor>& raw,
                        const torch::Tensor& target) {
  require(!warped.empty() && warped.size() == raw.size(), "auto_mask: need matching warped/raw frame lists");
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> warped_errors;
  std::vector<torch::Tensor> raw_errors;
  const auto inf = std::numeric_limits<double>::infinity();
  for (size_t c = 0; c < warped.size(); ++c) {
    auto pe = photometric_error(warped[c].image, target);
    warped_errors.push_back(torch::where(warped[c].validity > 0.5, pe, torch::full_like(pe, inf)));
    raw_errors.push_back(photometric_error(raw[c], target));
  }
  return auto_mask_from_errors(warped_errors, raw_errors);
}

torch::Tensor height_decay(int64_t height, int64_t width, torch::TensorOptions options) {
  require(height >= 1 && width >= 1, "height_decay: H and W must be positive");
  auto rows = (static_cast<double>(height) - torch::arange(height, options)) / static_cast<double>(height);
  return rows.view({1, 1, height, 1}).expand({1, 1, height, width}).contiguous();
}

torch::Tensor sky_regularization(const torch::Tensor& disp, const torch::Tensor& sky) {
  require_image(disp, "sky_regularization");
  require_same_shape(disp, sky, "sky_regularization");
  auto mask = sky.to(disp.dtype());
  auto denom = mask.sum();
  if (denom.item<double>() == 0.0) {
    return torch::zeros({}, disp.options());
  }
  auto G = height_decay(disp.size(2), disp.size(3), disp.options());
  return (G * (mask * disp).abs()).sum() / denom;
}

torch::Tensor median_of(const torch::Tensor& values) {
  require(values.dim() == 1 && values.numel() >= 1, "median_of: expected a non-empty 1-D tensor");
  auto sorted = std::get<0>(values.sort());
  const auto n = sorted.numel();
  if (n % 2 == 1) {
    return sorted[n / 2];
  }
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

torch::Tensor affine_normalize(const torch::Tensor& d, const torch::Tensor& valid) {
  require(d.dim() >= 1, "affine_normalize: expected a batched tensor");
  auto mask = valid.defined() ? (require_same_shape(valid, d, "affine_normalize"), valid > 0.5)
                              : torch::ones_like(d, torch::kBool);
  std::vector<torch::Tensor> out;
  out.reserve(d.size(0));
  for (int64_t b = 0; b < d.size(0); ++b) {
    auto sample = d[b];
    auto m = mask[b];
    auto vals = sample.masked_select(m);
    if (vals.numel() < 2) {
      throw DegenerateInput("affine_normalize: need at least two valid pixels");
    }
    auto med = median_of(vals);
    auto scale = (vals - med).abs().mean();
    if (!(scale.item<double>() > 0.0)) {
      throw DegenerateInput("affine_normalize: constant map has zero mean absolute deviation");
    }
    out.push_back(torch::where(m, (sample - med) / scale, torch::zeros_like(sample)));
  }
  return torch::stack(out, 0);
}

torch::Tensor supervised_depth_loss(const torch::Tensor& pred, const torch::Tensor& gt, const torch::Tensor& valid) {
  require_same_shape(pred, gt, "supervised_depth_loss");
  auto mask = valid.defined() ? valid.to(pred.dtype()) : torch::ones_like(pred);
  require_same_shape(mask, pred, "supervised_depth_loss");
  auto pn = affine_normalize(pred, mask);
  auto gn = affine_normalize(gt.to(pred.dtype()), mask);
  auto dims = std::vector<int64_t>();
  for (int64_t i = 1; i < pred.dim(); ++i) {
    dims.push_back(i);
  }
  auto per_sample = ((pn - gn).abs() * mask).sum(dims) / mask.sum(dims);
  return per_sample.mean();
}

std::vector<torch::Tensor> uncertainty_weights(const std::vector<torch::Tensor>& raw) {
  require_pair(raw, "uncertainty_weights");
  require_same_shape(raw[0], raw[1], "uncertainty_weights");
  auto soft = torch::softmax(torch::stack({raw[0], raw[1]}, 0), 0);
  // For a pair, 1 - softmax_k equals the softmax weight of the other entry.
  return {soft[1], soft[0]};
}

FusedLoss temporal_fusion_loss(const std::vector<torch::Tensor>& pe_maps, const std::vector<torch::Tensor>& raw,
                               double alpha, const torch::Tensor& mask) {
  require_pair(pe_maps, "temporal_fusion_loss");
  require_same_shape(pe_maps[0], pe_maps[1], "temporal_fusion_loss");
  auto w = uncertainty_weights(raw);
  require_same_shape(w[0], pe_maps[0], "temporal_fusion_loss");
  auto m = mask_or_ones(mask, pe_maps[0]);
  auto n = m.sum().clamp_min(1.0);
  auto data = ((w[0] * pe_maps[0] + w[1] * pe_maps[1]) * m).sum() / n;
  auto reg = alpha * ((raw[0] + raw[1]) * m).sum() / n;
  return {data, reg};
}

FusedLoss utsf_loss(const std::vector<torch::Tensor>& temporal_pes, const torch::Tensor& spatial_pe,
                    const std::vector<torch::Tensor>& raw_frames, const std::vector<torch::Tensor>& raw_domains,
                    double alpha, const torch::Tensor& mask) {
  require_pair(temporal_pes, "utsf_loss");
  require_same_shape(temporal_pes[0], spatial_pe, "utsf_loss");
  require_same_shape(temporal_pes[1], spatial_pe, "utsf_loss");
  auto wc = uncertainty_weights(raw_frames);
  auto wd = uncertainty_weights(raw_domains);
  require_same_shape(wc[0], spatial_pe, "utsf_loss");
  require_same_shape(wd[0], spatial_pe, "utsf_loss");
  auto m = mask_or_ones(mask, spatial_pe);
  auto n = m.sum().clamp_min(1.0);
  auto temporal = wc[0] * temporal_pes[0] + wc[1] * temporal_pes[1];
  auto data = ((wd[0] * temporal + wd[1] * spatial_pe) * m).sum() / n;
  auto reg = alpha * ((raw_frames[0] + raw_frames[1] + raw_domains[0] + raw_domains[1]) * m).sum() / n;
  return {data, reg};
}

torch::Tensor color_reconstruction_loss(const torch::Tensor& pred_color, const torch::Tensor& input_color) {
  return photometric_error(pred_color, input_color).mean();
}

double LossBreakdown::weighted_sum() const {
  double s = 0.0;
  for (const auto& t : terms) {
    s += t.weight * t.value;
  }
  return s;
}

double LossBreakdown::value(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) {
      return t.value;
    }
  }
  throw InvalidInput("LossBreakdown: no term named '" + name + "'");
}

bool LossBreakdown::has(const std::string& name) const {
  for (const auto& t : terms) {
    if (t.name == name) {
      return true;
    }
  }
  return false;
}

WeightedLoss weighted_sum(const std::vector<std::pair<LossTerm, torch::Tensor>>& parts) {
  require(!parts.empty(), "weighted_sum: no terms");
  WeightedLoss out;
  for (const auto& [term, value] : parts) {
    require(value.numel() == 1, "weighted_sum: term '" + term.name + "' is not a scalar");
    const double v = value.item<double>();
    require(std::isfinite(v), "weighted_sum: term '" + term.name + "' is not finite");
    auto weighted = term.weight * value;
    out.total = out.total.defined() ? out.total + weighted : weighted;
    out.breakdown.terms.push_back({term.name, v, term.weight});
  }
  out.breakdown.total = out.breakdown.weighted_sum();
  return out;
}

WeightedLoss optimizer1_loss(const torch::Tensor& d2c, const torch::Tensor& supervised, const torch::Tensor& smooth,
                             double gamma) {
  return weighted_sum({{{"d2c", 0.0, 1.0}, d2c}, {{"supervised", 0.0, 1.0}, supervised}, {{"smoothness", 0.0, gamma}, smooth}});
}

WeightedLoss optimizer2_loss(const torch::Tensor& uD, const torch::Tensor& smooth, const torch::Tensor& sky,
                             double beta, double gamma) {
  return weighted_sum({{{"photometric", 0.0, 1.0}, uD}, {{"smoothness", 0.0, beta}, smooth}, {{"sky", 0.0, gamma}, sky}});
}

WeightedLoss optimizer2_loss(const FusedLoss& uD, const torch::Tensor& smooth, const torch::Tensor& sky, double beta,
                             double gamma) {
  return weighted_sum({{{"photometric", 0.0, 1.0}, uD.data},
                       {{"uncertainty_regularizer", 0.0, 1.0}, uD.regularizer},
                       {{"smoothness", 0.0, beta}, smooth},
                       {{"sky", 0.0, gamma}, sky}});
}

}  // namespace udepth
