#pragma once

#include <string>
#include <vector>

#include "udepth/common.hpp"
#include "udepth/geometry.hpp"

namespace udepth {

inline constexpr double kSsimWeight = 0.85;
inline constexpr double kUncertaintyAlpha = 1e-2;
inline constexpr double kSmoothnessBeta = 1e-2;
inline constexpr double kGamma = 1e-3;

/// Per-pixel, per-channel structural dissimilarity (1 - SSIM) / 2 over a 3x3
/// mean-pooled window with reflection padding, clamped to [0,1].
torch::Tensor ssim_dissimilarity(const torch::Tensor& x, const torch::Tensor& y);

/// pe = w * (1 - SSIM)/2 + (1 - w) * |pred - target|, averaged over channels.
/// Returns [B,1,H,W]. Inputs must be [B,C,H,W] with H,W >= 2.
torch::Tensor photometric_error(const torch::Tensor& pred, const torch::Tensor& target,
                                double ssim_weight = kSsimWeight);

/// Warp validity propagated through the photometric window: 1 only where the
/// whole 3x3 neighbourhood used by the SSIM term was sampled validly.
/// Without it, pixels next to an out-of-bounds region compare against the
/// zero fill and report a spurious error.
torch::Tensor window_validity(const torch::Tensor& validity);
/// Edge-aware first-order smoothness of mean-normalised disparity.
torch::Tensor smoothness(const torch::Tensor& disp, const torch::Tensor& image);

/// Auto-mask from precomputed error maps: 1 where the best warped
/// error is strictly below the best unwarped error.
torch::Tensor auto_mask_from_errors(const std::vector<torch::Tensor>& warped_errors,
                                    const std::vector<torch::Tensor>& raw_errors);

/// Auto-mask from warped related frames, the raw related frames and the
/// target. Warp-invalid pixels count as infinite error.
torch::Tensor auto_mask(const std::vector<WarpResult>& warped, const std::vector<torch::Tensor>& raw,
                        const torch::Tensor& target);

/// Row weights (H - j) / H, shape [1,1,H,W].
torch::Tensor height_decay(int64_t height, int64_t width, torch::TensorOptions options = torch::kFloat32);

/// sum(G * |M * disp|) / sum(M); zero for an empty mask.
torch::Tensor sky_regularization(const torch::Tensor& disp, const torch::Tensor& sky);

/// Median of a 1-D tensor; even counts average the two central values.
torch::Tensor median_of(const torch::Tensor& values);

/// Per-sample (d - median) / mean|d - median| over the valid pixels of each
/// batch element. Invalid pixels are zero in the result. Throws
/// DegenerateInput for constant maps or fewer than two valid pixels.
torch::Tensor affine_normalize(const torch::Tensor& d, const torch::Tensor& valid = {});

/// Affine-invariant mean absolute error between normalised maps, averaged
/// over valid pixels and then over the batch.
torch::Tensor supervised_depth_loss(const torch::Tensor& pred, const torch::Tensor& gt,
                                    const torch::Tensor& valid = {});

/// 1 - softmax over a pair of raw uncertainty maps.
std::vector<torch::Tensor> uncertainty_weights(const std::vector<torch::Tensor>& raw);

/// Data term and uncertainty regulariser of an uncertainty-fused loss.
struct FusedLoss {
  torch::Tensor data;
  torch::Tensor regularizer;

  torch::Tensor total() const { return data + regularizer; }
};

/// Temporal fusion of per-frame photometric maps weighted by 1 - softmax of
/// their raw uncertainties, plus alpha * mean raw uncertainty. `mask`
/// selects the pixels that take part in both means.
FusedLoss temporal_fusion_loss(const std::vector<torch::Tensor>& pe_maps, const std::vector<torch::Tensor>& raw,
                               double alpha = kUncertaintyAlpha, const torch::Tensor& mask = {});

/// Temporal-spatial fusion: temporal maps fused by frame weights, then fused
/// with the stereo map by domain weights.
FusedLoss utsf_loss(const std::vector<torch::Tensor>& temporal_pes, const torch::Tensor& spatial_pe,
                    const std::vector<torch::Tensor>& raw_frames, const std::vector<torch::Tensor>& raw_domains,
                    double alpha = kUncertaintyAlpha, const torch::Tensor& mask = {});

/// mean photometric_error(pred_color, input_color).
torch::Tensor color_reconstruction_loss(const torch::Tensor& pred_color, const torch::Tensor& input_color);

struct LossTerm {
  std::string name;
  double value = 0.0;
  double weight = 1.0;
};

/// Named scalar components with their weights. `total` is always the
/// weighted sum of the terms.
struct LossBreakdown {
  std::vector<LossTerm> terms;
  double total = 0.0;

  double weighted_sum() const;
  /// Value of the named term; throws InvalidInput if absent.
  double value(const std::string& name) const;
  bool has(const std::string& name) const;
};

struct WeightedLoss {
  torch::Tensor total;
  LossBreakdown breakdown;
};

/// Builds total = sum(weight * value) over named scalar tensors.
WeightedLoss weighted_sum(const std::vector<std::pair<LossTerm, torch::Tensor>>& parts);

/// d2c + supervised + gamma * smoothness.
WeightedLoss optimizer1_loss(const torch::Tensor& d2c, const torch::Tensor& supervised,
                             const torch::Tensor& smooth, double gamma = kGamma);

/// uD + beta * smoothness + gamma * sky.
WeightedLoss optimizer2_loss(const torch::Tensor& uD, const torch::Tensor& smooth, const torch::Tensor& sky,
                             double beta = kSmoothnessBeta, double gamma = kGamma);

/// Same as above with the fused loss split into its photometric and
/// uncertainty-regulariser components.
WeightedLoss optimizer2_loss(const FusedLoss& uD, const torch::Tensor& smooth, const torch::Tensor& sky,
                             double beta = kSmoothnessBeta, double gamma = kGamma);

}  // namespace udepth
