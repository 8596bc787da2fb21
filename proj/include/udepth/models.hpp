#pragma once

#include <string>
#include <vector>

#include "udepth/common.hpp"
#include "udepth/geometry.hpp"

namespace udepth {

/// Width/depth settings for the LKA encoder and the fusion decoder.
struct NetworkConfig {
  std::vector<int64_t> stage_widths{8, 16, 24, 32};
  std::vector<int64_t> stage_depths{1, 1, 1, 1};
  /// Decoder widths per pyramid level, finest (1/2) first.
  std::vector<int64_t> decoder_widths{8, 8, 16, 24, 32};
  int64_t stem_width = 0;  // 0: mirror stage_widths[0]
  int64_t lka_kernel = 5;
  int64_t lka_dilated_kernel = 7;
  int64_t lka_dilation = 3;
  double mlp_ratio = 2.0;
  int64_t height = 64;
  int64_t width = 128;
  /// Pose/uncertainty encoder widths, one per pyramid level.
  std::vector<int64_t> pose_widths{16, 16, 24, 32, 48};
  bool share_pose_encoder = true;

  /// Throws ConfigError unless there are 4 stages, the input size is divisible
  /// by 32 and every width and kernel is usable.
  void validate() const;
  int64_t effective_stem_width() const { return stem_width > 0 ? stem_width : stage_widths.at(0); }
  /// Attention-path receptive field of one LKA module.
  int64_t lka_receptive_field() const { return lka_kernel + (lka_dilated_kernel - 1) * lka_dilation; }

  static NetworkConfig toy();
  /// Full-size presets with the VAN-B0..B3 stage widths and depths.
  static NetworkConfig van(int variant);
};

/// Depthwise conv -> depthwise dilated conv -> pointwise conv, used as a
/// multiplicative attention map on its input.
class LargeKernelAttentionImpl : public torch::nn::Module {
public:
  LargeKernelAttentionImpl(int64_t dim, int64_t kernel, int64_t dilated_kernel, int64_t dilation);
  torch::Tensor attention(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Conv2d local{nullptr};
  torch::nn::Conv2d dilated{nullptr};
  torch::nn::Conv2d pointwise{nullptr};
};
TORCH_MODULE(LargeKernelAttention);

/// VAN block: pre-norm attention sub-block and pre-norm MLP sub-block, each
/// residual with a learnable per-channel scale.
class LkaBlockImpl : public torch::nn::Module {
public:
  LkaBlockImpl(int64_t dim, const NetworkConfig& cfg);
  torch::Tensor attention_branch(const torch::Tensor& x);
  torch::Tensor mlp_branch(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::GroupNorm norm1{nullptr};
  torch::nn::Conv2d proj_in{nullptr};
  LargeKernelAttention lka{nullptr};
  torch::nn::Conv2d proj_out{nullptr};
  torch::nn::GroupNorm norm2{nullptr};
  torch::nn::Conv2d fc1{nullptr};
  torch::nn::Conv2d dw{nullptr};
  torch::nn::Conv2d fc2{nullptr};
  torch::Tensor layer_scale_1;
  torch::Tensor layer_scale_2;
};
TORCH_MODULE(LkaBlock);

/// Four VAN stages (1/4 .. 1/32) plus an extra 1/2-resolution stem head.
/// forward returns five feature maps, finest first.
class LkaEncoderImpl : public torch::nn::Module {
public:
  LkaEncoderImpl(int64_t in_channels, const NetworkConfig& cfg);
  std::vector<torch::Tensor> forward(const torch::Tensor& x);
  std::vector<int64_t> widths() const;

private:
  NetworkConfig cfg_;
  torch::nn::Sequential stem_{nullptr};
  std::vector<torch::nn::Sequential> embeds_;
  std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(LkaEncoder);

/// kSmoothAbs is sqrt(y^2 + 1e-4) - 1e-2: non-negative, zero at y = 0 and
/// with unit slope away from it, so a linear penalty on the output neither
/// saturates nor stalls near the minimum.
enum class OutputActivation { kSigmoid, kSoftplus, kSmoothAbs };

/// Progressive upward fusion: each level concatenates the upsampled coarser
/// decoder output, the encoder feature at that level and every finer encoder
/// feature pooled down to it. The head runs at input resolution.
class FusionDecoderImpl : public torch::nn::Module {
public:
  FusionDecoderImpl(std::vector<int64_t> encoder_widths, std::vector<int64_t> decoder_widths, int64_t out_channels,
                    int64_t input_skip_channels, OutputActivation activation);
  torch::Tensor forward(const std::vector<torch::Tensor>& features, const torch::Tensor& input_skip);
  /// Sets the bias of the final convolution (pre-activation).
  void set_output_bias(double value);

private:
  std::vector<int64_t> encoder_widths_;
  std::vector<torch::nn::Sequential> levels_;
  torch::nn::Sequential head_{nullptr};
  OutputActivation activation_;
};
TORCH_MODULE(FusionDecoder);

/// Image -> disparity in (0,1) at input resolution.
class DepthNetImpl : public torch::nn::Module {
public:
  explicit DepthNetImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& image);
  /// Biases the output so an untrained net predicts roughly `disp` everywhere.
  void set_initial_disparity(double disp);

  LkaEncoder encoder{nullptr};
  FusionDecoder decoder{nullptr};

private:
  NetworkConfig cfg_;
};
TORCH_MODULE(DepthNet);

/// Disparity -> RGB in [0,1]. One instance per target colour domain.
class ColorNetImpl : public torch::nn::Module {
public:
  explicit ColorNetImpl(const NetworkConfig& cfg);
  torch::Tensor forward(const torch::Tensor& disp);

  LkaEncoder encoder{nullptr};
  FusionDecoder decoder{nullptr};
};
TORCH_MODULE(ColorNet);

/// Residual CNN over a concatenated image pair, five feature levels.
class PairEncoderImpl : public torch::nn::Module {
public:
  explicit PairEncoderImpl(const std::vector<int64_t>& widths);
  std::vector<torch::Tensor> forward(const torch::Tensor& first, const torch::Tensor& second);

private:
  std::vector<torch::nn::Sequential> levels_;
};
TORCH_MODULE(PairEncoder);

/// Pose regression and raw uncertainty maps from image pairs. The
/// uncertainty decoder reuses the pose encoder unless configured otherwise.
class MotionNetImpl : public torch::nn::Module {
public:
  explicit MotionNetImpl(const NetworkConfig& cfg);

  /// Transform taking target-camera points into the source camera.
  RigidPose pose(const torch::Tensor& source, const torch::Tensor& target);
  /// Raw 6-vector (axis-angle, translation) behind pose().
  torch::Tensor pose_vector(const torch::Tensor& source, const torch::Tensor& target);
  /// Raw non-negative uncertainty [B,1,H,W] for a (related, target) pair.
  torch::Tensor uncertainty(const torch::Tensor& related, const torch::Tensor& target);

  std::vector<torch::Tensor> pose_parameters() const;
  std::vector<torch::Tensor> uncertainty_parameters() const;

  PairEncoder encoder{nullptr};
  PairEncoder uncertainty_encoder{nullptr};  // null when sharing
  torch::nn::Sequential pose_head{nullptr};
  FusionDecoder uncertainty_decoder{nullptr};
};
TORCH_MODULE(MotionNet);

/// All parameters of a module, in registration order.
inline int64_t parameter_count(const torch::nn::Module& m) {
  int64_t n = 0;
  for (const auto& p : m.parameters()) {
    n += p.numel();
  }
  return n;
}

}  // namespace udepth
