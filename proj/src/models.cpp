#include "udepth/models.hpp"

#include <cmath>

namespace nn = torch::nn;
namespace F = torch::nn::functional;

namespace udepth {

namespace {

nn::Conv2d conv(int64_t in, int64_t out, int64_t kernel, int64_t stride = 1, int64_t groups = 1, int64_t dilation = 1) {
  const int64_t pad = (kernel / 2) * dilation;
  return nn::Conv2d(nn::Conv2dOptions(in, out, kernel).stride(stride).padding(pad).groups(groups).dilation(dilation));
}

nn::GroupNorm layer_norm(int64_t channels) { return nn::GroupNorm(nn::GroupNormOptions(1, channels)); }

torch::Tensor normalize_image(const torch::Tensor& x) { return (x - 0.45) / 0.225; }

torch::Tensor upsample2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{x.size(2) * 2, x.size(3) * 2})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

class ResidualDownImpl : public nn::Module {
public:
  ResidualDownImpl(int64_t in, int64_t out) {
    conv1 = register_module("conv1", conv(in, out, 3, 2));
    norm1 = register_module("norm1", layer_norm(out));
    conv2 = register_module("conv2", conv(out, out, 3));
    norm2 = register_module("norm2", layer_norm(out));
    shortcut = register_module("shortcut", nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(2)));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto y = torch::relu(norm1(conv1(x)));
    y = norm2(conv2(y));
    return torch::relu(y + shortcut(x));
  }

  nn::Conv2d conv1{nullptr}, conv2{nullptr}, shortcut{nullptr};
  nn::GroupNorm norm1{nullptr}, norm2{nullptr};
};
TORCH_MODULE(ResidualDown);

}  // namespace

void NetworkConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("NetworkConfig: " + m); };
  if (stage_widths.size() != 4 || stage_depths.size() != 4) {
    fail("exactly 4 encoder stages are required");
  }
  if (decoder_widths.size() != 5 || pose_widths.size() != 5) {
    fail("decoder_widths and pose_widths need 5 entries (1/2 .. 1/32)");
  }
  for (auto w : stage_widths) {
    if (w < 1) fail("stage widths must be >= 1");
  }
  for (auto d : stage_depths) {
    if (d < 1) fail("stage depths must be >= 1");
  }
  for (auto w : decoder_widths) {
    if (w < 1) fail("decoder widths must be >= 1");
  }
  for (auto w : pose_widths) {
    if (w < 1) fail("pose widths must be >= 1");
  }
  if (height < 32 || width < 32 || height % 32 != 0 || width % 32 != 0) {
    fail("input size " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by 32");
  }
  if (lka_kernel < 1 || lka_kernel % 2 == 0 || lka_dilated_kernel < 1 || lka_dilated_kernel % 2 == 0) {
    fail("LKA kernels must be odd and positive");
  }
  if (lka_dilation < 1) fail("LKA dilation must be >= 1");
  if (!(mlp_ratio > 0.0)) fail("mlp_ratio must be positive");
}

NetworkConfig NetworkConfig::toy() { return {}; }

NetworkConfig NetworkConfig::van(int variant) {
  NetworkConfig c;
  c.mlp_ratio = 4.0;
  c.decoder_widths = {16, 32, 64, 128, 256};
  c.pose_widths = {64, 64, 128, 256, 512};
  c.height = 192;
  c.width = 640;
  switch (variant) {
    case 0:
      c.stage_widths = {32, 64, 160, 256};
      c.stage_depths = {3, 3, 5, 2};
      break;
    case 1:
      c.stage_widths = {64, 128, 320, 512};
      c.stage_depths = {2, 2, 4, 2};
      break;
    case 2:
      c.stage_widths = {64, 128, 320, 512};
      c.stage_depths = {3, 3, 12, 3};
      break;
    case 3:
      c.stage_widths = {64, 128, 320, 512};
      c.stage_depths = {3, 5, 27, 3};
      break;
    default:
      throw ConfigError("NetworkConfig: VAN variant must be 0..3");
  }
  return c;
}

LargeKernelAttentionImpl::LargeKernelAttentionImpl(int64_t dim, int64_t kernel, int64_t dilated_kernel,
                                                   int64_t dilation) {
  local = register_module("local", conv(dim, dim, kernel, 1, dim));
  dilated = register_module("dilated", conv(dim, dim, dilated_kernel, 1, dim, dilation));
  pointwise = register_module("pointwise", nn::Conv2d(nn::Conv2dOptions(dim, dim, 1)));
}

torch::Tensor LargeKernelAttentionImpl::attention(const torch::Tensor& x) { return pointwise(dilated(local(x))); }

torch::Tensor LargeKernelAttentionImpl::forward(const torch::Tensor& x) { return x * attention(x); }

LkaBlockImpl::LkaBlockImpl(int64_t dim, const NetworkConfig& cfg) {
  const auto hidden = std::max<int64_t>(1, static_cast<int64_t>(std::lround(dim * cfg.mlp_ratio)));
  norm1 = register_module("norm1", layer_norm(dim));
  proj_in = register_module("proj_in", nn::Conv2d(nn::Conv2dOptions(dim, dim, 1)));
  lka = register_module("lka", LargeKernelAttention(dim, cfg.lka_kernel, cfg.lka_dilated_kernel, cfg.lka_dilation));
  proj_out = register_module("proj_out", nn::Conv2d(nn::Conv2dOptions(dim, dim, 1)));
  norm2 = register_module("norm2", layer_norm(dim));
  fc1 = register_module("fc1", nn::Conv2d(nn::Conv2dOptions(dim, hidden, 1)));
  dw = register_module("dw", conv(hidden, hidden, 3, 1, hidden));
  fc2 = register_module("fc2", nn::Conv2d(nn::Conv2dOptions(hidden, dim, 1)));
  layer_scale_1 = register_parameter("layer_scale_1", torch::full({1, dim, 1, 1}, 1e-2));
  layer_scale_2 = register_parameter("layer_scale_2", torch::full({1, dim, 1, 1}, 1e-2));
}

torch::Tensor LkaBlockImpl::attention_branch(const torch::Tensor& x) {
  auto n = norm1(x);
  auto a = proj_out(lka(torch::gelu(proj_in(n))));
  return a + n;
}

torch::Tensor LkaBlockImpl::mlp_branch(const torch::Tensor& x) {
  return fc2(torch::gelu(dw(fc1(norm2(x)))));
}

torch::Tensor LkaBlockImpl::forward(const torch::Tensor& x) {
  auto y = x + layer_scale_1 * attention_branch(x);
  return y + layer_scale_2 * mlp_branch(y);
}

LkaEncoderImpl::LkaEncoderImpl(int64_t in_channels, const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const auto stem_w = cfg_.effective_stem_width();
  stem_ = register_module("stem", nn::Sequential(conv(in_channels, stem_w, 3, 2), layer_norm(stem_w), nn::GELU()));
  int64_t prev = in_channels;
  for (size_t i = 0; i < 4; ++i) {
    const auto w = cfg_.stage_widths[i];
    auto embed = i == 0 ? nn::Sequential(conv(prev, w, 7, 4), layer_norm(w)) : nn::Sequential(conv(prev, w, 3, 2), layer_norm(w));
    embeds_.push_back(register_module("embed" + std::to_string(i + 1), embed));
    nn::Sequential stage;
    for (int64_t d = 0; d < cfg_.stage_depths[i]; ++d) {
      stage->push_back(LkaBlock(w, cfg_));
    }
    stage->push_back(layer_norm(w));
    stages_.push_back(register_module("stage" + std::to_string(i + 1), stage));
    prev = w;
  }
}

std::vector<torch::Tensor> LkaEncoderImpl::forward(const torch::Tensor& x) {
  require_image(x, "LkaEncoder");
  if (x.size(2) % 32 != 0 || x.size(3) % 32 != 0) {
    throw InvalidInput("LkaEncoder: input " + shape_string(x) + " is not divisible by 32");
  }
  std::vector<torch::Tensor> out{stem_->forward(x)};
  auto y = x;
  for (size_t i = 0; i < 4; ++i) {
    y = stages_[i]->forward(embeds_[i]->forward(y));
    out.push_back(y);
  }
  return out;
}

std::vector<int64_t> LkaEncoderImpl::widths() const {
  return {cfg_.effective_stem_width(), cfg_.stage_widths[0], cfg_.stage_widths[1], cfg_.stage_widths[2],
          cfg_.stage_widths[3]};
}

FusionDecoderImpl::FusionDecoderImpl(std::vector<int64_t> encoder_widths, std::vector<int64_t> decoder_widths,
                                     int64_t out_channels, int64_t input_skip_channels, OutputActivation activation)
    : encoder_widths_(std::move(encoder_widths)), activation_(activation) {
  require(encoder_widths_.size() == 5 && decoder_widths.size() == 5, "FusionDecoder: expected 5 levels");
  levels_.resize(5);
  for (int l = 4; l >= 0; --l) {
    int64_t in = l < 4 ? decoder_widths[l + 1] : 0;
    for (int j = 0; j <= l; ++j) {
      in += encoder_widths_[j];
    }
    const auto w = decoder_widths[l];
    levels_[l] = register_module("level" + std::to_string(l), nn::Sequential(conv(in, w, 3), nn::ELU(), conv(w, w, 3), nn::ELU()));
  }
  const auto w0 = decoder_widths[0];
  head_ = register_module("head", nn::Sequential(conv(w0 + input_skip_channels, w0, 3), nn::ELU(), conv(w0, out_channels, 3)));
}

torch::Tensor FusionDecoderImpl::forward(const std::vector<torch::Tensor>& features, const torch::Tensor& input_skip) {
  require(features.size() == 5, "FusionDecoder: expected 5 feature levels");
  torch::Tensor x;
  for (int l = 4; l >= 0; --l) {
    std::vector<torch::Tensor> parts;
    if (l < 4) {
      parts.push_back(upsample2(x));
    }
    parts.push_back(features[l]);
    for (int j = 0; j < l; ++j) {
      const int64_t k = int64_t{1} << (l - j);
      parts.push_back(F::avg_pool2d(features[j], F::AvgPool2dFuncOptions(k).stride(k)));
    }
    x = levels_[l]->forward(torch::cat(parts, 1));
  }
  x = upsample2(x);
  if (input_skip.defined()) {
    x = torch::cat({x, input_skip}, 1);
  }
  auto y = head_->forward(x);
  switch (activation_) {
    case OutputActivation::kSigmoid:
      return torch::sigmoid(y);
    case OutputActivation::kSoftplus:
      return F::softplus(y);
    case OutputActivation::kSmoothAbs:
      return (y * y + 1e-4).sqrt() - 1e-2;
  }
  return y;
}

void FusionDecoderImpl::set_output_bias(double value) {
  torch::NoGradGuard no_grad;
  auto last = head_->ptr<nn::Conv2dImpl>(head_->size() - 1);
  last->bias.fill_(value);
}

void DepthNetImpl::set_initial_disparity(double disp) {
  require(disp > 0.0 && disp < 1.0, "DepthNet: initial disparity must lie in (0,1)");
  decoder->set_output_bias(std::log(disp / (1.0 - disp)));
}

DepthNetImpl::DepthNetImpl(const NetworkConfig& cfg) : cfg_(cfg) {
  encoder = register_module("encoder", LkaEncoder(3, cfg));
  decoder = register_module("decoder", FusionDecoder(encoder->widths(), cfg.decoder_widths, 1, 3, OutputActivation::kSigmoid));
}

torch::Tensor DepthNetImpl::forward(const torch::Tensor& image) {
  require_image(image, "DepthNet");
  require(image.size(1) == 3, "DepthNet: expected RGB input");
  auto x = normalize_image(image);
  return decoder(encoder(x), x);
}

ColorNetImpl::ColorNetImpl(const NetworkConfig& cfg) {
  encoder = register_module("encoder", LkaEncoder(1, cfg));
  decoder = register_module("decoder", FusionDecoder(encoder->widths(), cfg.decoder_widths, 3, 1, OutputActivation::kSigmoid));
}

torch::Tensor ColorNetImpl::forward(const torch::Tensor& disp) {
  require_image(disp, "ColorNet");
  require(disp.size(1) == 1, "ColorNet: expected a single-channel disparity");
  // Log-disparity spreads the small far-field values.
  auto x = (torch::log(disp.clamp_min(1e-4)) + 5.0) / 2.0;
  return decoder(encoder(x), x);
}

PairEncoderImpl::PairEncoderImpl(const std::vector<int64_t>& widths) {
  require(widths.size() == 5, "PairEncoder: expected 5 widths");
  levels_.push_back(register_module("level0", nn::Sequential(conv(8, widths[0], 7, 2), layer_norm(widths[0]), nn::ReLU())));
  for (size_t k = 1; k < 5; ++k) {
    levels_.push_back(register_module("level" + std::to_string(k), nn::Sequential(ResidualDown(widths[k - 1], widths[k]))));
  }
}

std::vector<torch::Tensor> PairEncoderImpl::forward(const torch::Tensor& first, const torch::Tensor& second) {
  require_same_shape(first, second, "PairEncoder");
  // Normalised pixel coordinates let the encoder tell expansion from contraction.
  const auto h = first.size(2);
  const auto w = first.size(3);
  auto ys = torch::linspace(-1.0, 1.0, h, first.options()).view({1, 1, h, 1}).expand({first.size(0), 1, h, w});
  auto xs = torch::linspace(-1.0, 1.0, w, first.options()).view({1, 1, 1, w}).expand({first.size(0), 1, h, w});
  auto x = torch::cat({normalize_image(first), normalize_image(second), xs, ys}, 1);
  std::vector<torch::Tensor> out;
  for (auto& level : levels_) {
    x = level->forward(x);
    out.push_back(x);
  }
  return out;
}

MotionNetImpl::MotionNetImpl(const NetworkConfig& cfg) {
  cfg.validate();
  encoder = register_module("encoder", PairEncoder(cfg.pose_widths));
  if (!cfg.share_pose_encoder) {
    uncertainty_encoder = register_module("uncertainty_encoder", PairEncoder(cfg.pose_widths));
  }
  pose_head = register_module("pose_head", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(cfg.pose_widths[4], 16, 1)), nn::ReLU(),
                                                          conv(16, 16, 3), nn::ReLU(), nn::Conv2d(nn::Conv2dOptions(16, 6, 1))));
  uncertainty_decoder = register_module(
      "uncertainty_decoder", FusionDecoder(cfg.pose_widths, cfg.decoder_widths, 1, 0, OutputActivation::kSmoothAbs));
}

torch::Tensor MotionNetImpl::pose_vector(const torch::Tensor& source, const torch::Tensor& target) {
  auto head = [&](const torch::Tensor& a, const torch::Tensor& b) {
    return pose_head->forward(encoder(a, b).back()).mean({2, 3});
  };
  // Antisymmetric in its inputs: swapping the frames negates the motion.
  auto v = 0.5 * (head(source, target) - head(target, source));
  // Small initial rotations; translation is left at its natural scale.
  return torch::cat({0.01 * v.slice(1, 0, 3), v.slice(1, 3, 6)}, 1);
}

RigidPose MotionNetImpl::pose(const torch::Tensor& source, const torch::Tensor& target) {
  auto v = pose_vector(source, target);
  return RigidPose::from_axis_angle(v.slice(1, 0, 3), v.slice(1, 3, 6));
}

torch::Tensor MotionNetImpl::uncertainty(const torch::Tensor& related, const torch::Tensor& target) {
  auto features = uncertainty_encoder ? uncertainty_encoder(related, target) : encoder(related, target);
  return uncertainty_decoder(features, torch::Tensor());
}

std::vector<torch::Tensor> MotionNetImpl::pose_parameters() const {
  auto p = encoder->parameters();
  for (const auto& t : pose_head->parameters()) {
    p.push_back(t);
  }
  return p;
}

std::vector<torch::Tensor> MotionNetImpl::uncertainty_parameters() const {
  std::vector<torch::Tensor> p;
  if (uncertainty_encoder) {
    p = uncertainty_encoder->parameters();
  }
  for (const auto& t : uncertainty_decoder->parameters()) {
    p.push_back(t);
  }
  return p;
}

}  // namespace udepth
