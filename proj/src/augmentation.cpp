#include "udepth/augmentation.hpp"

#include <algorithm>

namespace udepth {

torch::Tensor CutMixMask::grid(torch::TensorOptions options) const {
  auto m = torch::zeros({1, image_height, image_width}, options);
  m.slice(1, top, top + height).slice(2, left, left + width).fill_(1);
  return m;
}

bool CutMixMask::is_valid() const {
  return 2 * height > image_height && 2 * width > image_width && height <= image_height &&
         width <= image_width && top >= 0 && left >= 0 && top + height <= image_height &&
         left + width <= image_width;
}

CutMixMask sample_cutmix_mask(int64_t height, int64_t width, Rng& rng) {
  require(height >= 2 && width >= 2, "sample_cutmix_mask: image must be at least 2x2");
  CutMixMask m;
  m.image_height = height;
  m.image_width = width;
  m.height = std::uniform_int_distribution<int64_t>(height / 2 + 1, height)(rng);
  m.width = std::uniform_int_distribution<int64_t>(width / 2 + 1, width)(rng);
  m.top = std::uniform_int_distribution<int64_t>(0, height - m.height)(rng);
  m.left = std::uniform_int_distribution<int64_t>(0, width - m.width)(rng);
  return m;
}

torch::Tensor cutmix(const torch::Tensor& first, const torch::Tensor& second, const CutMixMask& mask) {
  require_same_shape(first, second, "cutmix");
  require(first.dim() >= 2 && first.size(-2) == mask.image_height && first.size(-1) == mask.image_width,
          "cutmix: mask size does not match the images");
  auto m = mask.grid(first.options().dtype(torch::kBool));
  return torch::where(m, first, second);
}

CompositePair compose_syn_real(const torch::Tensor& syn_color, const torch::Tensor& syn2real_color,
                               const torch::Tensor& depth_label, Rng& rng) {
  require(syn_color.dim() == 3, "compose_syn_real: expected [3,H,W] images");
  require_same_shape(syn_color, syn2real_color, "compose_syn_real");
  CompositePair out;
  out.swapped = std::bernoulli_distribution(0.5)(rng);
  const auto& first = out.swapped ? syn2real_color : syn_color;
  const auto& second = out.swapped ? syn_color : syn2real_color;
  out.mask = sample_cutmix_mask(syn_color.size(1), syn_color.size(2), rng);
  out.image = cutmix(first, second, out.mask);
  out.depth_label = depth_label;
  auto inside = out.mask.grid(torch::kUInt8);
  const auto first_tag = static_cast<uint8_t>(out.swapped ? PixelSource::kSynToReal : PixelSource::kSynthetic);
  const auto second_tag = static_cast<uint8_t>(out.swapped ? PixelSource::kSynthetic : PixelSource::kSynToReal);
  out.provenance = torch::where(inside > 0, torch::full_like(inside, first_tag), torch::full_like(inside, second_tag));
  return out;
}

std::vector<RealSample> TrainingBatch::real_samples() const {
  std::vector<RealSample> out;
  for (const auto& e : entries) {
    if (e.role == SampleRole::kUnsupervisedReal) {
      out.push_back(std::get<RealSample>(e.sample));
    }
  }
  return out;
}

std::vector<CompositePair> TrainingBatch::composite_pairs() const {
  std::vector<CompositePair> out;
  for (const auto& e : entries) {
    if (e.role == SampleRole::kSupervisedComposite) {
      out.push_back(std::get<CompositePair>(e.sample));
    }
  }
  return out;
}

std::pair<torch::Tensor, torch::Tensor> TrainingBatch::supervised_tensors() const {
  auto pairs = composite_pairs();
  require(!pairs.empty(), "TrainingBatch: no composite pairs");
  std::vector<torch::Tensor> images;
  std::vector<torch::Tensor> labels;
  for (const auto& p : pairs) {
    images.push_back(p.image);
    labels.push_back(p.depth_label);
  }
  return {torch::stack(images), torch::stack(labels)};
}

TrainingBatch assemble_batch(const std::vector<RealSample>& real_samples,
                             const std::vector<CompositePair>& composite_pairs, Rng& rng) {
  require(!real_samples.empty(), "assemble_batch: no real samples");
  require(!composite_pairs.empty(), "assemble_batch: no composite pairs");
  TrainingBatch batch;
  for (const auto& s : real_samples) {
    batch.entries.push_back({SampleRole::kUnsupervisedReal, s});
  }
  for (const auto& p : composite_pairs) {
    batch.entries.push_back({SampleRole::kSupervisedComposite, p});
  }
  std::shuffle(batch.entries.begin(), batch.entries.end(), rng);
  return batch;
}

}  // namespace udepth
