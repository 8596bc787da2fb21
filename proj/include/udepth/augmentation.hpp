#pragma once

#include <random>
#include <variant>
#include <vector>

#include "udepth/common.hpp"
#include "udepth/samples.hpp"

namespace udepth {

using Rng = std::mt19937_64;

/// Axis-aligned rectangle whose sides both exceed half the image size.
struct CutMixMask {
  int64_t top = 0;
  int64_t left = 0;
  int64_t height = 0;
  int64_t width = 0;
  int64_t image_height = 0;
  int64_t image_width = 0;

  int64_t area() const { return height * width; }
  bool contains(int64_t row, int64_t col) const {
    return row >= top && row < top + height && col >= left && col < left + width;
  }
  /// [1,H,W] tensor with ones inside the rectangle.
  torch::Tensor grid(torch::TensorOptions options = torch::kFloat32) const;
  /// True when the rectangle satisfies the size and placement invariants.
  bool is_valid() const;
};

/// Side lengths uniform over the integers in (H/2, H] and (W/2, W]; placement
/// uniform over positions that keep the rectangle inside the image.
CutMixMask sample_cutmix_mask(int64_t height, int64_t width, Rng& rng);

/// M * first + (1 - M) * second for [..,C,H,W] images.
torch::Tensor cutmix(const torch::Tensor& first, const torch::Tensor& second, const CutMixMask& mask);

enum class PixelSource : uint8_t { kSynthetic = 0, kSynToReal = 1 };

/// Composited supervised pair sharing the synthetic depth label.
struct CompositePair {
  torch::Tensor image;        // [3,H,W]
  torch::Tensor depth_label;  // the synthetic label, untouched
  torch::Tensor provenance;   // [1,H,W] uint8, values of PixelSource
  CutMixMask mask;
  bool swapped = false;
};

/// Randomly swaps (synthetic, syn-to-real), samples a mask and composites.
/// The depth label is passed through unchanged.
CompositePair compose_syn_real(const torch::Tensor& syn_color, const torch::Tensor& syn2real_color,
                               const torch::Tensor& depth_label, Rng& rng);

enum class SampleRole { kUnsupervisedReal, kSupervisedComposite };

struct BatchEntry {
  SampleRole role;
  std::variant<RealSample, CompositePair> sample;
};

/// A mixed batch. Typed accessors route real samples to reprojection losses
/// and composites to the supervised loss; neither view sees the other role.
struct TrainingBatch {
  std::vector<BatchEntry> entries;

  size_t size() const { return entries.size(); }
  std::vector<RealSample> real_samples() const;
  std::vector<CompositePair> composite_pairs() const;
  /// Stacked composite images [B,3,H,W] and labels [B,1,H,W].
  std::pair<torch::Tensor, torch::Tensor> supervised_tensors() const;
};

/// Merges and shuffles both lists. Throws InvalidInput if either is empty.
TrainingBatch assemble_batch(const std::vector<RealSample>& real_samples,
                             const std::vector<CompositePair>& composite_pairs, Rng& rng);

}  // namespace udepth
