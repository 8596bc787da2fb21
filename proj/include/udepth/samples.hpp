#pragma once

#include <optional>
#include <string>
#include <vector>

#include "udepth/common.hpp"
#include "udepth/geometry.hpp"

namespace udepth {

/// Real-world unsupervised sample: temporal triplet plus a same-instant
/// stereo partner. Images are [3,H,W] in [0,1]; maps are [1,H,W].
struct RealSample {
  std::string id;
  torch::Tensor prev;
  torch::Tensor target;
  torch::Tensor next;
  torch::Tensor stereo;  // undefined when the split has no stereo partner
  Intrinsics K;
  RigidPose stereo_pose;  // target -> stereo source, batch 1
  torch::Tensor sky;      // undefined means "no mask"
  torch::Tensor gt_depth;     // evaluation only, metres
  torch::Tensor object_mask;  // toy scenes: pixels of independently moving objects

  int64_t height() const { return target.size(1); }
  int64_t width() const { return target.size(2); }
  bool has_stereo() const { return stereo.defined(); }
  /// Throws InvalidInput when frames disagree in size or the stereo baseline is zero.
  void validate() const;
};

/// Synthetic supervised sample with dense metric depth.
struct SyntheticSample {
  std::string id;
  std::string source;
  torch::Tensor color;  // [3,H,W]
  torch::Tensor depth;  // [1,H,W], metres, dense and positive
  torch::Tensor sky;    // [1,H,W]

  void validate() const;
};

/// Real samples stacked along a batch axis.
struct RealBatch {
  torch::Tensor prev;
  torch::Tensor target;
  torch::Tensor next;
  torch::Tensor stereo;
  RigidPose stereo_pose;
  Intrinsics K;
  torch::Tensor sky;  // zeros where a sample had no mask
  torch::Tensor gt_depth;
  torch::Tensor object_mask;

  int64_t size() const { return target.size(0); }
  bool has_stereo() const { return stereo.defined(); }
};

/// Stacks samples that share intrinsics. Throws InvalidInput on an empty list,
/// size mismatch or differing intrinsics.
RealBatch stack_real(const std::vector<RealSample>& samples);

}  // namespace udepth
