#pragma once

#include <array>
#include <string>

#include "udepth/common.hpp"

namespace udepth {

/// Pinhole camera parameters, in pixels.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int64_t width = 1;
  int64_t height = 1;

  /// Throws InvalidInput unless fx,fy > 0 and the principal point lies in the image.
  void validate() const;

  /// "fx fy cx cy width height" on a single line.
  std::string to_text() const;
  static Intrinsics from_text(const std::string& text);

  bool operator==(const Intrinsics&) const = default;
};

/// Batched rigid transform p' = R p + t. rotation is [B,3,3], translation [B,3].
struct RigidPose {
  torch::Tensor rotation;
  torch::Tensor translation;

  static RigidPose identity(int64_t batch, torch::TensorOptions options = torch::kFloat32);
  static RigidPose from_translation(const torch::Tensor& translation);
  /// Exponential map: axis_angle [B,3] (radians) with translation [B,3].
  static RigidPose from_axis_angle(const torch::Tensor& axis_angle, const torch::Tensor& translation);

  int64_t batch() const { return rotation.size(0); }
  RigidPose inverse() const;
  /// Rotation angle per batch element, radians.
  torch::Tensor angle() const;
  /// Orthonormality and unit determinant within tol for every batch element.
  bool is_valid(double tol = 1e-6) const;

  /// 3x4 row-major text for batch element `index`.
  std::string to_text(int64_t index = 0) const;
  static RigidPose from_text(const std::string& text);
};

/// Bilinear view-synthesis output. `validity` is 1 where every bilinear tap
/// with nonzero weight fell inside the source image.
struct WarpResult {
  torch::Tensor image;     // [B,C,H,W]
  torch::Tensor validity;  // [B,1,H,W], values in {0,1}
};

/// Projected sampling locations in pixel units.
struct PixelCoords {
  torch::Tensor xy;     // [B,H,W,2], (x, y) in pixels
  torch::Tensor valid;  // [B,1,H,W]; 0 where the point was at or behind z_eps
};

inline constexpr double kDefaultMinDepth = 0.1;
inline constexpr double kDefaultMaxDepth = 100.0;
inline constexpr double kBehindCameraEps = 1e-6;

/// depth = 1 / (1/max + (1/min - 1/max) * disp).
torch::Tensor disp_to_depth(const torch::Tensor& disp, double min_depth = kDefaultMinDepth,
                            double max_depth = kDefaultMaxDepth);

/// Inverse of disp_to_depth; depths outside [min,max] map outside [0,1].
torch::Tensor depth_to_disp(const torch::Tensor& depth, double min_depth = kDefaultMinDepth,
                            double max_depth = kDefaultMaxDepth);

/// Identity sampling grid [1,H,W,2] with (x, y) pixel centres.
torch::Tensor pixel_grid(int64_t height, int64_t width, torch::TensorOptions options = torch::kFloat32);

/// depth [B,1,H,W] -> camera-frame points [B,3,H,W].
torch::Tensor backproject(const torch::Tensor& depth, const Intrinsics& K);

PixelCoords project(const torch::Tensor& points, const RigidPose& pose, const Intrinsics& K,
                    double z_eps = kBehindCameraEps);

/// Bilinear sampling of source at coords. Out-of-bounds samples read as zero,
/// carry validity 0 and contribute no gradient.
WarpResult warp(const torch::Tensor& source, const PixelCoords& coords);

/// Synthesises the target view from `source` given the target depth and the
/// target-to-source transform.
WarpResult reproject(const torch::Tensor& source, const torch::Tensor& target_depth,
                     const RigidPose& pose_target_to_source, const Intrinsics& K);

}  // namespace udepth
