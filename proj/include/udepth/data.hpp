#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "udepth/augmentation.hpp"
#include "udepth/common.hpp"
#include "udepth/samples.hpp"

namespace udepth {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Procedural toy scenes
// ---------------------------------------------------------------------------

/// Colour rules used when shading a toy scene.
enum class ColorDomain {
  kRealA,      // textured, warm near field and hazy far field
  kRealB,      // textured, dark blue-grey palette
  kSynthetic,  // flat shading with a shifted, saturated palette
};

std::string to_string(ColorDomain d);
ColorDomain color_domain_from_string(const std::string& s);

struct ToySceneSpec {
  uint64_t seed = 0;
  int num_boxes = 5;
  /// Range of box distances (metres); must lie inside [min_depth, max_depth].
  double near_m = 6.0;
  double far_m = 35.0;
  double baseline_m = 0.54;
  double min_depth = 0.1;
  double max_depth = 100.0;
  int64_t height = 64;
  int64_t width = 128;
  ColorDomain domain = ColorDomain::kRealA;
  /// Independently moving object: displacement per frame (metres). Zero
  /// vector means no moving object.
  std::array<double, 3> object_motion{0.0, 0.0, 0.0};
  bool moving_object = false;
  /// Camera displacement per frame; sampled from the seed when unset.
  bool fixed_camera_motion = false;
  std::array<double, 3> camera_motion{0.0, 0.0, 1.0};
  int supersample = 3;

  void validate() const;
  Intrinsics intrinsics() const;
};

/// Axis-aligned textured rectangle. Fronto-parallel rectangles have normal z,
/// facades have normal x.
struct ToyRect {
  enum class Normal { kX, kZ } normal = Normal::kZ;
  double plane = 0.0;           // x or z of the supporting plane
  std::array<double, 2> u{};    // extent along x (kZ) or z (kX)
  std::array<double, 2> v{};    // extent along y
  std::array<double, 3> phase{};
  bool moving = false;
};

/// Geometry shared by all views of a toy scene. The target camera sits at the
/// world origin looking down +z with y pointing to the ground.
struct ToyGeometry {
  std::vector<ToyRect> rects;
  double camera_height = 1.5;
  double ground_far = 60.0;
  std::array<double, 3> ground_phase{};
  std::array<double, 3> camera_motion{};
  std::array<double, 3> object_motion{};
  bool has_ground = true;
};

/// One rendered view.
struct ToyView {
  torch::Tensor color;        // [3,H,W]
  torch::Tensor depth;        // [1,H,W], metres, sky at max_depth
  torch::Tensor sky;          // [1,H,W]
  torch::Tensor object_mask;  // [1,H,W]
};

struct ToyScene {
  RealSample real;
  SyntheticSample synthetic;
  ToyGeometry geometry;
  RigidPose pose_to_prev;  // target -> previous camera
  RigidPose pose_to_next;  // target -> next camera
};

ToyGeometry sample_toy_geometry(const ToySceneSpec& spec);

/// Ray-casts one view from camera centre `camera` (world coordinates, no
/// rotation) with moving rectangles displaced by `frame` * object motion.
ToyView render_toy_view(const ToySceneSpec& spec, const ToyGeometry& geometry, ColorDomain domain,
                        const std::array<double, 3>& camera, int frame);

/// Real triplet + stereo partner in spec.domain, and the target view
/// re-rendered in the synthetic colour domain.
ToyScene generate_toy_scene(const ToySceneSpec& spec);

/// Single fronto-parallel textured plane at depth `depth_m` filling the view.
ToyScene generate_plane_scene(const ToySceneSpec& spec, double depth_m);

// ---------------------------------------------------------------------------
// Image files
// ---------------------------------------------------------------------------

/// 8-bit RGB PNG <-> [3,H,W] float in [0,1].
torch::Tensor read_rgb(const fs::path& path);
void write_rgb(const fs::path& path, const torch::Tensor& image);
/// 16-bit PNG storing round(depth * scale).
torch::Tensor read_depth(const fs::path& path, double scale);
void write_depth(const fs::path& path, const torch::Tensor& depth, double scale);
/// 8-bit mask PNG, nonzero = 1.
torch::Tensor read_mask(const fs::path& path);
void write_mask(const fs::path& path, const torch::Tensor& mask);

std::string read_text_file(const fs::path& path);
void write_text_file(const fs::path& path, const std::string& text);
/// key=value lines, '#' comments.
std::map<std::string, std::string> read_key_values(const fs::path& path);

// ---------------------------------------------------------------------------
// Dataset layout
// ---------------------------------------------------------------------------

inline constexpr double kDepthPngScale = 256.0;

/// Writes a real split: <root>/real/{intrinsics.txt, meta.txt, splits/<split>.txt,
/// frames/<id>/..., sky/<id>.png}.
void write_real_samples(const fs::path& root, const std::string& split, const std::vector<RealSample>& samples,
                        double depth_scale = kDepthPngScale);
std::vector<RealSample> load_real_split(const fs::path& root, const std::string& split);

/// Sky mask for a real sample id from the parallel sky directory: a missing
/// file yields an all-zero mask; an unreadable file or a size mismatch throws
/// with the path in the message.
torch::Tensor load_sky_mask(const fs::path& sky_dir, const std::string& id, int64_t height, int64_t width);

/// Returns the sample's own sky mask or an empty mask.
torch::Tensor sky_mask_provider(const RealSample& sample);
torch::Tensor sky_mask_provider(const SyntheticSample& sample);

/// Declared properties of one synthetic source directory.
struct SyntheticSourceInfo {
  std::string name;
  fs::path root;
  std::string depth_units;  // meters | centimeters | millimeters
  double depth_scale = 1.0; // stored value / depth_scale = depth in depth_units
  int64_t height = 0;
  int64_t width = 0;

  double to_meters() const;
};

/// Reads <dir>/meta.txt. Sources without declared depth units are rejected.
SyntheticSourceInfo register_synthetic_source(const fs::path& dir);
std::vector<SyntheticSample> load_synthetic_source(const SyntheticSourceInfo& info);
void write_synthetic_source(const fs::path& dir, const std::string& name, const std::vector<SyntheticSample>& samples,
                            const std::string& depth_units, double depth_scale, int64_t out_height = 0,
                            int64_t out_width = 0);

struct UnifyOptions {
  int64_t height = 64;
  int64_t width = 128;
  double min_depth = 0.1;
  double max_depth = 100.0;
  uint64_t seed = 0;
};

/// Resizes every sample to the training size, converts depth to metres
/// clamped to [min_depth, max_depth] and shuffles all sources into one pool.
std::vector<SyntheticSample> unify_synthetic(const std::vector<SyntheticSourceInfo>& sources,
                                             const UnifyOptions& options);
/// Same, for samples already in memory (depth in metres).
std::vector<SyntheticSample> unify_synthetic(const std::vector<std::vector<SyntheticSample>>& sources,
                                             const UnifyOptions& options);

// ---------------------------------------------------------------------------
// Epoch scheduling
// ---------------------------------------------------------------------------

enum class SyntheticExhaustion { kReshuffle, kCycle };

struct PlannedStep {
  int64_t iteration = 0;
  int64_t epoch = 0;
  int64_t real_batch = 0;
  int64_t synthetic_batch = 0;
  int64_t synthetic_pass = 0;  // how many times the synthetic pool has been restarted
};

/// Pairs one real batch with one synthetic batch per iteration. The real
/// stream is reshuffled every epoch; the synthetic stream is consumed once in
/// shuffled order and restarted only when exhausted.
std::vector<PlannedStep> epoch_scheduler(int64_t real_len, int64_t syn_len, int64_t epochs, uint64_t seed,
                                         SyntheticExhaustion policy = SyntheticExhaustion::kReshuffle);

}  // namespace udepth
