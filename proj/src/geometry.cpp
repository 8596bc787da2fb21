#include "udepth/geometry.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <vector>

namespace F = torch::nn::functional;

namespace udepth {

void Intrinsics::validate() const {
  require(std::isfinite(fx) && fx > 0.0, "Intrinsics: fx must be positive");
  require(std::isfinite(fy) && fy > 0.0, "Intrinsics: fy must be positive");
  require(width >= 1 && height >= 1, "Intrinsics: image size must be positive");
  require(cx >= 0.0 && cx < static_cast<double>(width), "Intrinsics: cx outside [0,width)");
  require(cy >= 0.0 && cy < static_cast<double>(height), "Intrinsics: cy outside [0,height)");
}

std::string Intrinsics::to_text() const {
  std::ostringstream out;
  out << std::setprecision(17) << fx << ' ' << fy << ' ' << cx << ' ' << cy << ' ' << width << ' '
      << height << '\n';
  return out.str();
}

Intrinsics Intrinsics::from_text(const std::string& text) {
  std::istringstream in(text);
  Intrinsics K;
  if (!(in >> K.fx >> K.fy >> K.cx >> K.cy >> K.width >> K.height)) {
    throw InvalidInput("Intrinsics: expected 6 fields 'fx fy cx cy width height'");
  }
  std::string extra;
  if (in >> extra) {
    throw InvalidInput("Intrinsics: trailing content '" + extra + "'");
  }
  K.validate();
  return K;
}

RigidPose RigidPose::identity(int64_t batch, torch::TensorOptions options) {
  return {torch::eye(3, options).unsqueeze(0).repeat({batch, 1, 1}), torch::zeros({batch, 3}, options)};
}

RigidPose RigidPose::from_translation(const torch::Tensor& translation) {
  require(translation.dim() == 2 && translation.size(1) == 3, "RigidPose: translation must be [B,3]");
  auto id = identity(translation.size(0), translation.options());
  return {id.rotation, translation};
}

namespace {

torch::Tensor skew(const torch::Tensor& w) {
  auto zero = torch::zeros_like(w.select(1, 0));
  auto wx = w.select(1, 0);
  auto wy = w.select(1, 1);
  auto wz = w.select(1, 2);
  auto rows = torch::stack({zero, -wz, wy, wz, zero, -wx, -wy, wx, zero}, 1);
  return rows.view({-1, 3, 3});
}

}  // namespace

RigidPose RigidPose::from_axis_angle(const torch::Tensor& axis_angle, const torch::Tensor& translation) {
  require(axis_angle.dim() == 2 && axis_angle.size(1) == 3, "RigidPose: axis_angle must be [B,3]");
  require(translation.sizes() == axis_angle.sizes(), "RigidPose: translation must be [B,3]");
  const auto theta2 = (axis_angle * axis_angle).sum(1);
  const auto small = theta2 < 1e-8;
  const auto theta2_safe = torch::where(small, torch::ones_like(theta2), theta2);
  const auto theta_safe = theta2_safe.sqrt();
  // R = I + a [w]x + b [w]x^2, with series expansions near zero.
  const auto a = torch::where(small, 1.0 - theta2 / 6.0, torch::sin(theta_safe) / theta_safe);
  const auto b = torch::where(small, 0.5 - theta2 / 24.0, (1.0 - torch::cos(theta_safe)) / theta2_safe);
  const auto K = skew(axis_angle);
  auto eye = torch::eye(3, axis_angle.options()).unsqueeze(0);
  auto R = eye + a.view({-1, 1, 1}) * K + b.view({-1, 1, 1}) * torch::bmm(K, K);
  return {R, translation};
}

RigidPose RigidPose::inverse() const {
  auto Rt = rotation.transpose(1, 2);
  auto t = -torch::bmm(Rt, translation.unsqueeze(2)).squeeze(2);
  return {Rt, t};
}

torch::Tensor RigidPose::angle() const {
  auto trace = rotation.diagonal(0, 1, 2).sum(1);
  return torch::acos(((trace - 1.0) / 2.0).clamp(-1.0, 1.0));
}

bool RigidPose::is_valid(double tol) const {
  if (!rotation.defined() || rotation.dim() != 3 || rotation.size(1) != 3 || rotation.size(2) != 3) {
    return false;
  }
  if (!translation.defined() || translation.dim() != 2 || translation.size(1) != 3 ||
      translation.size(0) != rotation.size(0)) {
    return false;
  }
  auto R = rotation.detach().to(torch::kFloat64);
  auto eye = torch::eye(3, R.options()).unsqueeze(0);
  auto ortho = (torch::bmm(R.transpose(1, 2), R) - eye).abs().max().item<double>();
  auto det = (torch::linalg_det(R) - 1.0).abs().max().item<double>();
  return ortho <= tol && det <= tol && all_finite(translation);
}

std::string RigidPose::to_text(int64_t index) const {
  auto R = rotation[index].detach().to(torch::kFloat64).contiguous();
  auto t = translation[index].detach().to(torch::kFloat64).contiguous();
  std::ostringstream out;
  out << std::setprecision(17);
  for (int64_t r = 0; r < 3; ++r) {
    out << R[r][0].item<double>() << ' ' << R[r][1].item<double>() << ' ' << R[r][2].item<double>() << ' '
        << t[r].item<double>() << '\n';
  }
  return out.str();
}

RigidPose RigidPose::from_text(const std::string& text) {
  std::istringstream in(text);
  std::vector<double> v(12);
  for (auto& x : v) {
    if (!(in >> x)) {
      throw InvalidInput("RigidPose: expected a 3x4 row-major matrix (12 numbers)");
    }
  }
  auto m = torch::tensor(v, torch::kFloat64).view({3, 4});
  RigidPose pose{m.slice(1, 0, 3).unsqueeze(0).to(torch::kFloat32).contiguous(),
                 m.select(1, 3).unsqueeze(0).to(torch::kFloat32).contiguous()};
  if (!pose.is_valid(1e-4)) {
    throw InvalidInput("RigidPose: rotation block is not orthonormal");
  }
  return pose;
}

torch::Tensor disp_to_depth(const torch::Tensor& disp, double min_depth, double max_depth) {
  require(min_depth > 0.0 && min_depth < max_depth, "disp_to_depth: need 0 < min_depth < max_depth");
  if (!all_finite(disp)) {
    throw InvalidInput("disp_to_depth: non-finite disparity");
  }
  const double min_disp = 1.0 / max_depth;
  const double max_disp = 1.0 / min_depth;
  return 1.0 / (min_disp + (max_disp - min_disp) * disp);
}

torch::Tensor depth_to_disp(const torch::Tensor& depth, double min_depth, double max_depth) {
  require(min_depth > 0.0 && min_depth < max_depth, "depth_to_disp: need 0 < min_depth < max_depth");
  const double min_disp = 1.0 / max_depth;
  const double max_disp = 1.0 / min_depth;
  return (1.0 / depth - min_disp) / (max_disp - min_disp);
}

torch::Tensor pixel_grid(int64_t height, int64_t width, torch::TensorOptions options) {
  auto ys = torch::arange(height, options);
  auto xs = torch::arange(width, options);
  auto mesh = torch::meshgrid({ys, xs}, "ij");
  return torch::stack({mesh[1], mesh[0]}, -1).unsqueeze(0);
}

torch::Tensor backproject(const torch::Tensor& depth, const Intrinsics& K) {
  require_image(depth, "backproject");
  require(depth.size(1) == 1, "backproject: depth must have one channel");
  K.validate();
  const auto H = depth.size(2);
  const auto W = depth.size(3);
  auto grid = pixel_grid(H, W, depth.options().requires_grad(false));
  auto rx = (grid.select(3, 0) - K.cx) / K.fx;
  auto ry = (grid.select(3, 1) - K.cy) / K.fy;
  auto rays = torch::stack({rx, ry, torch::ones_like(rx)}, 1);  // [1,3,H,W]
  return depth * rays;
}

PixelCoords project(const torch::Tensor& points, const RigidPose& pose, const Intrinsics& K, double z_eps) {
  require_image(points, "project");
  require(points.size(1) == 3, "project: points must be [B,3,H,W]");
  require(pose.batch() == points.size(0) || pose.batch() == 1, "project: pose batch mismatch");
  K.validate();
  const auto B = points.size(0);
  const auto H = points.size(2);
  const auto W = points.size(3);
  auto flat = points.reshape({B, 3, H * W});
  auto R = pose.rotation.to(points.dtype()).expand({B, 3, 3});
  auto t = pose.translation.to(points.dtype()).expand({B, 3});
  auto cam = torch::bmm(R, flat) + t.unsqueeze(2);
  auto x = cam.select(1, 0);
  auto y = cam.select(1, 1);
  auto z = cam.select(1, 2);
  auto valid = z > z_eps;
  auto z_safe = torch::where(valid, z, torch::ones_like(z));
  auto u = K.fx * x / z_safe + K.cx;
  auto v = K.fy * y / z_safe + K.cy;
  auto xy = torch::stack({u, v}, -1).view({B, H, W, 2});
  return {xy, valid.to(points.dtype()).view({B, 1, H, W})};
}

WarpResult warp(const torch::Tensor& source, const PixelCoords& coords) {
  require_image(source, "warp");
  require(coords.xy.dim() == 4 && coords.xy.size(3) == 2, "warp: coords must be [B,H,W,2]");
  const auto B = coords.xy.size(0);
  require(source.size(0) == B, "warp: batch mismatch between source and coords");
  const auto Hs = source.size(2);
  const auto Ws = source.size(3);
  require(Hs >= 2 && Ws >= 2, "warp: source must be at least 2x2");

  auto xy = coords.xy.to(source.dtype());
  auto x = xy.select(3, 0);
  auto y = xy.select(3, 1);
  auto flagged = coords.valid.defined() ? coords.valid.squeeze(1) > 0.5 : torch::ones_like(x, torch::kBool);
  // Coordinates within kEdgeTolerance of the border count as inside and are
  // snapped onto it, so exact-border projections survive rounding.
  constexpr double kEdgeTolerance = 1e-4;
  auto inside = flagged & torch::isfinite(x) & torch::isfinite(y) & (x >= -kEdgeTolerance) &
                (x <= Ws - 1 + kEdgeTolerance) & (y >= -kEdgeTolerance) & (y <= Hs - 1 + kEdgeTolerance);
  // Park rejected coordinates on a finite location; their output is masked below.
  auto xs = torch::where(inside, x.clamp(0, Ws - 1), torch::zeros_like(x));
  auto ys = torch::where(inside, y.clamp(0, Hs - 1), torch::zeros_like(y));
  auto grid = torch::stack({2.0 * xs / (Ws - 1) - 1.0, 2.0 * ys / (Hs - 1) - 1.0}, -1);
  auto sampled = F::grid_sample(source, grid,
                                F::GridSampleFuncOptions().mode(torch::kBilinear).padding_mode(torch::kZeros).align_corners(true));
  auto validity = inside.to(source.dtype()).unsqueeze(1);
  return {sampled * validity, validity};
}

WarpResult reproject(const torch::Tensor& source, const torch::Tensor& target_depth,
                     const RigidPose& pose_target_to_source, const Intrinsics& K) {
  require_image(source, "reproject");
  require_image(target_depth, "reproject");
  require(source.size(0) == target_depth.size(0) && source.size(2) == target_depth.size(2) &&
              source.size(3) == target_depth.size(3),
          "reproject: source and depth shapes disagree");
  auto points = backproject(target_depth, K);
  return warp(source, project(points, pose_target_to_source, K));
}

}  // namespace udepth
