#include <cmath>

#include <gtest/gtest.h>

#include "udepth/geometry.hpp"

using namespace udepth;

namespace {

Intrinsics toy_intrinsics() { return {60.0, 60.0, 63.5, 31.5, 128, 64}; }

// Rotation from a unit quaternion, as an independent route to the
// exponential map.
std::array<double, 9> quaternion_rotation(double ax, double ay, double az) {
  const double th = std::sqrt(ax * ax + ay * ay + az * az);
  const double s = th > 0 ? std::sin(th / 2) / th : 0.5;
  const double w = std::cos(th / 2), x = ax * s, y = ay * s, z = az * s;
  return {1 - 2 * (y * y + z * z), 2 * (x * y - z * w),     2 * (x * z + y * w),
          2 * (x * y + z * w),     1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
          2 * (x * z - y * w),     2 * (y * z + x * w),     1 - 2 * (x * x + y * y)};
}

}  // namespace

TEST(Intrinsics, TextRoundTripAndValidation) {
  auto K = toy_intrinsics();
  EXPECT_EQ(Intrinsics::from_text(K.to_text()), K);
  EXPECT_THROW(Intrinsics::from_text("1 2 3"), InvalidInput);
  EXPECT_THROW(Intrinsics::from_text("-1 60 10 10 20 20"), InvalidInput);
  EXPECT_THROW(Intrinsics::from_text("60 60 30 10 20 20"), InvalidInput);
}

TEST(RigidPose, AxisAngleMatchesQuaternionRoute) {
  torch::manual_seed(1);
  auto w = (torch::rand({20, 3}, torch::kFloat64) - 0.5) * 4;
  w[0].zero_();
  w[1] = torch::tensor({1e-6, -2e-6, 0.0}, torch::kFloat64);
  auto pose = RigidPose::from_axis_angle(w, torch::zeros({20, 3}, torch::kFloat64));
  for (int64_t b = 0; b < 20; ++b) {
    auto q = quaternion_rotation(w[b][0].item<double>(), w[b][1].item<double>(), w[b][2].item<double>());
    for (int i = 0; i < 9; ++i) {
      EXPECT_NEAR(pose.rotation[b].view(-1)[i].item<double>(), q[i], 1e-12) << b;
    }
  }
  EXPECT_TRUE(pose.is_valid(1e-10));
}

TEST(RigidPose, AngleRecoversMagnitude) {
  auto w = torch::tensor({{0.0, 0.3, 0.4}}, torch::kFloat64);
  auto pose = RigidPose::from_axis_angle(w, torch::zeros({1, 3}, torch::kFloat64));
  EXPECT_NEAR(pose.angle().item<double>(), 0.5, 1e-12);
}

TEST(RigidPose, InverseComposesToIdentity) {
  auto w = torch::tensor({{0.1, -0.2, 0.3}}, torch::kFloat64);
  auto t = torch::tensor({{1.0, 2.0, -3.0}}, torch::kFloat64);
  auto p = RigidPose::from_axis_angle(w, t);
  auto q = p.inverse();
  auto R = torch::bmm(q.rotation, p.rotation);
  auto tt = torch::bmm(q.rotation, p.translation.unsqueeze(2)).squeeze(2) + q.translation;
  EXPECT_LT((R - torch::eye(3, torch::kFloat64)).abs().max().item<double>(), 1e-12);
  EXPECT_LT(tt.abs().max().item<double>(), 1e-12);
}

TEST(RigidPose, TextRoundTripAndRejectsNonRotation) {
  auto p = RigidPose::from_axis_angle(torch::tensor({{0.1f, 0.2f, 0.0f}}), torch::tensor({{0.5f, 0.0f, -1.0f}}));
  auto q = RigidPose::from_text(p.to_text());
  EXPECT_LT((q.rotation - p.rotation).abs().max().item<double>(), 1e-6);
  EXPECT_LT((q.translation - p.translation).abs().max().item<double>(), 1e-6);
  EXPECT_THROW(RigidPose::from_text("2 0 0 0  0 1 0 0  0 0 1 0"), InvalidInput);
  EXPECT_THROW(RigidPose::from_text("1 0 0"), InvalidInput);
}

TEST(Disparity, RoundTripAndEndpoints) {
  auto d = torch::tensor({0.0, 0.25, 1.0}, torch::kFloat64);
  auto depth = disp_to_depth(d, 0.1, 100.0);
  EXPECT_NEAR(depth[0].item<double>(), 100.0, 1e-9);
  EXPECT_NEAR(depth[2].item<double>(), 0.1, 1e-12);
  EXPECT_LT((depth_to_disp(depth, 0.1, 100.0) - d).abs().max().item<double>(), 1e-12);
  EXPECT_THROW(disp_to_depth(d, 0.0, 1.0), InvalidInput);
  EXPECT_THROW(disp_to_depth(torch::full({1}, std::nan("")), 0.1, 1.0), InvalidInput);
}

TEST(Projection, BackprojectThenProjectIsIdentity) {
  auto K = toy_intrinsics();
  auto depth = torch::rand({2, 1, 64, 128}, torch::kFloat64) * 10 + 1;
  auto coords = project(backproject(depth, K), RigidPose::identity(2, torch::kFloat64), K);
  auto grid = pixel_grid(64, 128, torch::kFloat64).expand({2, 64, 128, 2});
  EXPECT_LT((coords.xy - grid).abs().max().item<double>(), 1e-9);
  EXPECT_EQ(coords.valid.min().item<double>(), 1.0);
}

TEST(Projection, KnownPointLandsWherePinholeSays) {
  Intrinsics K{100, 100, 10, 10, 21, 21};
  auto depth = torch::full({1, 1, 21, 21}, 5.0, torch::kFloat64);
  // Pixel (10,10) sits on the optical axis at (0,0,5). Move it by (1,0,5).
  auto pose = RigidPose::from_translation(torch::tensor({{1.0, 0.0, 5.0}}, torch::kFloat64));
  auto c = project(backproject(depth, K), pose, K);
  EXPECT_NEAR(c.xy[0][10][10][0].item<double>(), 10 + 100 * 1.0 / 10.0, 1e-12);
  EXPECT_NEAR(c.xy[0][10][10][1].item<double>(), 10.0, 1e-12);
}

TEST(Projection, PointsBehindCameraAreInvalid) {
  auto K = toy_intrinsics();
  auto depth = torch::full({1, 1, 64, 128}, 2.0, torch::kFloat64);
  auto pose = RigidPose::from_translation(torch::tensor({{0.0, 0.0, -3.0}}, torch::kFloat64));
  auto c = project(backproject(depth, K), pose, K);
  EXPECT_EQ(c.valid.max().item<double>(), 0.0);
  EXPECT_TRUE(all_finite(c.xy));
}

TEST(Warp, IdentityReproducesSource) {
  auto K = toy_intrinsics();
  auto src = torch::rand({1, 3, 64, 128}, torch::kFloat64);
  auto depth = torch::full({1, 1, 64, 128}, 4.0, torch::kFloat64);
  auto w = reproject(src, depth, RigidPose::identity(1, torch::kFloat64), K);
  EXPECT_LT((w.image - src).abs().max().item<double>(), 1e-9);
  EXPECT_EQ(w.validity.min().item<double>(), 1.0);
}

TEST(Warp, HalfPixelShiftAveragesNeighbours) {
  auto src = torch::arange(8, torch::kFloat64).view({1, 1, 2, 4});
  auto xy = pixel_grid(2, 4, torch::kFloat64).clone();
  xy.select(3, 0) += 0.5;
  auto w = warp(src, {xy, torch::ones({1, 1, 2, 4}, torch::kFloat64)});
  EXPECT_DOUBLE_EQ(w.image[0][0][0][0].item<double>(), 0.5);
  EXPECT_DOUBLE_EQ(w.image[0][0][1][2].item<double>(), 6.5);
  // The last column samples past the border.
  EXPECT_EQ(w.validity[0][0][0][3].item<double>(), 0.0);
  EXPECT_EQ(w.image[0][0][0][3].item<double>(), 0.0);
}

TEST(Warp, OutOfBoundsSamplesCarryNoGradient) {
  auto src = torch::rand({1, 1, 4, 4}, torch::kFloat64).requires_grad_();
  auto xy = torch::full({1, 4, 4, 2}, 10.0, torch::kFloat64);
  auto w = warp(src, {xy, {}});
  w.image.sum().backward();
  EXPECT_EQ(src.grad().abs().sum().item<double>(), 0.0);
}

TEST(Warp, StereoShiftOnFrontoParallelPlane) {
  // A plane at depth z seen by a camera shifted by b along x moves by f*b/z px.
  Intrinsics K{60, 60, 63.5, 31.5, 128, 64};
  const double z = 6.0, b = 0.4;  // 4 px shift
  auto x = torch::arange(128, torch::kFloat64).view({1, 1, 1, 128}).expand({1, 3, 64, 128});
  auto src = torch::sin(x * 0.3).contiguous();
  auto depth = torch::full({1, 1, 64, 128}, z, torch::kFloat64);
  auto pose = RigidPose::from_translation(torch::tensor({{-b, 0.0, 0.0}}, torch::kFloat64));
  auto w = reproject(src, depth, pose, K);
  auto expected = torch::sin((x - 4.0) * 0.3);
  auto m = w.validity.expand_as(expected);
  EXPECT_LT(((w.image - expected) * m).abs().max().item<double>(), 1e-9);
  EXPECT_EQ(w.validity.sum().item<double>(), 64.0 * 124.0);
}
