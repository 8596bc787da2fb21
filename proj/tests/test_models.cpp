#include <gtest/gtest.h>

#include "udepth/models.hpp"

using namespace udepth;

namespace {

NetworkConfig tiny() {
  auto c = NetworkConfig::toy();
  c.height = 32;
  c.width = 64;
  return c;
}

}  // namespace

TEST(NetworkConfig, ValidationCatchesBadShapes) {
  auto c = tiny();
  EXPECT_NO_THROW(c.validate());
  c.width = 70;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.stage_widths = {8, 16, 24};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.lka_kernel = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(NetworkConfig::van(7), ConfigError);
}

TEST(NetworkConfig, LkaReceptiveFieldOfDefaultDecomposition) {
  auto c = tiny();
  c.lka_kernel = 5;
  c.lka_dilated_kernel = 7;
  c.lka_dilation = 3;
  EXPECT_EQ(c.lka_receptive_field(), 23);
}

TEST(Lka, AttentionIsLocalThenDilatedThenPointwise) {
  torch::manual_seed(0);
  LargeKernelAttention lka(4, 5, 7, 3);
  auto x = torch::randn({1, 4, 32, 32});
  auto manual = lka->pointwise(lka->dilated(lka->local(x)));
  EXPECT_TRUE(torch::allclose(lka->attention(x), manual));
  EXPECT_TRUE(torch::allclose(lka->forward(x), x * manual));
}

TEST(Lka, ReceptiveFieldMatchesFormula) {
  // Gradient of one output pixel reaches exactly the predicted window.
  torch::manual_seed(0);
  LargeKernelAttention lka(1, 5, 7, 3);
  auto x = torch::randn({1, 1, 41, 41}).requires_grad_();
  lka->attention(x)[0][0][20][20].backward();
  auto touched = x.grad()[0][0].abs() > 0;
  auto rows = touched.any(1).nonzero();
  EXPECT_EQ(rows.size(0), 23);
}

TEST(Encoder, FiveLevelsFinestFirst) {
  auto c = tiny();
  LkaEncoder enc(3, c);
  auto f = enc->forward(torch::rand({2, 3, 32, 64}));
  ASSERT_EQ(f.size(), 5u);
  for (int l = 0; l < 5; ++l) {
    EXPECT_EQ(f[l].size(2), 32 >> (l + 1));
    EXPECT_EQ(f[l].size(3), 64 >> (l + 1));
    EXPECT_EQ(f[l].size(1), enc->widths()[l]);
  }
  EXPECT_THROW(enc->forward(torch::rand({1, 3, 30, 64})), InvalidInput);
}

TEST(DepthNet, DisparityInUnitIntervalAtFullResolution) {
  DepthNet net(tiny());
  auto d = net->forward(torch::rand({2, 3, 32, 64}));
  EXPECT_EQ(d.sizes(), (std::vector<int64_t>{2, 1, 32, 64}));
  EXPECT_GT(d.min().item<double>(), 0.0);
  EXPECT_LT(d.max().item<double>(), 1.0);
  EXPECT_THROW(net->forward(torch::rand({1, 1, 32, 64})), InvalidInput);
}

TEST(DepthNet, InitialDisparityBiasSetsTypicalOutput) {
  torch::manual_seed(1);
  DepthNet net(tiny());
  net->set_initial_disparity(0.05);
  auto d = net->forward(torch::rand({1, 3, 32, 64}));
  EXPECT_NEAR(d.median().item<double>(), 0.05, 0.03);
  EXPECT_THROW(net->set_initial_disparity(1.5), InvalidInput);
}

TEST(ColorNet, RgbInUnitInterval) {
  ColorNet net(tiny());
  auto c = net->forward(torch::rand({2, 1, 32, 64}));
  EXPECT_EQ(c.sizes(), (std::vector<int64_t>{2, 3, 32, 64}));
  EXPECT_GE(c.min().item<double>(), 0.0);
  EXPECT_LE(c.max().item<double>(), 1.0);
}

TEST(MotionNet, PoseIsAntisymmetricAndIdentityForEqualFrames) {
  torch::manual_seed(2);
  MotionNet net(tiny());
  auto a = torch::rand({2, 3, 32, 64});
  auto b = torch::rand({2, 3, 32, 64});
  auto ab = net->pose_vector(a, b);
  auto ba = net->pose_vector(b, a);
  EXPECT_EQ(ab.sizes(), (std::vector<int64_t>{2, 6}));
  EXPECT_LT((ab + ba).abs().max().item<double>(), 1e-6);
  EXPECT_LT(net->pose_vector(a, a).abs().max().item<double>(), 1e-7);
  EXPECT_TRUE(net->pose(a, b).is_valid(1e-5));
}

TEST(MotionNet, UncertaintyNonNegativeSingleChannel) {
  torch::manual_seed(3);
  MotionNet net(tiny());
  auto u = net->uncertainty(torch::rand({2, 3, 32, 64}), torch::rand({2, 3, 32, 64}));
  EXPECT_EQ(u.sizes(), (std::vector<int64_t>{2, 1, 32, 64}));
  EXPECT_GE(u.min().item<double>(), 0.0);
}

TEST(MotionNet, SharedOrSeparateUncertaintyEncoder) {
  auto c = tiny();
  MotionNet shared(c);
  c.share_pose_encoder = false;
  MotionNet separate(c);
  EXPECT_FALSE(shared->uncertainty_encoder);
  EXPECT_TRUE(separate->uncertainty_encoder);
  EXPECT_GT(parameter_count(*separate), parameter_count(*shared));
  EXPECT_GT(separate->uncertainty_parameters().size(), shared->uncertainty_parameters().size());
}

TEST(MotionNet, UncertaintyHeadGivesZeroAtZeroInput) {
  // The output activation attains its minimum, so the regulariser can be
  // driven to zero without saturating.
  FusionDecoder dec(std::vector<int64_t>{4, 4, 4, 4, 4}, std::vector<int64_t>{4, 4, 4, 4, 4}, 1, 0,
                    OutputActivation::kSmoothAbs);
  dec->set_output_bias(0.0);
  for (auto& p : dec->parameters()) {
    torch::NoGradGuard g;
    p.zero_();
  }
  std::vector<torch::Tensor> feats;
  for (int l = 0; l < 5; ++l) {
    feats.push_back(torch::zeros({1, 4, 16 >> l, 32 >> l}));
  }
  EXPECT_NEAR(dec->forward(feats, {}).abs().max().item<double>(), 0.0, 1e-6);
}
