#include <set>

#include <gtest/gtest.h>

#include "udepth/augmentation.hpp"

using namespace udepth;

namespace {

RealSample dummy_real(const std::string& id) {
  RealSample s;
  s.id = id;
  s.target = torch::zeros({3, 4, 4});
  return s;
}

}  // namespace

TEST(CutMixMask, SidesExceedHalfAndStayInside) {
  Rng rng(1);
  for (auto [h, w] : std::vector<std::pair<int64_t, int64_t>>{{2, 2}, {3, 5}, {64, 128}, {7, 9}}) {
    for (int i = 0; i < 2000; ++i) {
      auto m = sample_cutmix_mask(h, w, rng);
      ASSERT_TRUE(m.is_valid());
      ASSERT_GT(4 * m.area(), h * w);
    }
  }
}

TEST(CutMixMask, CoversEveryAllowedSideLength) {
  Rng rng(2);
  std::set<int64_t> heights;
  for (int i = 0; i < 4000; ++i) {
    heights.insert(sample_cutmix_mask(9, 16, rng).height);
  }
  EXPECT_EQ(heights, (std::set<int64_t>{5, 6, 7, 8, 9}));
}

TEST(CutMixMask, SeededSequenceRepeats) {
  Rng a(7), b(7);
  for (int i = 0; i < 100; ++i) {
    auto x = sample_cutmix_mask(64, 128, a);
    auto y = sample_cutmix_mask(64, 128, b);
    ASSERT_EQ(x.top, y.top);
    ASSERT_EQ(x.left, y.left);
    ASSERT_EQ(x.height, y.height);
    ASSERT_EQ(x.width, y.width);
  }
}

TEST(CutMix, PartitionIsExact) {
  Rng rng(3);
  auto a = torch::rand({3, 8, 10});
  auto b = torch::rand({3, 8, 10});
  auto m = sample_cutmix_mask(8, 10, rng);
  auto out = cutmix(a, b, m);
  auto av = a.accessor<float, 3>(), bv = b.accessor<float, 3>(), ov = out.accessor<float, 3>();
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 8; ++r) {
      for (int x = 0; x < 10; ++x) {
        ASSERT_EQ(ov[c][r][x], m.contains(r, x) ? av[c][r][x] : bv[c][r][x]);
      }
    }
  }
}

TEST(CutMix, RejectsMismatchedMask) {
  Rng rng(4);
  auto m = sample_cutmix_mask(8, 8, rng);
  EXPECT_THROW(cutmix(torch::zeros({3, 8, 9}), torch::zeros({3, 8, 9}), m), InvalidInput);
}

TEST(ComposeSynReal, LabelUntouchedAndProvenanceMatchesPixels) {
  Rng rng(5);
  auto syn = torch::zeros({3, 6, 8});
  auto s2r = torch::ones({3, 6, 8});
  auto depth = torch::rand({1, 6, 8});
  bool saw_swap = false, saw_plain = false;
  for (int i = 0; i < 50; ++i) {
    auto p = compose_syn_real(syn, s2r, depth, rng);
    ASSERT_TRUE(p.depth_label.equal(depth));
    auto from_s2r = (p.provenance == static_cast<uint8_t>(PixelSource::kSynToReal)).to(torch::kFloat32);
    ASSERT_TRUE(p.image.equal(from_s2r.expand({3, 6, 8})));
    (p.swapped ? saw_swap : saw_plain) = true;
  }
  EXPECT_TRUE(saw_swap && saw_plain);
}

TEST(Batch, RolesAreRoutedSeparately) {
  Rng rng(6);
  auto pair = compose_syn_real(torch::zeros({3, 4, 4}), torch::ones({3, 4, 4}), torch::ones({1, 4, 4}), rng);
  auto batch = assemble_batch({dummy_real("a"), dummy_real("b")}, {pair, pair, pair}, rng);
  EXPECT_EQ(batch.size(), 5u);
  EXPECT_EQ(batch.real_samples().size(), 2u);
  EXPECT_EQ(batch.composite_pairs().size(), 3u);
  auto [images, labels] = batch.supervised_tensors();
  EXPECT_EQ(images.sizes(), (std::vector<int64_t>{3, 3, 4, 4}));
  EXPECT_EQ(labels.sizes(), (std::vector<int64_t>{3, 1, 4, 4}));
}

TEST(Batch, EmptySidesAreRejected) {
  Rng rng(7);
  auto pair = compose_syn_real(torch::zeros({3, 4, 4}), torch::ones({3, 4, 4}), torch::ones({1, 4, 4}), rng);
  EXPECT_THROW(assemble_batch({}, {pair}, rng), InvalidInput);
  EXPECT_THROW(assemble_batch({dummy_real("a")}, {}, rng), InvalidInput);
}
