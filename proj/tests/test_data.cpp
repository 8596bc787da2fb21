#include <filesystem>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "udepth/data.hpp"
#include "udepth/losses.hpp"

using namespace udepth;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("udepth_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ToySceneSpec small_spec(uint64_t seed) {
  ToySceneSpec s;
  s.seed = seed;
  s.height = 32;
  s.width = 64;
  s.supersample = 1;
  return s;
}

}  // namespace

TEST(ToyScenes, SameSeedSameScene) {
  auto a = generate_toy_scene(small_spec(4));
  auto b = generate_toy_scene(small_spec(4));
  auto c = generate_toy_scene(small_spec(5));
  EXPECT_TRUE(a.real.target.equal(b.real.target));
  EXPECT_TRUE(a.real.gt_depth.equal(b.real.gt_depth));
  EXPECT_FALSE(a.real.target.equal(c.real.target));
}

TEST(ToyScenes, DepthIsPositiveAndSkyIsFar) {
  auto s = generate_toy_scene(small_spec(1));
  EXPECT_GT(s.real.gt_depth.min().item<double>(), 0.0);
  auto sky = s.real.sky > 0.5;
  ASSERT_GT(sky.sum().item<int64_t>(), 0);
  EXPECT_EQ(s.real.gt_depth.masked_select(sky).min().item<double>(), 100.0);
  EXPECT_TRUE(s.synthetic.depth.equal(s.real.gt_depth));
  EXPECT_GE(s.real.target.min().item<double>(), 0.0);
  EXPECT_LE(s.real.target.max().item<double>(), 1.0);
}

TEST(ToyScenes, SyntheticDomainLooksDifferent) {
  auto s = generate_toy_scene(small_spec(2));
  EXPECT_GT((s.synthetic.color - s.real.target).abs().mean().item<double>(), 0.05);
}

TEST(ToyScenes, StereoPartnerIsConsistentWithTrueDepth) {
  auto spec = small_spec(3);
  spec.supersample = 3;
  auto s = generate_plane_scene(spec, 8.0);
  auto b = stack_real({s.real});
  auto w = reproject(b.stereo, b.gt_depth, b.stereo_pose, b.K);
  auto pe = photometric_error(w.image, b.target);
  auto m = window_validity(w.validity);
  EXPECT_LT(((pe * m).sum() / m.sum()).item<double>(), 1e-3);
}

TEST(ToyScenes, MovingObjectIsMarked) {
  auto spec = small_spec(6);
  spec.moving_object = true;
  spec.object_motion = {0.0, 0.0, -0.8};
  auto s = generate_toy_scene(spec);
  ASSERT_TRUE(s.real.object_mask.defined());
  EXPECT_GT(s.real.object_mask.sum().item<double>(), 0.0);
}

TEST(ToyScenes, InvalidRangeRejected) {
  auto spec = small_spec(1);
  spec.near_m = 50;
  spec.far_m = 10;
  EXPECT_THROW(generate_toy_scene(spec), InvalidInput);
}

TEST(ImageIo, ColorDepthMaskRoundTrip) {
  auto dir = scratch_dir("io");
  auto rgb = (torch::rand({3, 5, 7}) * 255).round() / 255;
  write_rgb(dir / "c.png", rgb);
  EXPECT_LT((read_rgb(dir / "c.png") - rgb).abs().max().item<double>(), 1e-6);

  auto depth = torch::rand({1, 5, 7}) * 80 + 0.5;
  write_depth(dir / "d.png", depth, 256.0);
  EXPECT_LE((read_depth(dir / "d.png", 256.0) - depth).abs().max().item<double>(), 0.5 / 256.0 + 1e-5);

  auto mask = (torch::rand({1, 5, 7}) > 0.5).to(torch::kFloat32);
  write_mask(dir / "m.png", mask);
  EXPECT_TRUE(read_mask(dir / "m.png").equal(mask));
  EXPECT_THROW(read_rgb(dir / "missing.png"), IoError);
}

TEST(RealLayout, WriteThenLoadPreservesSamples) {
  auto dir = scratch_dir("real");
  std::vector<RealSample> samples;
  for (uint64_t i = 0; i < 3; ++i) {
    auto s = generate_toy_scene(small_spec(i)).real;
    s.id = "s" + std::to_string(i);
    samples.push_back(s);
  }
  write_real_samples(dir, "train", samples);
  auto back = load_real_split(dir, "train");
  ASSERT_EQ(back.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].id, samples[i].id);
    EXPECT_EQ(back[i].K, samples[i].K);
    EXPECT_LT((back[i].target - samples[i].target).abs().max().item<double>(), 0.5 / 255 + 1e-6);
    EXPECT_TRUE(back[i].sky.equal(samples[i].sky));
    EXPECT_LT((back[i].stereo_pose.translation - samples[i].stereo_pose.translation).abs().max().item<double>(), 1e-6);
  }
  EXPECT_THROW(load_real_split(dir / "nope", "train"), IoError);
}

TEST(RealLayout, SplitFileSkipsBlankAndCommentLines) {
  auto dir = scratch_dir("split");
  auto s = generate_toy_scene(small_spec(0)).real;
  s.id = "only";
  write_real_samples(dir, "val", {s});
  write_text_file(dir / "real" / "splits" / "val.txt", "# held out\n\n  only  \n");
  EXPECT_EQ(load_real_split(dir, "val").size(), 1u);
}

TEST(SkyMasks, MissingIsEmptyAndWrongSizeNamesPath) {
  auto dir = scratch_dir("sky");
  EXPECT_EQ(load_sky_mask(dir, "x", 4, 6).sum().item<double>(), 0.0);
  write_mask(dir / "y.png", torch::ones({1, 3, 3}));
  try {
    load_sky_mask(dir, "y", 4, 6);
    FAIL() << "size mismatch accepted";
  } catch (const InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("y.png"), std::string::npos);
  }
}

TEST(SyntheticSources, UnitsAreConvertedAndUndeclaredUnitsRejected) {
  auto dir = scratch_dir("syn");
  auto s = generate_toy_scene(small_spec(1)).synthetic;
  write_synthetic_source(dir / "cm", "cm", {s}, "centimeters", 1.0);
  auto info = register_synthetic_source(dir / "cm");
  EXPECT_DOUBLE_EQ(info.to_meters(), 0.01);
  auto loaded = load_synthetic_source(info);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_LT((loaded[0].depth - s.depth).abs().max().item<double>(), 0.01);

  write_text_file(dir / "bad" / "meta.txt", "height = 4\nwidth = 4\n");
  EXPECT_THROW(register_synthetic_source(dir / "bad"), InvalidInput);
  write_text_file(dir / "bad2" / "meta.txt", "depth_units = furlongs\nheight = 4\nwidth = 4\n");
  EXPECT_THROW(register_synthetic_source(dir / "bad2"), InvalidInput);
}

TEST(SyntheticSources, UnifyResizesClampsAndMixesSources) {
  auto a = generate_toy_scene(small_spec(1)).synthetic;
  auto b = generate_toy_scene(small_spec(2)).synthetic;
  b.source = "other";
  UnifyOptions opt;
  opt.height = 16;
  opt.width = 32;
  opt.max_depth = 50;
  auto pool = unify_synthetic(std::vector<std::vector<SyntheticSample>>{{a}, {b}}, opt);
  ASSERT_EQ(pool.size(), 2u);
  std::set<std::string> sources;
  for (const auto& s : pool) {
    EXPECT_EQ(s.color.size(1), 16);
    EXPECT_EQ(s.depth.size(2), 32);
    EXPECT_LE(s.depth.max().item<double>(), 50.0);
    sources.insert(s.source);
  }
  EXPECT_EQ(sources.size(), 2u);
}

TEST(Scheduler, RealStreamCoversEveryIndexEachEpoch) {
  auto plan = epoch_scheduler(5, 3, 4, 11);
  ASSERT_EQ(plan.size(), 20u);
  for (int e = 0; e < 4; ++e) {
    std::set<int64_t> seen;
    for (int i = 0; i < 5; ++i) {
      EXPECT_EQ(plan[e * 5 + i].epoch, e);
      seen.insert(plan[e * 5 + i].real_batch);
    }
    EXPECT_EQ(seen.size(), 5u);
  }
}

TEST(Scheduler, SyntheticStreamRestartsOnlyWhenExhausted) {
  auto plan = epoch_scheduler(4, 6, 3, 2);
  std::map<int64_t, std::set<int64_t>> per_pass;
  for (const auto& s : plan) {
    per_pass[s.synthetic_pass].insert(s.synthetic_batch);
  }
  EXPECT_EQ(per_pass[0].size(), 6u);
  EXPECT_EQ(per_pass[1].size(), 6u);
  EXPECT_EQ(plan[5].synthetic_pass, 0);
  EXPECT_EQ(plan[6].synthetic_pass, 1);
}

TEST(Scheduler, CyclePolicyRepeatsOrder) {
  auto plan = epoch_scheduler(3, 3, 3, 5, SyntheticExhaustion::kCycle);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(plan[i].synthetic_batch, plan[i + 3].synthetic_batch);
    EXPECT_EQ(plan[i].synthetic_batch, plan[i + 6].synthetic_batch);
  }
}

TEST(Scheduler, SeedDeterminesPlan) {
  auto a = epoch_scheduler(7, 4, 3, 9);
  auto b = epoch_scheduler(7, 4, 3, 9);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].real_batch, b[i].real_batch);
    EXPECT_EQ(a[i].synthetic_batch, b[i].synthetic_batch);
  }
  EXPECT_THROW(epoch_scheduler(0, 1, 1, 0), InvalidInput);
}
