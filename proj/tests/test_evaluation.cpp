#include <gtest/gtest.h>

#include "oracles.hpp"
#include "udepth/evaluation.hpp"

using namespace udepth;

namespace {

EvalProtocol unscaled() {
  EvalProtocol p;
  p.median_scaling = false;
  return p;
}

}  // namespace

TEST(Metrics, HandEvaluatedSinglePixel) {
  auto gt = torch::full({1, 1}, 10.0, torch::kFloat64);
  auto pred = torch::full({1, 1}, 12.5, torch::kFloat64);
  auto r = depth_metrics(pred, gt, torch::ones({1, 1}), unscaled());
  EXPECT_DOUBLE_EQ(r.abs_rel, 0.25);
  EXPECT_DOUBLE_EQ(r.sq_rel, 0.625);
  EXPECT_DOUBLE_EQ(r.rmse, 2.5);
  EXPECT_EQ(r.a1, 0.0);  // ratio exactly 1.25 is not counted
  EXPECT_EQ(r.a2, 1.0);
  EXPECT_EQ(r.n_pixels, 1);
}

TEST(Metrics, PerfectPredictionAndScaledCopy) {
  auto gt = torch::rand({8, 8}, torch::kFloat64) * 50 + 1;
  auto ones = torch::ones({8, 8});
  auto r = depth_metrics(gt, gt, ones);
  EXPECT_EQ(r.abs_rel, 0.0);
  EXPECT_EQ(r.a3, 1.0);
  auto s = depth_metrics(3.0 * gt, gt, ones);
  EXPECT_NEAR(s.abs_rel, 0.0, 1e-15);
  EXPECT_NEAR(s.rmse, 0.0, 1e-12);
  EXPECT_NEAR(s.scale, 1.0 / 3.0, 1e-15);
}

TEST(Metrics, MatchesLoopOracleWithClampingAndMask) {
  torch::manual_seed(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto gt = torch::rand({16, 16}, torch::kFloat64) * 100;
    auto pred = torch::rand({16, 16}, torch::kFloat64) * 100 + 0.01;
    auto valid = (torch::rand({16, 16}) > 0.3).to(torch::kFloat32);
    for (bool scale : {false, true}) {
      EvalProtocol p;
      p.median_scaling = scale;
      auto r = depth_metrics(pred, gt, valid, p);
      auto o = oracle::depth_metrics(oracle::values(pred), oracle::values(gt), oracle::values(valid), 0.1, 80, scale);
      EXPECT_NEAR(r.abs_rel, o.abs_rel, 1e-9);
      EXPECT_NEAR(r.sq_rel, o.sq_rel, 1e-9);
      EXPECT_NEAR(r.rmse, o.rmse, 1e-9);
      EXPECT_NEAR(r.rmse_log, o.rmse_log, 1e-9);
      EXPECT_NEAR(r.a1, o.a1, 1e-12);
      EXPECT_NEAR(r.scale, o.scale, 1e-12);
      EXPECT_LE(r.a1, r.a2);
      EXPECT_LE(r.a2, r.a3);
    }
  }
}

TEST(MedianScale, RecordsRatioAndRejectsDegenerateInput) {
  auto gt = torch::tensor({1.0, 2.0, 9.0}, torch::kFloat64);
  auto pred = torch::tensor({4.0, 1.0, 1.0}, torch::kFloat64);
  auto s = median_scale(pred, gt, torch::ones({3}));
  EXPECT_DOUBLE_EQ(s.scale, 2.0);
  EXPECT_THROW(median_scale(pred, gt, torch::zeros({3})), DegenerateInput);
  EXPECT_THROW(median_scale(torch::zeros({3}, torch::kFloat64), gt, torch::ones({3})), DegenerateInput);
}

TEST(Metrics, RejectsInvertedClampRange) {
  EvalProtocol p;
  p.min_depth = 10;
  p.max_depth = 1;
  EXPECT_THROW(depth_metrics(torch::ones({2}), torch::ones({2}), torch::ones({2}), p), InvalidInput);
}

TEST(Reports, JsonRoundTrip) {
  MetricsReport r;
  r.abs_rel = 0.1;
  r.rmse = 4.0;
  r.a1 = 0.9;
  r.n_pixels = 12;
  r.protocol.max_depth = 50;
  auto back = MetricsReport::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
}

TEST(Reports, AggregateIsPerSampleMean) {
  MetricsReport a, b;
  a.abs_rel = 0.1;
  b.abs_rel = 0.3;
  a.n_samples = b.n_samples = 1;
  auto m = aggregate_reports({a, b});
  EXPECT_DOUBLE_EQ(m.abs_rel, 0.2);
  EXPECT_EQ(m.n_samples, 2);
  b.protocol.median_scaling = false;
  EXPECT_THROW(aggregate_reports({a, b}), InvalidInput);
}

TEST(Reports, ComparisonVerdicts) {
  MetricsReport a, b;
  a.abs_rel = 0.10;
  a.rmse = 4.3;
  b.abs_rel = 0.09;
  b.rmse = 4.2;
  EXPECT_EQ(compare_reports(a, b).verdict, "improved");
  EXPECT_EQ(compare_reports(b, a).verdict, "regressed");
  EXPECT_EQ(compare_reports(a, a).verdict, "unchanged");
  EXPECT_EQ(compare_reports(a, a).deltas.at("rmse"), 0.0);
  b.rmse = 4.4;
  EXPECT_EQ(compare_reports(a, b).verdict, "mixed");
  b.protocol.max_depth = 10;
  EXPECT_THROW(compare_reports(a, b), InvalidInput);
}
