#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "scrnet/degrade.hpp"
#include "scrnet/phantom.hpp"

using namespace scrnet;

namespace {

SimParams fixed_params() {
  SimParams p;
  p.alpha = 0.7;
  p.beta = 0.45;
  p.r_b = 2;
  p.sigma_b = 12.5;
  p.r_l = 3;
  p.sigma_l = 27.0;
  p.center_a = 0.3;
  p.center_b = 0.65;
  return p;
}

}  // namespace

TEST(SampleParams, PointRangesReproduceParams) {
  const SimParams p = fixed_params();
  Rng rng(5);
  SimParams q = sample_params(rng, ParamRanges::point(p));
  q.seed = p.seed;
  EXPECT_EQ(q, p);
}

TEST(SampleParams, SameSeedSameDraw) {
  Rng a(77), b(77);
  EXPECT_EQ(sample_params(a, {}), sample_params(b, {}));
}

TEST(SampleParams, SigmaIsUniformOnRange) {
  Rng rng(2024);
  double lo = 1e9, hi = -1e9, acc = 0.0;
  std::set<int> radii;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const SimParams p = sample_params(rng, {});
    lo = std::min(lo, p.sigma_b);
    hi = std::max(hi, p.sigma_b);
    acc += p.sigma_b;
    radii.insert(p.r_b);
    radii.insert(p.r_l);
    ASSERT_GE(p.alpha, 0.5);
    ASSERT_LE(p.alpha, 0.95);
  }
  EXPECT_GE(lo, 10.0);
  EXPECT_LE(hi, 30.0);
  EXPECT_NEAR(acc / n, 20.0, 0.5);
  EXPECT_EQ(radii, (std::set<int>{1, 2, 3}));
}

TEST(SampleParams, RejectsOutOfRange) {
  Rng rng(1);
  ParamRanges r;
  r.sigma_b_min = 5.0;
  try {
    sample_params(rng, r);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("[10,30]"), std::string::npos);
  }
  ParamRanges radius;
  radius.r_l_max = 4;
  EXPECT_THROW(sample_params(rng, radius), InvalidArgument);
  ParamRanges zero;
  zero.r_b_min = 0;
  EXPECT_THROW(sample_params(rng, zero), InvalidArgument);
  EXPECT_NO_THROW(sample_params(rng, zero, true));
  ParamRanges reversed;
  reversed.alpha_min = 0.9;
  reversed.alpha_max = 0.6;
  EXPECT_THROW(sample_params(rng, reversed), InvalidArgument);
}

TEST(Panel, ZeroAtCentre) {
  const Image j = transmission_panel(9, 9, 0.5, 0.5);
  EXPECT_EQ(j.at(0, 4, 4), 0.0f);
  EXPECT_EQ(transmission_panel(1, 1, 0.5, 0.5).at(0, 0, 0), 0.0f);
}

TEST(Panel, RawDistanceIsEuclidean) {
  const Image raw = transmission_panel(9, 9, 0.5, 0.5, false);
  EXPECT_FLOAT_EQ(raw.at(0, 7, 8), 5.0f);
  const Image norm = transmission_panel(9, 9, 0.5, 0.5);
  EXPECT_FLOAT_EQ(norm.at(0, 7, 8), static_cast<float>(5.0 / std::sqrt(32.0)));
}

TEST(Panel, BoundedAndRadiallyMonotone) {
  const Image j = transmission_panel(21, 21, 0.5, 0.5);
  for (float v : j.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  for (int step = 1; step <= 10; ++step) {
    EXPECT_GT(j.at(0, 10 + step, 10), j.at(0, 10 + step - 1, 10));
    EXPECT_GT(j.at(0, 10 - step, 10 - step), j.at(0, 10 - step + 1, 10 - step + 1));
  }
}

TEST(Simulate, IdentityConfigurationIsExact) {
  SimParams p;
  p.alpha = 1.0;
  p.beta = 0.0;
  p.r_b = 0;
  p.r_l = 0;
  SimOptions opt;
  opt.allow_identity_blur = true;
  const Image img = oracle::random_image(8, 8, 3, 3);
  EXPECT_EQ(simulate_cataract(img, p, opt), img);
  EXPECT_THROW(simulate_cataract(img, p), InvalidArgument);
}

TEST(Simulate, ZeroImageStaysZero) {
  const Image out = simulate_cataract(Image(6, 6, 3, 0.0f), fixed_params());
  for (float v : out.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Simulate, MatchesScalarEvaluation) {
  const SimParams p = fixed_params();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const Image img = oracle::random_image(4, 4, 3, seed);
    const Image out = simulate_cataract(img, p);
    const auto ref = oracle::cataract(img, p.alpha, p.beta, p.r_b, p.sigma_b, p.r_l, p.sigma_l, p.center_a,
                                      p.center_b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.data()[i], ref[i], 1e-5);
  }
}

TEST(Simulate, RawPanelMatchesScalarEvaluation) {
  SimParams p = fixed_params();
  p.beta = 0.01;
  SimOptions opt;
  opt.normalize_panel = false;
  const Image img = oracle::random_image(8, 8, 3, 12);
  const Image out = simulate_cataract(img, p, opt);
  const auto ref = oracle::cataract(img, p.alpha, p.beta, p.r_b, p.sigma_b, p.r_l, p.sigma_l, p.center_a,
                                    p.center_b, false);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.data()[i], ref[i], 1e-5);
}

TEST(Simulate, NoHazeReducesToScaledBlur) {
  SimParams p = fixed_params();
  p.beta = 0.0;
  const Image img = oracle::random_image(10, 7, 3, 21);
  const Image out = simulate_cataract(img, p);
  const Image blur = filter2d(img, gaussian_kernel(p.r_b, p.sigma_b));
  for (std::size_t i = 0; i < img.size(); ++i) {
    EXPECT_NEAR(out.data()[i], std::clamp(p.alpha * blur.data()[i], 0.0, 1.0), 1e-6);
  }
}

TEST(Simulate, OutputInUnitRange) {
  Rng rng(9);
  ParamRanges wide;
  wide.beta_max = 3.0;
  for (int t = 0; t < 20; ++t) {
    const Image out = simulate_cataract(oracle::random_image(12, 12, 3, t), sample_params(rng, wide));
    for (float v : out.data()) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0f);
      ASSERT_LE(v, 1.0f);
    }
  }
}

TEST(Scs, SingleSlotWithPointRangesIsOneSimulation) {
  const SimParams p = fixed_params();
  const Image img = oracle::random_image(16, 16, 3, 4);
  const ScsSample s = make_scs(img, 1, 99, ParamRanges::point(p));
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.cataracts[0], simulate_cataract(img, p));
  EXPECT_EQ(s.cataract_hfcs[0], extract_hfc(s.cataracts[0]));
  EXPECT_EQ(s.clear_hfc, extract_hfc(img));
  EXPECT_EQ(s.clear, img);
}

TEST(Scs, DeterministicUnderMasterSeed) {
  const Image img = make_fundus_phantom(32, 3);
  const ScsSample a = make_scs(img, 4, 1234, {});
  const ScsSample b = make_scs(img, 4, 1234, {});
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.cataracts[i], b.cataracts[i]);
    EXPECT_EQ(a.params[i], b.params[i]);
  }
  const ScsSample c = make_scs(img, 4, 1235, {});
  EXPECT_NE(a.params[0], c.params[0]);
}

TEST(Scs, SlotsAreIndependentOfK) {
  const Image img = make_fundus_phantom(32, 8);
  const ScsSample small = make_scs(img, 2, 5, {});
  const ScsSample big = make_scs(img, 6, 5, {});
  EXPECT_EQ(small.cataracts[1], big.cataracts[1]);
  EXPECT_EQ(slot_params(5, 4, {}), big.params[4]);
}

TEST(Scs, SixteenMembersPairwiseDistinct) {
  const Image img = make_fundus_phantom(64, 2);
  const ScsSample s = make_scs(img, kDefaultScsSize, 42, {});
  ASSERT_EQ(s.size(), 16u);
  for (int i = 0; i < 16; ++i) {
    ASSERT_TRUE(s.cataracts[i].same_shape(img));
    for (int j = i + 1; j < 16; ++j) {
      float diff = 0.0f;
      for (std::size_t q = 0; q < img.size(); ++q)
        diff = std::max(diff, std::abs(s.cataracts[i].data()[q] - s.cataracts[j].data()[q]));
      EXPECT_GT(diff, 0.0f) << i << " vs " << j;
    }
  }
}

TEST(Scs, RejectsEmptySet) { EXPECT_THROW(make_scs(Image(4, 4, 3), 0, 1, {}), InvalidArgument); }
