#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cofuse/error.hpp"
#include "cofuse/guided_filter.hpp"
#include "cofuse/mef.hpp"
#include "cofuse/metrics.hpp"
#include "cofuse/synth.hpp"
#include "test_util.hpp"

using namespace cofuse;

namespace {

RegionMap one_region(int w, int h) {
  RegionMap r;
  r.width = w;
  r.height = h;
  r.regions = 1;
  r.labels.assign(static_cast<std::size_t>(w) * h, 1);
  r.stats.resize(1);
  return r;
}

WeightStack constant_weights(int k, int w, int h) {
  WeightStack s;
  for (int i = 0; i < k; ++i) s.maps.emplace_back(w, h, 1.0 / k);
  return s;
}

void expect_simplex(const WeightStack& w, double tol) {
  for (std::size_t i = 0; i < w.maps.front().size(); ++i) {
    double s = 0;
    for (const GrayImage& m : w.maps) {
      EXPECT_GE(m[i], 0.0);
      s += m[i];
    }
    ASSERT_NEAR(s, 1.0, tol) << i;
  }
}

// Inverse slope of the 1-2-1 smoothed 256-bin CDF at the pixel's own bin.
GrayImage inverse_cdf_slope(const GrayImage& l) {
  std::vector<double> h(256, 0.0);
  auto bin = [](double v) { return std::min(255, std::max(0, static_cast<int>(v * 256.0))); };
  for (std::size_t i = 0; i < l.size(); ++i) h[bin(l[i])] += 1.0 / l.size();
  std::vector<double> cdf(256);
  double c = 0;
  for (int b = 0; b < 256; ++b) {
    const double s = 0.25 * h[std::max(0, b - 1)] + 0.5 * h[b] + 0.25 * h[std::min(255, b + 1)];
    c += s;
    cdf[b] = c;
  }
  GrayImage out(l.width(), l.height());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const int b = bin(l[i]);
    const double slope = 0.5 * (cdf[std::min(255, b + 1)] - cdf[std::max(0, b - 1)]);
    out[i] = 1.0 / std::max(slope, 1e-6);
  }
  return out;
}

}  // namespace

TEST(Retinex, ConstantGivesUnitReflectance) {
  const RetinexPair p = retinex_decompose(GrayImage(20, 20, 0.37));
  EXPECT_LT(test::max_abs_diff(p.illumination, GrayImage(20, 20, 0.37)), 1e-12);
  EXPECT_LT(test::max_abs_diff(p.reflectance, GrayImage(20, 20, 1.0)), 1e-12);
}

TEST(Retinex, StepRoundTrip) {
  GrayImage step(40, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) step(x, y) = x < 20 ? 0.2 : 0.8;
  const RetinexPair p = retinex_decompose(step, 4, 1e-3);
  GrayImage back = p.illumination;
  for (std::size_t i = 0; i < back.size(); ++i) back[i] *= p.reflectance[i];
  EXPECT_LT(test::max_abs_diff(back, step), 1e-12);
  const auto [lo, hi] = min_max(p.illumination);
  EXPECT_GE(lo, 1e-4);
  EXPECT_LE(hi, 1.0);
}

TEST(Retinex, DarkPixelsHitTheFloor) {
  const RetinexPair p = retinex_decompose(GrayImage(10, 10, 0.0));
  EXPECT_EQ(min_max(p.illumination).first, 1e-4);
  EXPECT_EQ(min_max(p.reflectance).second, 0.0);
}

TEST(IlluminationWeights, SingleAndIdentical) {
  std::mt19937_64 rng(1);
  const GrayImage l = test::random_image(16, 12, rng);
  const std::vector<GrayImage> one{l};
  const WeightStack w1 = illumination_weights(one, one_region(16, 12));
  EXPECT_LT(test::max_abs_diff(w1.maps[0], GrayImage(16, 12, 1.0)), 1e-12);
  const std::vector<GrayImage> two{l, l};
  const WeightStack w2 = illumination_weights(two, one_region(16, 12));
  for (const GrayImage& m : w2.maps) EXPECT_LT(test::max_abs_diff(m, GrayImage(16, 12, 0.5)), 1e-12);
}

TEST(IlluminationWeights, ConstantVersusRampMatchesDenseFormula) {
  const int w = 64, h = 16;
  GrayImage flat(w, h, 0.5), ramp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ramp(x, y) = (x + 0.5) / w;
  const std::vector<GrayImage> ls{flat, ramp};
  const RegionMap regions = one_region(w, h);
  const double sigma_w = 0.2, pull = 0.5;
  const WeightStack got = illumination_weights(ls, regions, sigma_w, pull);

  const GrayImage c0 = inverse_cdf_slope(flat), c1 = inverse_cdf_slope(ramp);
  const double u0 = 0.5 * 0.5 + 0.5 * mean(flat), u1 = 0.5 * 0.5 + 0.5 * mean(ramp);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double n0 = c0[i] / (c0[i] + c1[i] + 1e-6), n1 = c1[i] / (c0[i] + c1[i] + 1e-6);
    const double e0 = std::exp(-std::pow(flat[i] - u0, 2) / (2 * sigma_w * sigma_w));
    const double e1 = std::exp(-std::pow(ramp[i] - u1, 2) / (2 * sigma_w * sigma_w));
    const double p0 = n0 * e0, p1 = n1 * e1;
    EXPECT_NEAR(got.maps[0][i], p0 / (p0 + p1), 1e-9);
    EXPECT_NEAR(got.maps[1][i], p1 / (p0 + p1), 1e-9);
  }
  // The flat map concentrates its histogram, so it carries less weight in the middle.
  EXPECT_LT(got.maps[0](w / 2, h / 2), 0.5);
}

TEST(IlluminationWeights, SimplexOnRandomStacks) {
  std::mt19937_64 rng(2);
  for (int k = 1; k <= 4; ++k) {
    std::vector<GrayImage> ls;
    for (int i = 0; i < k; ++i) ls.push_back(test::random_image(20, 14, rng));
    expect_simplex(illumination_weights(ls, one_region(20, 14)), 1e-9);
  }
  EXPECT_THROW(illumination_weights(std::vector<GrayImage>{}, one_region(2, 2)), InvalidArgument);
  EXPECT_THROW(illumination_weights(std::vector<GrayImage>{GrayImage(4, 4)}, one_region(4, 4), 0.0),
               InvalidArgument);
}

TEST(ReflectanceWeights, Cases) {
  std::mt19937_64 rng(3);
  const GrayImage r = test::random_image(16, 16, rng);
  const WeightStack same = reflectance_weights(std::vector<GrayImage>{r, r, r});
  for (const GrayImage& m : same.maps) EXPECT_LT(test::max_abs_diff(m, GrayImage(16, 16, 1.0 / 3)), 1e-12);

  const WeightStack flat = reflectance_weights(std::vector<GrayImage>{GrayImage(8, 8, 1.0), GrayImage(8, 8, 1.0)});
  for (const GrayImage& m : flat.maps) EXPECT_EQ(test::max_abs_diff(m, GrayImage(8, 8, 0.5)), 0.0);

  GrayImage edge(32, 16, 0.5);
  for (int y = 0; y < 16; ++y)
    for (int x = 16; x < 32; ++x) edge(x, y) = 1.5;
  const WeightStack mixed = reflectance_weights(std::vector<GrayImage>{edge, GrayImage(32, 16, 1.0)});
  for (int y = 0; y < 16; ++y) {
    EXPECT_GT(mixed.maps[0](15, y), 0.5);
    EXPECT_GT(mixed.maps[0](16, y), 0.5);
  }
  expect_simplex(mixed, 1e-9);
}

TEST(PyramidFuse, SingleExposureIdentity) {
  std::mt19937_64 rng(4);
  const GrayImage img = test::random_image(40, 30, rng, 0.05, 0.95);
  const std::vector<RetinexPair> pairs{retinex_decompose(img)};
  const GrayImage out = pyramid_fuse(pairs, constant_weights(1, 40, 30), constant_weights(1, 40, 30), 4);
  EXPECT_LT(test::max_abs_diff(out, img), 1e-6);

  const MefResult r = fuse_exposures(test::stack_of({img}), one_region(40, 30), MefParams{});
  EXPECT_LT(test::max_abs_diff(r.fused, img), 1e-6);
}

TEST(PyramidFuse, IdenticalInputsAreIdentity) {
  std::mt19937_64 rng(5);
  const GrayImage img = test::random_image(33, 21, rng, 0.05, 0.95);
  const RetinexPair p = retinex_decompose(img);
  const std::vector<RetinexPair> pairs{p, p, p};
  WeightStack wi, wr;
  for (int k = 0; k < 3; ++k) {
    wi.maps.push_back(test::random_image(33, 21, rng));
    wr.maps.push_back(test::random_image(33, 21, rng));
  }
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double si = wi.maps[0][i] + wi.maps[1][i] + wi.maps[2][i];
    const double sr = wr.maps[0][i] + wr.maps[1][i] + wr.maps[2][i];
    for (int k = 0; k < 3; ++k) {
      wi.maps[k][i] /= si;
      wr.maps[k][i] /= sr;
    }
  }
  EXPECT_LT(test::max_abs_diff(pyramid_fuse(pairs, wi, wr, 4), img), 1e-6);

  const MefResult r = fuse_exposures(test::stack_of({img, img}), one_region(33, 21), MefParams{});
  EXPECT_LT(test::max_abs_diff(r.fused, img), 1e-6);
}

TEST(PyramidFuse, CloseToDenseBlendOnComplementaryScene) {
  const int w = 128, h = 64;
  GrayImage scene(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) scene(x, y) = 0.3 + 0.2 * std::sin(0.2 * x) * std::sin(0.15 * y);
  GrayImage over(w, h), under(w, h);
  WeightStack wi, wr;
  for (int k = 0; k < 2; ++k) {
    wi.maps.emplace_back(w, h);
    wr.maps.emplace_back(w, h);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool left = x < w / 2;
      over(x, y) = std::min(1.0, scene(x, y) * (left ? 1.0 : 3.0));
      under(x, y) = scene(x, y) * (left ? 0.3 : 1.0);
      const double s = 1.0 / (1.0 + std::exp((x - w / 2.0) / 6.0));
      wi.maps[0](x, y) = wr.maps[0](x, y) = s;
      wi.maps[1](x, y) = wr.maps[1](x, y) = 1.0 - s;
    }
  }
  const std::vector<RetinexPair> pairs{retinex_decompose(over), retinex_decompose(under)};
  const GrayImage fused = pyramid_fuse(pairs, wi, wr, 5);
  GrayImage dense(w, h);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const double l = wi.maps[0][i] * pairs[0].illumination[i] + wi.maps[1][i] * pairs[1].illumination[i];
    const double r = wr.maps[0][i] * pairs[0].reflectance[i] + wr.maps[1][i] * pairs[1].reflectance[i];
    dense[i] = std::clamp(l * r, 0.0, 1.0);
  }
  EXPECT_LT(test::mean_abs_diff(fused, dense), 0.05);
}

TEST(PyramidFuse, Errors) {
  const std::vector<RetinexPair> pairs{retinex_decompose(GrayImage(8, 8, 0.5))};
  EXPECT_THROW(pyramid_fuse(pairs, constant_weights(2, 8, 8), constant_weights(1, 8, 8), 2), InvalidArgument);
  EXPECT_THROW(pyramid_fuse(pairs, constant_weights(1, 4, 8), constant_weights(1, 8, 8), 2), InvalidArgument);
  EXPECT_THROW(pyramid_fuse({}, WeightStack{}, WeightStack{}, 2), InvalidArgument);
}

TEST(FuseExposures, PermutationInvariantAndSimplex) {
  SceneParams sp;
  sp.width = sp.height = 96;
  sp.seed = 3;
  const SyntheticScene scene = make_scene(sp);
  const SveSimulation sim = simulate_sve(scene.hdr, SveLayout{}, 0.0, 16, 1);
  const ExposureStack& s = sim.truth;
  ExposureStack p;
  p.channels = {s.channels[3], s.channels[1], s.channels[0], s.channels[2]};
  const RegionMap regions = segment_regions(compute_perception(s, PerceptionWeights{}).f, 4, true);
  const MefResult a = fuse_exposures(s, regions, MefParams{});
  const MefResult b = fuse_exposures(p, regions, MefParams{});
  EXPECT_LT(test::max_abs_diff(a.fused, b.fused), 1e-9);
  expect_simplex(a.w_illum, 1e-9);
  expect_simplex(a.w_refl, 1e-9);
}

TEST(FuseExposures, DetailNotBelowBestChannel) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SceneParams sp;
    sp.width = sp.height = 128;
    sp.seed = seed;
    const SyntheticScene scene = make_scene(sp);
    const ExposureStack s = simulate_sve(scene.hdr, SveLayout{}, 0.0, 16, seed).truth;
    const RegionMap regions = segment_regions(compute_perception(s, PerceptionWeights{}).f, 4, true);
    const double fused_ag = avg_gradient(fuse_exposures(s, regions, MefParams{}).fused);
    for (const GrayImage& c : s.channels) EXPECT_GE(fused_ag, avg_gradient(c)) << seed;
  }
}
