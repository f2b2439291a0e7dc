#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cofuse/error.hpp"
#include "cofuse/guided_filter.hpp"
#include "cofuse/image.hpp"
#include "cofuse/io.hpp"
#include "cofuse/pyramid.hpp"
#include "cofuse/warp.hpp"
#include "test_util.hpp"

using namespace cofuse;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path d = fs::temp_directory_path() / "cofuse_imgcore_test";
  fs::create_directories(d);
  return d;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

}  // namespace

TEST(Io, Pgm8BitFullScaleAndZero) {
  const fs::path p = temp_dir() / "two.pgm";
  write_bytes(p, std::string("P5\n2 1\n255\n") + char(255) + char(0));
  const GrayImage img = load_gray(p);
  ASSERT_EQ(img.width(), 2);
  EXPECT_EQ(img(0, 0), 1.0);
  EXPECT_EQ(img(1, 0), 0.0);
}

TEST(Io, Png16BitLinearScaling) {
  const fs::path p = temp_dir() / "half.png";
  save_image(GrayImage(3, 2, 32768.0 / 65535.0), p, 16);
  const GrayImage img = load_gray(p);
  EXPECT_NEAR(img(1, 1), 32768.0 / 65535.0, 1e-12);
}

TEST(Io, EightBitNearestRounding) {
  const fs::path p = temp_dir() / "mid.png";
  save_image(GrayImage(2, 2, 0.5), p, 8);
  const double v = load_gray(p)(0, 0);
  EXPECT_TRUE(v == 127.0 / 255.0 || v == 128.0 / 255.0);
}

TEST(Io, SixteenBitQuarterIs16384) {
  const fs::path p = temp_dir() / "quarter.pgm";
  save_image(GrayImage(4, 4, 0.25), p, 16);
  std::ifstream f(p, std::ios::binary);
  std::string header;
  for (int lines = 0; lines < 3;) {
    const char c = static_cast<char>(f.get());
    header += c;
    if (c == '\n') ++lines;
  }
  const int hi = f.get(), lo = f.get();
  EXPECT_EQ(hi * 256 + lo, 16384);
}

TEST(Io, RoundTripWithinOneCode) {
  std::mt19937_64 rng(7);
  const GrayImage img = test::random_image(17, 9, rng);
  for (int depth : {8, 16}) {
    for (const char* ext : {".png", ".pgm"}) {
      const fs::path p = temp_dir() / ("rt" + std::to_string(depth) + ext);
      save_image(img, p, depth);
      const GrayImage back = load_gray(p);
      const double step = 1.0 / ((1 << depth) - 1);
      EXPECT_LE(test::max_abs_diff(img, back), step) << p;
    }
  }
}

TEST(Io, ColorRoundTripPreservesPlanes) {
  const fs::path p = temp_dir() / "color.ppm";
  ColorImage c(GrayImage(3, 3, 1.0), GrayImage(3, 3, 0.0), GrayImage(3, 3, 0.6));
  save_image(c, p, 8);
  const AnyImage any = load_image(p);
  ASSERT_TRUE(std::holds_alternative<ColorImage>(any));
  const ColorImage& back = std::get<ColorImage>(any);
  EXPECT_EQ(back.r(1, 1), 1.0);
  EXPECT_EQ(back.g(1, 1), 0.0);
  EXPECT_NEAR(back.b(1, 1), 153.0 / 255.0, 1e-12);
}

TEST(Io, ErrorsAreDistinct) {
  EXPECT_THROW(load_image(temp_dir() / "missing.png"), IoError);
  const fs::path bad = temp_dir() / "bad.xyz";
  write_bytes(bad, "hello");
  EXPECT_THROW(load_image(bad), IoError);
  const fs::path corrupt = temp_dir() / "corrupt.png";
  write_bytes(corrupt, "\x89PNG\r\n\x1a\nnot really");
  EXPECT_THROW(load_image(corrupt), IoError);
  const fs::path truncated = temp_dir() / "short.pgm";
  write_bytes(truncated, "P5\n4 4\n255\nab");
  EXPECT_THROW(load_image(truncated), IoError);
  EXPECT_THROW(save_image(GrayImage(2, 2), temp_dir() / "x.png", 12), InvalidArgument);
  EXPECT_THROW(save_image(GrayImage(2, 2), "/proc/cofuse_no_such_dir/x.png", 8), IoError);
}

TEST(Pyramid, ConstantImage) {
  const PyramidPair p = build_pyramids(GrayImage(20, 12, 0.3), 3);
  ASSERT_EQ(p.gaussian.levels.size(), 3u);
  for (const auto& g : p.gaussian.levels) EXPECT_LT(test::max_abs_diff(g, GrayImage(g.width(), g.height(), 0.3)), 1e-12);
  for (int l = 0; l < 2; ++l) {
    const auto& lap = p.laplacian.levels[l];
    EXPECT_LT(test::max_abs_diff(lap, GrayImage(lap.width(), lap.height(), 0.0)), 1e-12);
  }
  EXPECT_NEAR(p.laplacian.levels[2](0, 0), 0.3, 1e-12);
}

TEST(Pyramid, CeilingSizes) {
  const Pyramid g = gaussian_pyramid(GrayImage(33, 17, 0.0), 4);
  EXPECT_EQ(g.levels[1].width(), 17);
  EXPECT_EQ(g.levels[1].height(), 9);
  EXPECT_EQ(g.levels[3].width(), 5);
  EXPECT_EQ(g.levels[3].height(), 3);
}

TEST(Pyramid, SingleLevelIsIdentity) {
  std::mt19937_64 rng(1);
  const GrayImage img = test::random_image(9, 7, rng);
  const PyramidPair p = build_pyramids(img, 1);
  EXPECT_EQ(test::max_abs_diff(p.gaussian.levels[0], img), 0.0);
  EXPECT_EQ(test::max_abs_diff(p.laplacian.levels[0], img), 0.0);
  EXPECT_EQ(test::max_abs_diff(reconstruct_laplacian(p.laplacian), img), 0.0);
}

TEST(Pyramid, DownsampleMatchesBinomialOracle) {
  std::mt19937_64 rng(3);
  const GrayImage img = test::random_image(11, 8, rng);
  const GrayImage down = pyr_down(img);
  const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  for (int y = 0; y < down.height(); ++y) {
    for (int x = 0; x < down.width(); ++x) {
      double s = 0;
      for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i) s += k[i + 2] * k[j + 2] * img.clamped(2 * x + i, 2 * y + j);
      EXPECT_NEAR(down(x, y), s, 1e-12);
    }
  }
}

TEST(Pyramid, RoundTripRandomSizes) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> side(32, 257);
  for (int seed = 0; seed < 10; ++seed) {
    const int w = seed == 0 ? 257 : side(rng), h = seed == 1 ? 33 : side(rng);
    const GrayImage img = test::random_image(w, h, rng);
    const int levels = max_pyramid_levels(w, h);
    const GrayImage back = reconstruct_laplacian(build_pyramids(img, levels).laplacian);
    EXPECT_LT(test::max_abs_diff(back, img), 1e-6) << w << "x" << h;
  }
}

TEST(Pyramid, RampRoundTrip) {
  GrayImage ramp(128, 96);
  for (int y = 0; y < 96; ++y)
    for (int x = 0; x < 128; ++x) ramp(x, y) = (x + y) / 222.0;
  EXPECT_LT(test::max_abs_diff(reconstruct_laplacian(build_pyramids(ramp, 5).laplacian), ramp), 1e-6);
}

TEST(Pyramid, TooManyLevelsThrows) {
  EXPECT_THROW(build_pyramids(GrayImage(8, 8), 5), InvalidArgument);
  EXPECT_THROW(build_pyramids(GrayImage(8, 8), 0), InvalidArgument);
  EXPECT_THROW(reconstruct_laplacian(Pyramid{PyramidKind::laplacian, {}}), InvalidArgument);
}

TEST(GuidedFilter, ConstantIsExact) {
  const GrayImage c(15, 10, 0.42);
  EXPECT_LT(test::max_abs_diff(guided_filter(c, c, 3, 1e-3), c), 1e-12);
}

TEST(GuidedFilter, LargeEpsApproachesMeanOfWindowMeans) {
  // a -> 0 leaves q = mean over windows of b = mean_p, i.e. a box mean applied twice.
  std::mt19937_64 rng(5);
  const GrayImage img = test::random_image(20, 20, rng);
  EXPECT_LT(test::max_abs_diff(guided_filter(img, img, 2, 1e6), box_mean(box_mean(img, 2), 2)), 1e-3);
}

TEST(GuidedFilter, MatchesDenseLocalLinearModel) {
  std::mt19937_64 rng(9);
  const GrayImage p = test::random_image(12, 9, rng);
  const GrayImage g = test::random_image(12, 9, rng);
  const int r = 2;
  const double eps = 0.01;
  // Dense oracle: per-window least squares, then average the coefficients.
  GrayImage a(12, 9), b(12, 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 12; ++x) {
      double n = 0, mg = 0, mp = 0, mgg = 0, mgp = 0;
      for (int j = std::max(0, y - r); j <= std::min(8, y + r); ++j)
        for (int i = std::max(0, x - r); i <= std::min(11, x + r); ++i) {
          n += 1;
          mg += g(i, j);
          mp += p(i, j);
          mgg += g(i, j) * g(i, j);
          mgp += g(i, j) * p(i, j);
        }
      mg /= n, mp /= n, mgg /= n, mgp /= n;
      a(x, y) = (mgp - mg * mp) / (mgg - mg * mg + eps);
      b(x, y) = mp - a(x, y) * mg;
    }
  }
  const GrayImage ma = box_mean(a, r), mb = box_mean(b, r);
  const GrayImage q = guided_filter(p, g, r, eps);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 12; ++x) EXPECT_NEAR(q(x, y), ma(x, y) * g(x, y) + mb(x, y), 1e-12);
}

TEST(GuidedFilter, StepEdgePreserved) {
  GrayImage step(40, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x) step(x, y) = x < 20 ? 0.0 : 1.0;
  const GrayImage q = guided_filter(step, step, 4, 1e-4);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 40; ++x)
      if (x < 19 || x > 20) {
        EXPECT_LT(std::abs(q(x, y) - step(x, y)), 0.05) << x;
      }
}

TEST(GuidedFilter, LinearInInputWithFixedGuide) {
  std::mt19937_64 rng(21);
  const GrayImage p = test::random_image(16, 16, rng);
  const GrayImage g = test::random_image(16, 16, rng);
  const GrayImage q = guided_filter(p, g, 3, 1e-2);
  for (double s : {0.5, 2.0}) {
    GrayImage ps = p;
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i] *= s;
    const GrayImage qs = guided_filter(ps, g, 3, 1e-2);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(qs[i], s * q[i], 1e-6);
  }
}

TEST(GuidedFilter, Errors) {
  EXPECT_THROW(guided_filter(GrayImage(4, 4), GrayImage(5, 4), 1, 1e-3), InvalidArgument);
  EXPECT_THROW(guided_filter(GrayImage(4, 4), GrayImage(4, 4), 1, 0.0), InvalidArgument);
  EXPECT_THROW(guided_filter(GrayImage(4, 4), GrayImage(4, 4), 0, 1e-3), InvalidArgument);
}

TEST(Warp, IdentityUnchanged) {
  std::mt19937_64 rng(2);
  const GrayImage img = test::random_image(10, 7, rng);
  const WarpResult w = warp_image(img, Transform2D::identity(), 10, 7);
  EXPECT_LT(test::max_abs_diff(w.image, img), 1e-12);
}

TEST(Warp, IntegerTranslationShiftsRamp) {
  GrayImage ramp(30, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 30; ++x) ramp(x, y) = x / 29.0;
  const WarpResult w = warp_image(ramp, Transform2D::translation(3, 0), 30, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 3; ++x) EXPECT_EQ(w.valid[y * 30 + x], 0);
    for (int x = 3; x < 30; ++x) EXPECT_NEAR(w.image(x, y), ramp(x - 3, y), 1e-6);
  }
}

TEST(Warp, HomographyForwardBackward) {
  const GrayImage board = test::checkerboard(96, 96, 32);
  const Transform2D h(std::array<double, 9>{1.02, 0.03, 2.0, -0.02, 0.99, 1.5, 1e-4, -5e-5, 1.0});
  const WarpResult fwd = warp_image(board, h, 96, 96);
  const WarpResult back = warp_image(fwd.image, h.inverse(), 96, 96);
  double sum = 0;
  int n = 0;
  for (int y = 12; y < 84; ++y)
    for (int x = 12; x < 84; ++x) {
      sum += std::abs(back.image(x, y) - board(x, y));
      ++n;
    }
  EXPECT_LT(sum / n, 0.02);
}

TEST(Warp, Composability) {
  const GrayImage img = gaussian_blur(test::checkerboard(80, 80, 10), 1.0);
  const Transform2D t1 = Transform2D::rigid(2.0, 40, 40, 1.5, -1.0);
  const Transform2D t2 = Transform2D::rigid(-1.0, 40, 40, -0.5, 2.0);
  const GrayImage twice = warp_image(warp_image(img, t1, 80, 80).image, t2, 80, 80).image;
  const GrayImage once = warp_image(img, t2 * t1, 80, 80).image;
  double sum = 0;
  int n = 0;
  for (int y = 10; y < 70; ++y)
    for (int x = 10; x < 70; ++x) {
      sum += std::abs(twice(x, y) - once(x, y));
      ++n;
    }
  EXPECT_LT(sum / n, 0.02);
}

TEST(Warp, SingularThrows) {
  const Transform2D s(std::array<double, 9>{1, 2, 0, 2, 4, 0, 0, 0, 1});
  EXPECT_THROW(warp_image(GrayImage(4, 4), s, 4, 4), InvalidArgument);
}

TEST(Transform, CompositionAndInverse) {
  const Transform2D a = Transform2D::rigid(10, 5, 5, 1, 2);
  const Transform2D b(std::array<double, 9>{1.1, 0.1, 3, 0, 0.9, -2, 1e-3, 0, 1});
  const Point2 p{7.0, -3.0};
  const Point2 ab = (a * b).apply(p), seq = a.apply(b.apply(p));
  EXPECT_NEAR(ab.x, seq.x, 1e-12);
  EXPECT_NEAR(ab.y, seq.y, 1e-12);
  const Point2 back = b.inverse().apply(b.apply(p));
  EXPECT_NEAR(back.x, p.x, 1e-10);
  EXPECT_NEAR(back.y, p.y, 1e-10);
  EXPECT_DOUBLE_EQ(b(2, 2), 1.0);
}

TEST(ImageOps, CentralGradientAndEntropy) {
  GrayImage row(3, 1);
  row(0, 0) = 0.0;
  row(1, 0) = 0.5;
  row(2, 0) = 1.0;
  const auto [gx, gy] = central_gradient(row);
  EXPECT_DOUBLE_EQ(gx(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(gy(1, 0), 0.0);
  GrayImage two(2, 1);
  two(1, 0) = 1.0;
  EXPECT_NEAR(entropy_bits(two), 1.0, 1e-12);
  EXPECT_EQ(entropy_bits(GrayImage(4, 4, 0.3)), 0.0);
}

TEST(ImageOps, MinMaxFilters) {
  GrayImage img(5, 1);
  for (int x = 0; x < 5; ++x) img(x, 0) = x;
  EXPECT_EQ(min_filter(img, 1)(2, 0), 1.0);
  EXPECT_EQ(max_filter(img, 1)(2, 0), 3.0);
  EXPECT_EQ(min_filter(img, 0)(2, 0), 2.0);
}
