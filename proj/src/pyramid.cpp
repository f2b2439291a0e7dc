#include "cofuse/pyramid.hpp"

#include <algorithm>
#include <string>

#include "cofuse/error.hpp"

namespace cofuse {
namespace {

constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

void check_levels(const GrayImage& img, int levels) {
  if (levels < 1) throw InvalidArgument("pyramid: levels must be >= 1");
  if (levels > max_pyramid_levels(img.width(), img.height())) {
    throw InvalidArgument("pyramid: " + std::to_string(levels) + " levels too many for " +
                          std::to_string(img.width()) + "x" + std::to_string(img.height()));
  }
}

}  // namespace

int max_pyramid_levels(int width, int height) {
  const int m = std::min(width, height);
  int levels = 1;
  while ((1 << levels) <= m) ++levels;
  return levels;
}

GrayImage pyr_down(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  const int ow = (w + 1) / 2;
  const int oh = (h + 1) / 2;
  GrayImage rows(ow, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += kTaps[i + 2] * img.clamped(2 * x + i, y);
      rows(x, y) = s;
    }
  }
  GrayImage out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = -2; i <= 2; ++i) s += kTaps[i + 2] * rows.clamped(x, 2 * y + i);
      out(x, y) = s;
    }
  }
  return out;
}

GrayImage pyr_up(const GrayImage& img, int width, int height) {
  // out(x) = 2 * sum_i taps[x - 2i] * img(i); coarse indices are clamped so
  // the effective weights still sum to one at the borders.
  auto expand_1d = [](auto&& sample, int x) {
    double s = 0.0;
    for (int t = -2; t <= 2; ++t) {
      const int num = x - t;
      if (num % 2 != 0) continue;
      s += 2.0 * kTaps[t + 2] * sample(num / 2);
    }
    return s;
  };
  GrayImage rows(width, img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < width; ++x) {
      rows(x, y) = expand_1d([&](int i) { return img.clamped(i, y); }, x);
    }
  }
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out(x, y) = expand_1d([&](int i) { return rows.clamped(x, i); }, y);
    }
  }
  return out;
}

Pyramid gaussian_pyramid(const GrayImage& img, int levels) {
  check_levels(img, levels);
  Pyramid g{PyramidKind::gaussian, {img}};
  for (int l = 1; l < levels; ++l) g.levels.push_back(pyr_down(g.levels.back()));
  return g;
}

PyramidPair build_pyramids(const GrayImage& img, int levels) {
  Pyramid g = gaussian_pyramid(img, levels);
  Pyramid lap{PyramidKind::laplacian, {}};
  for (int l = 0; l + 1 < levels; ++l) {
    const GrayImage& cur = g.levels[l];
    GrayImage up = pyr_up(g.levels[l + 1], cur.width(), cur.height());
    GrayImage d = cur;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= up[i];
    lap.levels.push_back(std::move(d));
  }
  lap.levels.push_back(g.levels.back());
  return {std::move(g), std::move(lap)};
}

GrayImage reconstruct_laplacian(const Pyramid& pyr, bool clamp_output) {
  if (pyr.levels.empty()) throw InvalidArgument("reconstruct_laplacian: empty pyramid");
  if (pyr.kind != PyramidKind::laplacian) {
    throw InvalidArgument("reconstruct_laplacian: pyramid is not laplacian");
  }
  GrayImage cur = pyr.levels.back();
  for (int l = static_cast<int>(pyr.levels.size()) - 2; l >= 0; --l) {
    const GrayImage& detail = pyr.levels[l];
    GrayImage up = pyr_up(cur, detail.width(), detail.height());
    for (std::size_t i = 0; i < up.size(); ++i) up[i] += detail[i];
    cur = std::move(up);
  }
  return clamp_output ? clamp(std::move(cur)) : cur;
}

}  // namespace cofuse
