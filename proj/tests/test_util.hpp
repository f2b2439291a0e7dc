#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "cofuse/image.hpp"
#include "cofuse/sve.hpp"

namespace cofuse::test {

inline GrayImage random_image(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  GrayImage img(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = u(rng);
  return img;
}

inline double max_abs_diff(const GrayImage& a, const GrayImage& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double mean_abs_diff(const GrayImage& a, const GrayImage& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

inline GrayImage checkerboard(int w, int h, int cell) {
  GrayImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img(x, y) = ((x / cell + y / cell) % 2) ? 1.0 : 0.0;
  return img;
}

inline GrayImage from_rows(int w, int h, std::initializer_list<double> v) {
  GrayImage img(w, h);
  std::size_t i = 0;
  for (double x : v) img[i++] = x;
  return img;
}

inline ExposureStack stack_of(std::initializer_list<GrayImage> channels) {
  ExposureStack s;
  s.channels.assign(channels.begin(), channels.end());
  return s;
}

}  // namespace cofuse::test
