#include "cofuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "cofuse/error.hpp"

namespace cofuse {

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("GrayImage: dimensions must be >= 1, got " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("GrayImage: dimensions must be >= 1");
  }
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("GrayImage: data length does not match width*height");
  }
}

double GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return (*this)(x, y);
}

ColorImage::ColorImage(GrayImage red, GrayImage green, GrayImage blue)
    : r(std::move(red)), g(std::move(green)), b(std::move(blue)) {
  if (!r.same_size(g) || !r.same_size(b)) {
    throw InvalidArgument("ColorImage: planes differ in size");
  }
}

// ---------------------------------------------------------------------------
// Transform2D

Transform2D::Transform2D() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

Transform2D::Transform2D(const std::array<double, 9>& m) : m_(m) { normalize(); }

Transform2D Transform2D::translation(double tx, double ty) {
  return Transform2D({1, 0, tx, 0, 1, ty, 0, 0, 1});
}

Transform2D Transform2D::rigid(double degrees, double cx, double cy, double tx, double ty) {
  const double a = degrees * M_PI / 180.0;
  const double c = std::cos(a);
  const double s = std::sin(a);
  // p' = R (p - center) + center + t
  return Transform2D({c, -s, cx - c * cx + s * cy + tx, s, c, cy - s * cx - c * cy + ty, 0, 0, 1});
}

void Transform2D::normalize() {
  if (std::abs(m_[8]) > 1e-15) {
    const double inv = 1.0 / m_[8];
    for (double& v : m_) v *= inv;
  }
}

double Transform2D::determinant() const {
  const auto& m = m_;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Transform2D::invertible() const { return std::abs(determinant()) > 1e-12; }

Transform2D Transform2D::inverse() const {
  const double det = determinant();
  if (std::abs(det) <= 1e-12) {
    throw InvalidArgument("Transform2D: singular transform (|det| <= 1e-12)");
  }
  const auto& m = m_;
  std::array<double, 9> r{
      m[4] * m[8] - m[5] * m[7], m[2] * m[7] - m[1] * m[8], m[1] * m[5] - m[2] * m[4],
      m[5] * m[6] - m[3] * m[8], m[0] * m[8] - m[2] * m[6], m[2] * m[3] - m[0] * m[5],
      m[3] * m[7] - m[4] * m[6], m[1] * m[6] - m[0] * m[7], m[0] * m[4] - m[1] * m[3]};
  for (double& v : r) v /= det;
  return Transform2D(r);
}

Point2 Transform2D::apply(Point2 p) const {
  const auto& m = m_;
  const double w = m[6] * p.x + m[7] * p.y + m[8];
  return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

Transform2D operator*(const Transform2D& a, const Transform2D& b) {
  std::array<double, 9> r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.m_[i * 3 + k] * b.m_[k * 3 + j];
      r[i * 3 + j] = s;
    }
  }
  return Transform2D(r);
}

// ---------------------------------------------------------------------------
// Basic raster operations

GrayImage clamp(GrayImage img, double lo, double hi) {
  for (double& v : img.pixels()) v = std::clamp(v, lo, hi);
  return img;
}

double mean(const GrayImage& img) {
  double s = 0.0;
  for (double v : img.pixels()) s += v;
  return s / static_cast<double>(img.size());
}

std::pair<double, double> min_max(const GrayImage& img) {
  auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  return {*lo, *hi};
}

bool all_finite(const GrayImage& img) {
  return std::all_of(img.pixels().begin(), img.pixels().end(),
                     [](double v) { return std::isfinite(v); });
}

std::pair<GrayImage, GrayImage> central_gradient(const GrayImage& img) {
  const int w = img.width();
  const int h = img.height();
  GrayImage gx(w, h), gy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      gx(x, y) = 0.5 * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
      gy(x, y) = 0.5 * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
    }
  }
  return {std::move(gx), std::move(gy)};
}

GrayImage gradient_magnitude(const GrayImage& img) {
  auto [gx, gy] = central_gradient(img);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = std::hypot(gx[i], gy[i]);
  return gx;
}

namespace {

// Windowed sum along one axis; `count` receives the number of samples.
void box_sum_1d(const double* in, double* out, double* count, int n, int stride, int radius) {
  // Prefix sums keep the cost independent of the radius.
  std::vector<double> prefix(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + in[i * stride];
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - radius);
    const int hi = std::min(n - 1, i + radius);
    out[i * stride] = prefix[hi + 1] - prefix[lo];
    if (count) count[i * stride] = hi - lo + 1;
  }
}

template <typename Cmp>
GrayImage extremum_filter(const GrayImage& img, int radius, Cmp better) {
  if (radius < 0) throw InvalidArgument("extremum filter: radius must be >= 0");
  if (radius == 0) return img;
  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h), out(w, h);
  // Monotone deque sliding window, first along rows then columns.
  auto pass = [&](const GrayImage& src, GrayImage& dst, bool horizontal) {
    const int outer = horizontal ? h : w;
    const int n = horizontal ? w : h;
    std::deque<int> dq;
    for (int o = 0; o < outer; ++o) {
      auto at = [&](int i) { return horizontal ? src(i, o) : src(o, i); };
      dq.clear();
      int next = 0;
      for (int i = 0; i < n; ++i) {
        const int hi = std::min(n - 1, i + radius);
        while (next <= hi) {
          while (!dq.empty() && !better(at(dq.back()), at(next))) dq.pop_back();
          dq.push_back(next++);
        }
        while (dq.front() < i - radius) dq.pop_front();
        (horizontal ? dst(i, o) : dst(o, i)) = at(dq.front());
      }
    }
  };
  pass(img, tmp, true);
  pass(tmp, out, false);
  return out;
}

}  // namespace

GrayImage box_mean(const GrayImage& img, int radius) {
  if (radius < 0) throw InvalidArgument("box_mean: radius must be >= 0");
  const int w = img.width();
  const int h = img.height();
  GrayImage rows(w, h), rows_n(w, h), out(w, h), out_n(w, h);
  for (int y = 0; y < h; ++y) {
    box_sum_1d(&img.pixels()[y * w], &rows.pixels()[y * w], &rows_n.pixels()[y * w], w, 1, radius);
  }
  for (int x = 0; x < w; ++x) {
    box_sum_1d(&rows.pixels()[x], &out.pixels()[x], nullptr, h, w, radius);
    box_sum_1d(&rows_n.pixels()[x], &out_n.pixels()[x], nullptr, h, w, radius);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= out_n[i];
  return out;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("gaussian_blur: sigma must be > 0");
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double total = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + r];
  }
  for (double& v : k) v /= total;
  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * img.clamped(x + i, y);
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.clamped(x, y + i);
      out(x, y) = s;
    }
  }
  return out;
}

GrayImage min_filter(const GrayImage& img, int radius) {
  return extremum_filter(img, radius, [](double a, double b) { return a < b; });
}

GrayImage max_filter(const GrayImage& img, int radius) {
  return extremum_filter(img, radius, [](double a, double b) { return a > b; });
}

GrayImage to_gray(const ColorImage& rgb) {
  GrayImage y(rgb.width(), rgb.height());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 0.299 * rgb.r[i] + 0.587 * rgb.g[i] + 0.114 * rgb.b[i];
  }
  return y;
}

double entropy_bits(const GrayImage& img, int bins) {
  if (bins < 1) throw InvalidArgument("entropy_bits: bins must be >= 1");
  std::vector<double> hist(bins, 0.0);
  for (double v : img.pixels()) {
    const int b = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
    hist[b] += 1.0;
  }
  const double n = static_cast<double>(img.size());
  double h = 0.0;
  for (double c : hist) {
    if (c > 0.0) {
      const double p = c / n;
      h -= p * std::log2(p);
    }
  }
  return h;
}

}  // namespace cofuse
