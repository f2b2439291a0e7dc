#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cofuse {

/// Row-major scalar raster. Canonical intensity range is [0,1]; signed maps
/// (Laplacian levels, feature maps) use the same type.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, double fill = 0.0);
  GrayImage(int width, int height, std::vector<double> data);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  double operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Replicate-border access.
  double clamped(int x, int y) const;

  std::span<double> pixels() { return data_; }
  std::span<const double> pixels() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_size(const GrayImage& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Three equally sized planes R, G, B in [0,1].
struct ColorImage {
  GrayImage r;
  GrayImage g;
  GrayImage b;

  ColorImage() = default;
  ColorImage(GrayImage red, GrayImage green, GrayImage blue);

  int width() const { return r.width(); }
  int height() const { return r.height(); }
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// 3x3 homogeneous planar transform, row-major, normalized so m[8] == 1
/// whenever that entry is non-zero.
class Transform2D {
 public:
  Transform2D();  // identity
  explicit Transform2D(const std::array<double, 9>& m);

  static Transform2D identity() { return Transform2D(); }
  static Transform2D translation(double tx, double ty);
  /// Rotation by `degrees` about (cx, cy) followed by translation.
  static Transform2D rigid(double degrees, double cx, double cy, double tx, double ty);

  const std::array<double, 9>& matrix() const { return m_; }
  double operator()(int row, int col) const { return m_[row * 3 + col]; }

  double determinant() const;
  bool invertible() const;
  Transform2D inverse() const;
  Point2 apply(Point2 p) const;

  /// Composition: (a * b).apply(p) == a.apply(b.apply(p)).
  friend Transform2D operator*(const Transform2D& a, const Transform2D& b);

 private:
  void normalize();
  std::array<double, 9> m_;
};

/// Returns `img` with every value clamped to [lo, hi].
GrayImage clamp(GrayImage img, double lo = 0.0, double hi = 1.0);
double mean(const GrayImage& img);
std::pair<double, double> min_max(const GrayImage& img);
bool all_finite(const GrayImage& img);

/// Central-difference gradients with replicate borders.
std::pair<GrayImage, GrayImage> central_gradient(const GrayImage& img);
/// sqrt(gx^2 + gy^2) of the central-difference gradient.
GrayImage gradient_magnitude(const GrayImage& img);

/// Mean over the (2r+1)^2 window intersected with the image.
GrayImage box_mean(const GrayImage& img, int radius);
/// Separable Gaussian blur, replicate borders, kernel radius ceil(3 sigma).
GrayImage gaussian_blur(const GrayImage& img, double sigma);
/// Square-window minimum / maximum, window clipped at the borders.
GrayImage min_filter(const GrayImage& img, int radius);
GrayImage max_filter(const GrayImage& img, int radius);

/// Rec.601 luma 0.299 R + 0.587 G + 0.114 B.
GrayImage to_gray(const ColorImage& rgb);

/// Shannon entropy in bits of a `bins`-bin histogram over [0,1].
double entropy_bits(const GrayImage& img, int bins = 256);

}  // namespace cofuse
