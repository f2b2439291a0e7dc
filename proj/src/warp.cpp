#include "cofuse/warp.hpp"

#include <cmath>

#include "cofuse/error.hpp"

namespace cofuse {

double sample_bilinear(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0;
  const double fy = y - y0;
  const double top = (1 - fx) * img.clamped(x0, y0) + fx * img.clamped(x0 + 1, y0);
  const double bot = (1 - fx) * img.clamped(x0, y0 + 1) + fx * img.clamped(x0 + 1, y0 + 1);
  return (1 - fy) * top + fy * bot;
}

WarpResult warp_image(const GrayImage& img, const Transform2D& t, int out_width, int out_height) {
  if (!t.invertible()) throw InvalidArgument("warp_image: singular transform");
  const Transform2D inv = t.inverse();
  WarpResult r{GrayImage(out_width, out_height, 0.0),
               std::vector<unsigned char>(static_cast<std::size_t>(out_width) * out_height, 0)};
  constexpr double kSlack = 1e-9;
  const double max_x = img.width() - 1 + kSlack;
  const double max_y = img.height() - 1 + kSlack;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      if (!(s.x >= -kSlack && s.y >= -kSlack && s.x <= max_x && s.y <= max_y)) continue;
      r.image(x, y) = sample_bilinear(img, s.x, s.y);
      r.valid[static_cast<std::size_t>(y) * out_width + x] = 1;
    }
  }
  return r;
}

}  // namespace cofuse
