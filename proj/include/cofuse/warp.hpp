#pragma once

#include <vector>

#include "cofuse/image.hpp"

namespace cofuse {

struct WarpResult {
  GrayImage image;
  /// 1 where the inverse-mapped sample fell inside the source, else 0.
  std::vector<unsigned char> valid;
};

/// out(p) = bilinear(img, t^-1 p); `t` maps source coordinates to output coordinates.
/// Samples outside the source are 0 and flagged invalid. Throws on a singular t.
WarpResult warp_image(const GrayImage& img, const Transform2D& t, int out_width, int out_height);

/// Bilinear sample with replicate borders.
double sample_bilinear(const GrayImage& img, double x, double y);

}  // namespace cofuse
