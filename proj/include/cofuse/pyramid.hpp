#pragma once

#include <vector>

#include "cofuse/image.hpp"

namespace cofuse {

enum class PyramidKind { gaussian, laplacian };

/// Level 0 has the source size; level l+1 has ceil(size_l / 2). A Laplacian
/// pyramid keeps the coarsest Gaussian level as its last entry (the residual).
struct Pyramid {
  PyramidKind kind = PyramidKind::gaussian;
  std::vector<GrayImage> levels;
};

struct PyramidPair {
  Pyramid gaussian;
  Pyramid laplacian;
};

/// Largest level count allowed for a width x height image
/// (2^(levels-1) <= min(width, height)).
int max_pyramid_levels(int width, int height);

/// Blur with the 5-tap binomial [1 4 6 4 1]/16 (replicate borders), then keep even samples.
GrayImage pyr_down(const GrayImage& img);
/// Burt-Adelson expand of `img` to width x height.
GrayImage pyr_up(const GrayImage& img, int width, int height);

Pyramid gaussian_pyramid(const GrayImage& img, int levels);
PyramidPair build_pyramids(const GrayImage& img, int levels);

/// Coarse-to-fine upsample-and-add. The result is clamped to [0,1] only when
/// `clamp_output` is set; fused reflectance streams need the raw sum.
GrayImage reconstruct_laplacian(const Pyramid& pyr, bool clamp_output = true);

}  // namespace cofuse
