#pragma once

#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

struct GammaSpec {
  std::vector<double> gammas{0.8, 1.0, 1.2, 1.4};  // ascending
  double alpha = 1.0;

  /// Throws unless the list is non-empty, strictly positive and ascending, and alpha > 0.
  void validate() const;
};

/// Y = 0.299 R + 0.587 G + 0.114 B.
GrayImage luminance(const ColorImage& rgb);

/// Channel j = clamp(alpha * y^gamma_j, 0, 1), brightest (smallest gamma) first.
ExposureStack gamma_stack(const GrayImage& y, const GammaSpec& spec = GammaSpec{});

struct GammaSelection {
  double lo = 0.8;
  double hi = 1.4;
  int count = 4;
  double dark_threshold = 0.3;
  double bright_threshold = 0.6;
};

/// Mean-luminance rule: bright scenes sample [max(1, lo), hi], dark scenes
/// [lo, min(1, hi)], otherwise the whole range, evenly spaced.
GammaSpec select_gammas(const GrayImage& y, const GammaSelection& sel = GammaSelection{});

/// Scales each channel by clamp(y_fused / max(Y(original), 1e-4), 0, 4), then clamps to [0,1].
ColorImage recombine_color(const GrayImage& y_fused, const ColorImage& original);

}  // namespace cofuse
