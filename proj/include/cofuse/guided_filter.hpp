#pragma once

#include "cofuse/image.hpp"

namespace cofuse {

/// Edge-preserving guided filter: q = mean(a) * guide + mean(b) with
/// a = cov(guide, input) / (var(guide) + eps), b = mean(input) - a * mean(guide)
/// on (2r+1)^2 box windows clipped at the border. Output is not clamped.
GrayImage guided_filter(const GrayImage& input, const GrayImage& guide, int radius, double eps);

/// Same filter with a per-pixel regularizer map (edge-aware eps); every entry must be > 0.
GrayImage guided_filter(const GrayImage& input, const GrayImage& guide, int radius,
                        const GrayImage& eps_map);

}  // namespace cofuse
