#pragma once

#include <span>
#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/perception.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

/// Illumination/reflectance split with img == illumination * reflectance.
struct RetinexPair {
  GrayImage illumination;  // in [1e-4, 1]
  GrayImage reflectance;   // >= 0
};

/// K per-pixel weight maps summing to one at every pixel.
struct WeightStack {
  std::vector<GrayImage> maps;

  int size() const { return static_cast<int>(maps.size()); }
};

struct MefParams {
  int retinex_radius = 15;
  double retinex_eps = 1e-3;
  double sigma_w = 0.2;
  /// u_{k,m} = (1 - region_pull) * 0.5 + region_pull * mean(L_k over region m).
  double region_pull = 0.5;
  int reflectance_radius = 8;
  double reflectance_eps = 1e-4;
  int levels = 5;
};

/// Illumination = guided self-filtering clamped to [1e-4, 1]; reflectance = img / illumination.
RetinexPair retinex_decompose(const GrayImage& img, int radius = 15, double eps = 1e-3);

/// Slope of the smoothed 256-bin cumulative histogram of `map`, per bin, floored at 1e-6.
std::vector<double> cdf_slope(const GrayImage& map);

struct IlluminationTerms {
  std::vector<GrayImage> contrast;      // W_L1: normalized inverse CDF slope
  std::vector<GrayImage> exposedness;   // W_L2: Gaussian around the region target u_{k,m}
  WeightStack combined;                 // product, per-pixel normalized
};

IlluminationTerms illumination_terms(std::span<const GrayImage> illuminations, const RegionMap& regions,
                                     double sigma_w = 0.2, double region_pull = 0.5);

WeightStack illumination_weights(std::span<const GrayImage> illuminations, const RegionMap& regions,
                                 double sigma_w = 0.2, double region_pull = 0.5);

/// Gradient-magnitude saliency of each reflectance smoothed by a guided filter
/// (guide = that reflectance), normalized; all-zero saliency falls back to 1/K.
WeightStack reflectance_weights(std::span<const GrayImage> reflectances, int radius = 8, double eps = 1e-4);

/// Laplacian pyramids of the illumination and reflectance streams blended with
/// Gaussian pyramids of their weights, reconstructed separately and recombined
/// as clamp(L * R, 0, 1).
GrayImage pyramid_fuse(std::span<const RetinexPair> pairs, const WeightStack& w_illum,
                       const WeightStack& w_refl, int levels);

struct MefResult {
  GrayImage fused;  // I_pre
  std::vector<RetinexPair> pairs;
  WeightStack w_illum;
  WeightStack w_refl;
};

/// Whole multi-exposure stage; `levels` is reduced to the largest valid count for the image.
MefResult fuse_exposures(const ExposureStack& stack, const RegionMap& regions, const MefParams& params);

}  // namespace cofuse
