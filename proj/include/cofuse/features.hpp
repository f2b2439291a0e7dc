#pragma once

#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/perception.hpp"

namespace cofuse {

/// Interest point. Coordinates are in the pixel grid of its pyramid level;
/// level-l pixel (x, y) corresponds to base pixel (x * 2^l, y * 2^l).
struct Feature {
  double x = 0.0;
  double y = 0.0;
  int level = 0;
  int exposure = 1;        // channel index 1..K
  double response = 0.0;   // Harris score, >= 0
  double weighted = 0.0;   // w_m(k) * response, filled by merge_features
  std::vector<float> descriptor;  // unit L2 norm when present

  Point2 base() const;
};

struct FeatureSet {
  std::vector<Feature> features;
  int width = 0;   // source (level 0) dimensions
  int height = 0;

  std::size_t size() const { return features.size(); }
  bool empty() const { return features.empty(); }
};

struct HarrisParams {
  int levels = 1;
  double k = 0.04;
  double rel_threshold = 0.01;
  double window_sigma = 1.5;
};

/// Harris corners on every level of the Gaussian pyramid: structure tensor
/// smoothed with a Gaussian window, response det - k trace^2, 3x3 local maxima
/// at or above rel_threshold * (level maximum), parabolic sub-pixel refinement.
FeatureSet detect_harris(const GrayImage& img, const HarrisParams& params, int exposure = 1);

/// Harris response map of one image (no pyramid, no thresholding).
GrayImage harris_response(const GrayImage& img, double k, double window_sigma);

/// Row-major M x K matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// Region label (1..M) under a feature's base position (rounded, clamped).
int region_of(const Feature& f, const RegionMap& regions);

/// n_k^m feature counts per region (rows) and exposure (columns).
Matrix feature_counts(const std::vector<FeatureSet>& sets, const RegionMap& regions);

/// L_m(k) = n_k^m / sum_j n_j^m; featureless regions get the uniform row 1/K.
Matrix feature_distribution(const std::vector<FeatureSet>& sets, const RegionMap& regions);

struct OptimalExposure {
  double index = 0.0;     // continuous exposure index in [1, K]
  bool warning = false;   // set when all counts are zero or brightness is not monotone
};

/// Natural cubic spline through (k, counts_k), k = 1..K, maximized on a 0.01 grid.
OptimalExposure optimal_exposure(const std::vector<double>& counts,
                                 const std::vector<double>& brightness);

/// Natural cubic spline through (1, y_1) .. (K, y_K) evaluated at x.
class NaturalSpline {
 public:
  explicit NaturalSpline(std::vector<double> y);
  double operator()(double x) const;

 private:
  std::vector<double> y_;
  std::vector<double> second_;  // second derivatives at the knots
};

enum class TransferMode { literal, mixture };

struct ExposureWeightMatrix {
  Matrix w;                       // M x K
  std::vector<double> i_opt;      // per region, in [1, K]
  double sigma = 1.0;
};

/// E(k|i) = exp(-(k - i)^2 / (2 sigma^2)) / sqrt(2 pi).
double exposure_transfer(double k, double i_opt, double sigma);

/// literal: w_m(k) = sum_j E(k|i_opt,m) L_m(j); mixture: w_m(k) = sum_j E(k|j) L_m(j).
ExposureWeightMatrix adaptive_weights(const Matrix& distribution, const std::vector<double>& i_opt,
                                      double sigma, TransferMode mode = TransferMode::literal);

/// Inter-frame suppression (per level and integer pixel keep the exposure with
/// the largest w_m(k) * S) followed by 3x3 spatial suppression. Output is sorted by
/// descending weighted response; ties break on exposure, x, y ascending.
FeatureSet merge_features(const std::vector<FeatureSet>& sets, const ExposureWeightMatrix& weights,
                          const RegionMap& regions);

}  // namespace cofuse
