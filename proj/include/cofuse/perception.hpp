#pragma once

#include <array>
#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

// All four feature maps are evaluated on the 8-bit intensity scale (x255),
// matching the constants in their defining formulas.

/// BI(x) = 1/K * sqrt(sum_k (max(I_k(x), mu_k / 2) - mu_k)^2).
GrayImage brightness_deviation(const ExposureStack& stack);

/// WC(x) = 1/K * sum_k |grad I_k(x)| / (I_k(x) + 1), central differences.
GrayImage weber_contrast(const ExposureStack& stack);

/// CF(x) = 1 - I_d(x) / max(I_b(x), 1), where I_d (I_b) is the channel-wise
/// minimum (maximum) followed by a square window minimum (maximum).
GrayImage contrast_feature(const ExposureStack& stack, int window_radius);

/// V(x) = (Var(x) - chi) / (chi + 1e-6) with Var the population variance
/// across channels and chi = exp(mean log(Var + 1)) - 1. Requires K >= 2.
GrayImage response_variance(const ExposureStack& stack);

struct PerceptionWeights {
  double alpha = 0.25;  // brightness deviation
  double beta = 0.25;   // Weber contrast
  double gamma = 0.25;  // contrast feature
  double sigma = 0.25;  // response variance

  /// Rescales to unit sum. Throws on a negative weight or an all-zero set.
  PerceptionWeights normalized() const;
};

struct PerceptionFeatures {
  GrayImage bi, wc, cf, v, f;
  PerceptionWeights weights;
};

/// Min-max normalizes a map to [0,1]; a constant map becomes all zeros.
GrayImage normalize_min_max(const GrayImage& map);

/// F = alpha*BI' + beta*WC' + gamma*CF' + sigma*V' over min-max normalized maps.
GrayImage perception_map(const GrayImage& bi, const GrayImage& wc, const GrayImage& cf,
                         const GrayImage& v, const PerceptionWeights& weights);

/// All four maps plus F. With a single channel V is zero (variance undefined).
PerceptionFeatures compute_perception(const ExposureStack& stack, const PerceptionWeights& weights,
                                      int cf_radius = 7);

struct RegionStat {
  std::size_t count = 0;
  double mean_f = 0.0;
};

struct RegionMap {
  int width = 0;
  int height = 0;
  int regions = 0;          // M
  std::vector<int> labels;  // row-major, each in [1, M]
  std::vector<RegionStat> stats;
  /// Mixture log-likelihood after every EM iteration (empty when not refined).
  std::vector<double> log_likelihood;
  bool refined = false;

  int label(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct EmParams {
  int max_iter = 50;
  double tol = 1e-6;
  double variance_floor = 1e-8;
};

/// Stage 1: thresholds at the M-quantiles of F. Stage 2 (refine): a 1-D
/// M-component Gaussian mixture fitted by EM from the stage-1 partition,
/// relabelled by maximum posterior. Labels ascend with component mean.
/// When some stage-1 region is empty the stage-1 result is returned.
RegionMap segment_regions(const GrayImage& f, int regions, bool refine,
                          const EmParams& em = EmParams{});

/// Recomputes counts and mean F per label.
void update_region_stats(RegionMap& map, const GrayImage& f);

}  // namespace cofuse
