#pragma once

#include <cstddef>
#include <vector>

#include "cofuse/features.hpp"

namespace cofuse {

/// Modality-robust stand-in for a phase-congruency histogram descriptor.
/// 4x4 spatial cells x 8 orientation bins of gradient magnitude on a smoothed
/// symmetric log-ratio intensity, orientations folded modulo pi so that
/// inverted contrast yields the same vector.
struct DescriptorParams {
  int patch_radius = 20;       // at level 0; scaled by 2^level
  double smoothing_sigma = 1.0;
  double log_offset = 0.01;    // log((I + c) / (1 - I + c))
  double clip = 0.2;
};

inline constexpr int kDescriptorSize = 128;

/// Per-image precomputation shared by all features of that image.
class DescriptorImage {
 public:
  DescriptorImage(const GrayImage& img, const DescriptorParams& params);
  const GrayImage& magnitude() const { return magnitude_; }
  const GrayImage& orientation() const { return orientation_; }  // [0, pi)

 private:
  GrayImage magnitude_;
  GrayImage orientation_;
};

struct DescribeResult {
  FeatureSet described;
  std::size_t dropped = 0;  // features closer than the patch radius to the border
};

DescribeResult describe(const GrayImage& img, const FeatureSet& features,
                        const DescriptorParams& params = DescriptorParams{});

/// Descriptor of one base-image location with the given patch radius.
/// A patch without gradient yields the uniform unit vector.
std::vector<float> describe_point(const DescriptorImage& prepared, double x, double y,
                                  int patch_radius, double clip);

struct MatchPair {
  std::size_t a = 0;
  std::size_t b = 0;
  double distance = 0.0;
};

/// Mutual nearest neighbours (L2) that pass the ratio test in both directions.
std::vector<MatchPair> match(const FeatureSet& a, const FeatureSet& b, double ratio_threshold = 0.8);

/// One-to-one matches restricted to pairs with |a - b_to_a(b)| <= radius
/// (base coordinates), each b taking its nearest descriptor among those candidates.
std::vector<MatchPair> guided_match(const FeatureSet& a, const FeatureSet& b, const Transform2D& b_to_a,
                                    double radius);

}  // namespace cofuse
