#pragma once

#include <cstdint>
#include <vector>

#include "cofuse/image.hpp"

namespace cofuse {

enum class TransformModel { homography, affine };

struct PointPair {
  Point2 src;
  Point2 dst;
};

struct RansacParams {
  TransformModel model = TransformModel::homography;
  double inlier_px = 2.0;
  int iterations = 2000;
  std::uint64_t seed = 0;
};

struct TransformEstimate {
  Transform2D transform;           // maps src -> dst
  std::vector<unsigned char> inliers;
  std::size_t inlier_count = 0;
};

/// Least-squares fit on all pairs (normalized DLT for homographies).
/// Throws InvalidArgument for too few pairs or a degenerate configuration.
Transform2D fit_transform(const std::vector<PointPair>& pairs, TransformModel model);

/// Seeded RANSAC over minimal samples (4 pairs / 3 pairs), rejecting samples
/// with three collinear points, followed by a least-squares refit on the inliers.
TransformEstimate estimate_transform(const std::vector<PointPair>& pairs, const RansacParams& params);

/// Euclidean distance between t(src) and dst.
double reprojection_error(const Transform2D& t, const PointPair& p);

}  // namespace cofuse
