#include "cofuse/registration.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cofuse/error.hpp"

namespace cofuse {
namespace {

int min_pairs(TransformModel model) { return model == TransformModel::homography ? 4 : 3; }

double triangle_area2(Point2 a, Point2 b, Point2 c) {
  return std::abs((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

// True when some three of the points are (nearly) collinear.
bool degenerate(const std::vector<Point2>& pts) {
  double extent = 0.0;
  for (const Point2& p : pts) {
    for (const Point2& q : pts) extent = std::max(extent, std::hypot(p.x - q.x, p.y - q.y));
  }
  const double tol = 1e-6 * std::max(1.0, extent * extent);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        if (triangle_area2(pts[i], pts[j], pts[k]) <= tol) return true;
      }
    }
  }
  return false;
}

// Hartley normalization: centroid to origin, mean distance sqrt(2).
Eigen::Matrix3d normalizer(const std::vector<Point2>& pts) {
  double mx = 0, my = 0;
  for (const Point2& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  double d = 0;
  for (const Point2& p : pts) d += std::hypot(p.x - mx, p.y - my);
  d /= pts.size();
  const double s = d > 0 ? std::sqrt(2.0) / d : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return t;
}

Transform2D to_transform(const Eigen::Matrix3d& h) {
  std::array<double, 9> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r * 3 + c] = h(r, c);
  }
  return Transform2D(m);
}

Transform2D fit_homography(const std::vector<PointPair>& pairs) {
  std::vector<Point2> src, dst;
  for (const PointPair& p : pairs) {
    src.push_back(p.src);
    dst.push_back(p.dst);
  }
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  Eigen::MatrixXd a(2 * pairs.size(), 9);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Eigen::Vector3d s = ts * Eigen::Vector3d(src[i].x, src[i].y, 1.0);
    const Eigen::Vector3d d = td * Eigen::Vector3d(dst[i].x, dst[i].y, 1.0);
    a.row(2 * i) << -s.x(), -s.y(), -1, 0, 0, 0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0, 0, 0, -s.x(), -s.y(), -1, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  const Eigen::Matrix3d h = td.inverse() * hn * ts;
  if (std::abs(h(2, 2)) < 1e-15 || !h.allFinite()) {
    throw InvalidArgument("fit_transform: degenerate homography");
  }
  return to_transform(h / h(2, 2));
}

Transform2D fit_affine(const std::vector<PointPair>& pairs) {
  Eigen::MatrixXd a(2 * pairs.size(), 6);
  Eigen::VectorXd b(2 * pairs.size());
  a.setZero();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Point2 s = pairs[i].src;
    a.row(2 * i) << s.x, s.y, 1, 0, 0, 0;
    a.row(2 * i + 1) << 0, 0, 0, s.x, s.y, 1;
    b(2 * i) = pairs[i].dst.x;
    b(2 * i + 1) = pairs[i].dst.y;
  }
  const Eigen::VectorXd p = a.colPivHouseholderQr().solve(b);
  return Transform2D({p(0), p(1), p(2), p(3), p(4), p(5), 0, 0, 1});
}

}  // namespace

double reprojection_error(const Transform2D& t, const PointPair& p) {
  const Point2 q = t.apply(p.src);
  return std::hypot(q.x - p.dst.x, q.y - p.dst.y);
}

Transform2D fit_transform(const std::vector<PointPair>& pairs, TransformModel model) {
  if (static_cast<int>(pairs.size()) < min_pairs(model)) {
    throw InvalidArgument("fit_transform: insufficient pairs (" + std::to_string(pairs.size()) +
                          ", need " + std::to_string(min_pairs(model)) + ")");
  }
  std::vector<Point2> src;
  for (const PointPair& p : pairs) src.push_back(p.src);
  if (static_cast<int>(pairs.size()) == min_pairs(model) && degenerate(src)) {
    throw InvalidArgument("fit_transform: degenerate configuration (collinear points)");
  }
  return model == TransformModel::homography ? fit_homography(pairs) : fit_affine(pairs);
}

TransformEstimate estimate_transform(const std::vector<PointPair>& pairs, const RansacParams& params) {
  const int need = min_pairs(params.model);
  if (static_cast<int>(pairs.size()) < need) {
    throw InvalidArgument("estimate_transform: insufficient pairs (" + std::to_string(pairs.size()) +
                          ", need " + std::to_string(need) + ")");
  }
  if (!(params.inlier_px > 0.0) || params.iterations < 1) {
    throw InvalidArgument("estimate_transform: inlier_px and iterations must be positive");
  }
  std::mt19937_64 rng(params.seed);
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);

  auto score = [&](const Transform2D& t, std::vector<unsigned char>& mask, double& err) {
    std::size_t count = 0;
    err = 0.0;
    mask.assign(pairs.size(), 0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double e = reprojection_error(t, pairs[i]);
      if (std::isfinite(e) && e < params.inlier_px) {
        mask[i] = 1;
        ++count;
        err += e;
      }
    }
    return count;
  };

  bool found = false;
  std::size_t best_count = 0;
  double best_err = 0.0;
  Transform2D best;
  std::vector<unsigned char> mask;
  std::vector<PointPair> sample(need);
  std::vector<Point2> sample_src(need), sample_dst(need);
  for (int it = 0; it < params.iterations; ++it) {
    std::vector<std::size_t> idx;
    while (static_cast<int>(idx.size()) < need) {
      const std::size_t i = pick(rng);
      if (std::find(idx.begin(), idx.end(), i) == idx.end()) idx.push_back(i);
    }
    for (int s = 0; s < need; ++s) {
      sample[s] = pairs[idx[s]];
      sample_src[s] = sample[s].src;
      sample_dst[s] = sample[s].dst;
    }
    if (degenerate(sample_src) || degenerate(sample_dst)) continue;
    Transform2D t;
    try {
      t = fit_transform(sample, params.model);
    } catch (const InvalidArgument&) {
      continue;
    }
    if (!t.invertible()) continue;
    double err = 0.0;
    const std::size_t count = score(t, mask, err);
    if (!found || count > best_count || (count == best_count && err < best_err)) {
      found = true;
      best_count = count;
      best_err = err;
      best = t;
    }
  }
  if (!found) throw InvalidArgument("estimate_transform: degenerate configuration (all samples collinear)");

  TransformEstimate out;
  out.transform = best;
  double err = 0.0;
  out.inlier_count = score(best, out.inliers, err);
  // Refit on the consensus set until it stops growing.
  for (int round = 0; round < 5 && out.inlier_count >= static_cast<std::size_t>(need); ++round) {
    std::vector<PointPair> inl;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (out.inliers[i]) inl.push_back(pairs[i]);
    }
    Transform2D refit;
    try {
      refit = fit_transform(inl, params.model);
    } catch (const InvalidArgument&) {
      break;
    }
    std::vector<unsigned char> m2;
    double e2 = 0.0;
    const std::size_t c2 = score(refit, m2, e2);
    if (c2 < out.inlier_count) break;
    const bool same = m2 == out.inliers;
    out.transform = refit;
    out.inliers = std::move(m2);
    out.inlier_count = c2;
    if (same) break;
  }
  return out;
}

}  // namespace cofuse
