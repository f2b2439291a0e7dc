#include "cofuse/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <tuple>

#include "cofuse/error.hpp"
#include "cofuse/pyramid.hpp"

namespace cofuse {

Point2 Feature::base() const {
  const double s = std::ldexp(1.0, level);
  return {x * s, y * s};
}

// ---------------------------------------------------------------------------
// Detection

GrayImage harris_response(const GrayImage& img, double k, double window_sigma) {
  auto [gx, gy] = central_gradient(img);
  GrayImage xx(img.width(), img.height()), yy(img.width(), img.height()), xy(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    xx[i] = gx[i] * gx[i];
    yy[i] = gy[i] * gy[i];
    xy[i] = gx[i] * gy[i];
  }
  xx = gaussian_blur(xx, window_sigma);
  yy = gaussian_blur(yy, window_sigma);
  xy = gaussian_blur(xy, window_sigma);
  GrayImage r(img.width(), img.height());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double det = xx[i] * yy[i] - xy[i] * xy[i];
    const double tr = xx[i] + yy[i];
    r[i] = det - k * tr * tr;
  }
  return r;
}

namespace {

double parabolic_offset(double left, double center, double right) {
  const double denom = left - 2.0 * center + right;
  if (denom >= 0.0) return 0.0;  // not a strict maximum along this axis
  return std::clamp(0.5 * (left - right) / denom, -0.5, 0.5);
}

void detect_level(const GrayImage& img, const HarrisParams& p, int level, int exposure,
                  std::vector<Feature>& out) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) return;
  const GrayImage r = harris_response(img, p.k, p.window_sigma);
  double peak = 0.0;
  for (double v : r.pixels()) peak = std::max(peak, v);
  if (!(peak > 0.0)) return;
  const double threshold = p.rel_threshold * peak;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) {
      const double c = r(x, y);
      if (!(c > 0.0) || c < threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const double q = r(x + dx, y + dy);
          // Plateaus keep their first pixel in raster order.
          const bool later = dy > 0 || (dy == 0 && dx > 0);
          if (q > c || (q == c && !later)) {
            is_max = false;
            break;
          }
        }
      }
      if (!is_max) continue;
      Feature f;
      f.x = x + parabolic_offset(r(x - 1, y), c, r(x + 1, y));
      f.y = y + parabolic_offset(r(x, y - 1), c, r(x, y + 1));
      f.level = level;
      f.exposure = exposure;
      f.response = c;
      out.push_back(std::move(f));
    }
  }
}

}  // namespace

FeatureSet detect_harris(const GrayImage& img, const HarrisParams& params, int exposure) {
  if (!(params.rel_threshold > 0.0 && params.rel_threshold < 1.0)) {
    throw InvalidArgument("detect_harris: rel_threshold must lie in (0, 1)");
  }
  if (params.levels < 1) throw InvalidArgument("detect_harris: levels must be >= 1");
  if (params.levels > max_pyramid_levels(img.width(), img.height())) {
    throw InvalidArgument("detect_harris: image too small for " + std::to_string(params.levels) +
                          " levels");
  }
  const Pyramid pyr = gaussian_pyramid(img, params.levels);
  FeatureSet set;
  set.width = img.width();
  set.height = img.height();
  for (int l = 0; l < params.levels; ++l) detect_level(pyr.levels[l], params, l, exposure, set.features);
  return set;
}

// ---------------------------------------------------------------------------
// Exposure statistics

int region_of(const Feature& f, const RegionMap& regions) {
  const Point2 b = f.base();
  const int x = std::clamp(static_cast<int>(std::lround(b.x)), 0, regions.width - 1);
  const int y = std::clamp(static_cast<int>(std::lround(b.y)), 0, regions.height - 1);
  return regions.label(x, y);
}

Matrix feature_counts(const std::vector<FeatureSet>& sets, const RegionMap& regions) {
  Matrix n(regions.regions, static_cast<int>(sets.size()), 0.0);
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const FeatureSet& s = sets[k];
    if (s.width != regions.width || s.height != regions.height) {
      throw InvalidArgument("feature_counts: feature set and region map differ in size");
    }
    for (const Feature& f : s.features) n(region_of(f, regions) - 1, static_cast<int>(k)) += 1.0;
  }
  return n;
}

Matrix feature_distribution(const std::vector<FeatureSet>& sets, const RegionMap& regions) {
  if (sets.empty()) throw InvalidArgument("feature_distribution: no feature sets");
  Matrix l = feature_counts(sets, regions);
  for (int m = 0; m < l.rows; ++m) {
    double total = 0.0;
    for (int k = 0; k < l.cols; ++k) total += l(m, k);
    for (int k = 0; k < l.cols; ++k) l(m, k) = total > 0.0 ? l(m, k) / total : 1.0 / l.cols;
  }
  return l;
}

NaturalSpline::NaturalSpline(std::vector<double> y) : y_(std::move(y)) {
  const int n = static_cast<int>(y_.size());
  if (n < 2) throw InvalidArgument("NaturalSpline: needs at least two knots");
  second_.assign(n, 0.0);
  if (n == 2) return;
  // Unit knot spacing: M_{i-1} + 4 M_i + M_{i+1} = 6 (y_{i+1} - 2 y_i + y_{i-1}).
  const int m = n - 2;
  std::vector<double> c(m, 0.0), d(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const double rhs = 6.0 * (y_[i + 2] - 2.0 * y_[i + 1] + y_[i]);
    const double denom = 4.0 - (i > 0 ? c[i - 1] : 0.0);
    c[i] = 1.0 / denom;
    d[i] = (rhs - (i > 0 ? d[i - 1] : 0.0)) / denom;
  }
  for (int i = m - 1; i >= 0; --i) {
    second_[i + 1] = d[i] - (i + 1 < m ? c[i] * second_[i + 2] : 0.0);
  }
}

double NaturalSpline::operator()(double x) const {
  const int n = static_cast<int>(y_.size());
  const int j = std::clamp(static_cast<int>(std::floor(x - 1.0)), 0, n - 2);
  const double t = x - (j + 1.0);
  const double u = 1.0 - t;
  return u * y_[j] + t * y_[j + 1] + ((u * u * u - u) * second_[j] + (t * t * t - t) * second_[j + 1]) / 6.0;
}

OptimalExposure optimal_exposure(const std::vector<double>& counts,
                                 const std::vector<double>& brightness) {
  const int k_count = static_cast<int>(counts.size());
  if (k_count < 2) throw InvalidArgument("optimal_exposure: needs K >= 2");
  if (!brightness.empty() && brightness.size() != counts.size()) {
    throw InvalidArgument("optimal_exposure: brightness and counts differ in length");
  }
  OptimalExposure out;
  bool increasing = true, decreasing = true;
  for (std::size_t i = 1; i < brightness.size(); ++i) {
    increasing = increasing && brightness[i] > brightness[i - 1];
    decreasing = decreasing && brightness[i] < brightness[i - 1];
  }
  if (!brightness.empty() && !increasing && !decreasing) out.warning = true;

  if (std::all_of(counts.begin(), counts.end(), [](double c) { return c == 0.0; })) {
    out.index = (1.0 + k_count) / 2.0;
    out.warning = true;
    return out;
  }
  const NaturalSpline spline(counts);
  const int steps = (k_count - 1) * 100;
  double best_x = 1.0;
  double best = spline(1.0);
  for (int i = 1; i <= steps; ++i) {
    const double x = 1.0 + i / 100.0;
    const double v = spline(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  out.index = std::clamp(best_x, 1.0, static_cast<double>(k_count));
  return out;
}

double exposure_transfer(double k, double i_opt, double sigma) {
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  const double d = k - i_opt;
  return kInvSqrt2Pi * std::exp(-d * d / (2.0 * sigma * sigma));
}

ExposureWeightMatrix adaptive_weights(const Matrix& distribution, const std::vector<double>& i_opt,
                                      double sigma, TransferMode mode) {
  if (!(sigma > 0.0)) throw InvalidArgument("adaptive_weights: sigma must be > 0");
  if (static_cast<int>(i_opt.size()) != distribution.rows) {
    throw InvalidArgument("adaptive_weights: one optimal exposure per region required");
  }
  ExposureWeightMatrix out{Matrix(distribution.rows, distribution.cols, 0.0), i_opt, sigma};
  for (int m = 0; m < distribution.rows; ++m) {
    for (int k = 0; k < distribution.cols; ++k) {
      double s = 0.0;
      for (int j = 0; j < distribution.cols; ++j) {
        const double e = mode == TransferMode::literal ? exposure_transfer(k + 1, i_opt[m], sigma)
                                                       : exposure_transfer(k + 1, j + 1, sigma);
        s += e * distribution(m, j);
      }
      out.w(m, k) = s;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Merging

namespace {

// Strict "ranks above" order used for every tie-break.
bool ranks_above(const Feature& a, const Feature& b) {
  if (a.weighted != b.weighted) return a.weighted > b.weighted;
  if (a.exposure != b.exposure) return a.exposure < b.exposure;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

using Cell = std::tuple<int, long, long>;  // level, x, y

Cell cell_of(const Feature& f) { return {f.level, std::lround(f.x), std::lround(f.y)}; }

}  // namespace

FeatureSet merge_features(const std::vector<FeatureSet>& sets, const ExposureWeightMatrix& weights,
                          const RegionMap& regions) {
  if (weights.w.rows != regions.regions) {
    throw InvalidArgument("merge_features: weight rows differ from region count");
  }
  FeatureSet out;
  if (sets.empty()) return out;
  out.width = sets.front().width;
  out.height = sets.front().height;

  // Stage 1: one feature per occupied (level, pixel).
  std::map<Cell, Feature> best;
  for (const FeatureSet& s : sets) {
    for (Feature f : s.features) {
      if (f.exposure < 1 || f.exposure > weights.w.cols) {
        throw InvalidArgument("merge_features: exposure index outside weight matrix");
      }
      f.weighted = weights.w(region_of(f, regions) - 1, f.exposure - 1) * f.response;
      auto [it, inserted] = best.try_emplace(cell_of(f), f);
      if (!inserted && ranks_above(f, it->second)) it->second = std::move(f);
    }
  }

  // Stage 2: keep a feature only if it tops its 3x3 neighbourhood.
  for (const auto& [cell, f] : best) {
    const auto [level, cx, cy] = cell;
    bool top = true;
    for (long dy = -1; dy <= 1 && top; ++dy) {
      for (long dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        auto it = best.find({level, cx + dx, cy + dy});
        if (it != best.end() && ranks_above(it->second, f)) {
          top = false;
          break;
        }
      }
    }
    if (top) out.features.push_back(f);
  }
  std::sort(out.features.begin(), out.features.end(), ranks_above);
  return out;
}

}  // namespace cofuse
