#include "cofuse/mef.hpp"

#include <algorithm>
#include <cmath>

#include "cofuse/error.hpp"
#include "cofuse/guided_filter.hpp"
#include "cofuse/pyramid.hpp"

namespace cofuse {
namespace {

constexpr int kBins = 256;

int bin_of(double v) { return std::clamp(static_cast<int>(std::floor(v * kBins)), 0, kBins - 1); }

void check_aligned(std::span<const GrayImage> maps, const char* who) {
  if (maps.empty()) throw InvalidArgument(std::string(who) + ": K must be >= 1");
  for (const GrayImage& m : maps) {
    if (!m.same_size(maps.front())) throw InvalidArgument(std::string(who) + ": maps differ in size");
  }
}

void normalize_simplex(std::vector<GrayImage>& maps) {
  const std::size_t n = maps.front().size();
  const double uniform = 1.0 / static_cast<double>(maps.size());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const GrayImage& m : maps) s += m[i];
    if (!(s > 1e-300) || !std::isfinite(s)) {
      for (GrayImage& m : maps) m[i] = uniform;
    } else {
      for (GrayImage& m : maps) m[i] /= s;
    }
  }
}

}  // namespace

RetinexPair retinex_decompose(const GrayImage& img, int radius, double eps) {
  GrayImage l = clamp(guided_filter(img, img, radius, eps), 1e-4, 1.0);
  GrayImage r(img.width(), img.height());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = img[i] / l[i];
  return {std::move(l), std::move(r)};
}

std::vector<double> cdf_slope(const GrayImage& map) {
  std::vector<double> hist(kBins, 0.0);
  for (double v : map.pixels()) hist[bin_of(v)] += 1.0;
  for (double& h : hist) h /= static_cast<double>(map.size());
  auto at = [](const std::vector<double>& v, int i) { return v[std::clamp(i, 0, kBins - 1)]; };
  std::vector<double> smooth(kBins), cdf(kBins), slope(kBins);
  for (int b = 0; b < kBins; ++b) smooth[b] = 0.25 * at(hist, b - 1) + 0.5 * hist[b] + 0.25 * at(hist, b + 1);
  double c = 0.0;
  for (int b = 0; b < kBins; ++b) {
    c += smooth[b];
    cdf[b] = c;
  }
  for (int b = 0; b < kBins; ++b) slope[b] = std::max(0.5 * (at(cdf, b + 1) - at(cdf, b - 1)), 1e-6);
  return slope;
}

IlluminationTerms illumination_terms(std::span<const GrayImage> ls, const RegionMap& regions,
                                     double sigma_w, double region_pull) {
  check_aligned(ls, "illumination_weights");
  if (!(sigma_w > 0.0)) throw InvalidArgument("illumination_weights: sigma_w must be > 0");
  if (regions.width != ls.front().width() || regions.height != ls.front().height()) {
    throw InvalidArgument("illumination_weights: region map size mismatch");
  }
  const std::size_t n = ls.front().size();
  const int k_count = static_cast<int>(ls.size());
  IlluminationTerms t;

  // W_L1: inverse CDF slope, normalized across exposures.
  for (const GrayImage& l : ls) {
    const std::vector<double> slope = cdf_slope(l);
    GrayImage inv(l.width(), l.height());
    for (std::size_t i = 0; i < n; ++i) inv[i] = 1.0 / slope[bin_of(l[i])];
    t.contrast.push_back(std::move(inv));
  }
  constexpr double kEps = 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const GrayImage& m : t.contrast) s += m[i];
    for (GrayImage& m : t.contrast) m[i] /= s + kEps;
  }

  // W_L2: well-exposedness around a per-region target.
  for (int k = 0; k < k_count; ++k) {
    const GrayImage& l = ls[k];
    std::vector<double> sums(regions.regions, 0.0), counts(regions.regions, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[regions.labels[i] - 1] += l[i];
      counts[regions.labels[i] - 1] += 1.0;
    }
    std::vector<double> u(regions.regions);
    for (int m = 0; m < regions.regions; ++m) {
      const double region_mean = counts[m] > 0 ? sums[m] / counts[m] : 0.5;
      u[m] = (1.0 - region_pull) * 0.5 + region_pull * region_mean;
    }
    GrayImage e(l.width(), l.height());
    for (std::size_t i = 0; i < n; ++i) {
      const double d = l[i] - u[regions.labels[i] - 1];
      e[i] = std::exp(-d * d / (2.0 * sigma_w * sigma_w));
    }
    t.exposedness.push_back(std::move(e));
  }

  for (int k = 0; k < k_count; ++k) {
    GrayImage p = t.contrast[k];
    for (std::size_t i = 0; i < n; ++i) p[i] *= t.exposedness[k][i];
    t.combined.maps.push_back(std::move(p));
  }
  normalize_simplex(t.combined.maps);
  return t;
}

WeightStack illumination_weights(std::span<const GrayImage> ls, const RegionMap& regions, double sigma_w,
                                 double region_pull) {
  return illumination_terms(ls, regions, sigma_w, region_pull).combined;
}

WeightStack reflectance_weights(std::span<const GrayImage> rs, int radius, double eps) {
  check_aligned(rs, "reflectance_weights");
  WeightStack w;
  for (const GrayImage& r : rs) {
    const GrayImage saliency = gradient_magnitude(r);
    w.maps.push_back(clamp(guided_filter(saliency, r, radius, eps), 0.0, INFINITY));
  }
  // Zero saliency everywhere in a pixel's stack falls back to uniform.
  const std::size_t n = w.maps.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const GrayImage& m : w.maps) s += m[i];
    if (s <= 1e-12) {
      for (GrayImage& m : w.maps) m[i] = 0.0;
    }
  }
  normalize_simplex(w.maps);
  return w;
}

GrayImage pyramid_fuse(std::span<const RetinexPair> pairs, const WeightStack& w_illum,
                       const WeightStack& w_refl, int levels) {
  if (pairs.empty()) throw InvalidArgument("pyramid_fuse: empty stack");
  const std::size_t k_count = pairs.size();
  if (w_illum.maps.size() != k_count || w_refl.maps.size() != k_count) {
    throw InvalidArgument("pyramid_fuse: weight stacks must have one map per exposure");
  }
  const GrayImage& ref = pairs.front().illumination;
  for (std::size_t k = 0; k < k_count; ++k) {
    if (!pairs[k].illumination.same_size(ref) || !pairs[k].reflectance.same_size(ref) ||
        !w_illum.maps[k].same_size(ref) || !w_refl.maps[k].same_size(ref)) {
      throw InvalidArgument("pyramid_fuse: dimension mismatch");
    }
  }

  auto fuse_stream = [&](auto&& layer_of, const WeightStack& w) {
    Pyramid acc{PyramidKind::laplacian, {}};
    for (std::size_t k = 0; k < k_count; ++k) {
      const Pyramid lap = build_pyramids(layer_of(pairs[k]), levels).laplacian;
      const Pyramid gw = gaussian_pyramid(w.maps[k], levels);
      if (acc.levels.empty()) {
        for (const GrayImage& l : lap.levels) acc.levels.emplace_back(l.width(), l.height(), 0.0);
      }
      for (int l = 0; l < levels; ++l) {
        GrayImage& dst = acc.levels[l];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += lap.levels[l][i] * gw.levels[l][i];
      }
    }
    return reconstruct_laplacian(acc, false);
  };

  const GrayImage l_hat = fuse_stream([](const RetinexPair& p) -> const GrayImage& { return p.illumination; }, w_illum);
  const GrayImage r_hat = fuse_stream([](const RetinexPair& p) -> const GrayImage& { return p.reflectance; }, w_refl);
  GrayImage out(ref.width(), ref.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(l_hat[i] * r_hat[i], 0.0, 1.0);
  return out;
}

MefResult fuse_exposures(const ExposureStack& stack, const RegionMap& regions, const MefParams& params) {
  stack.validate();
  MefResult r;
  std::vector<GrayImage> ls, rs;
  for (const GrayImage& ch : stack.channels) {
    r.pairs.push_back(retinex_decompose(ch, params.retinex_radius, params.retinex_eps));
    ls.push_back(r.pairs.back().illumination);
    rs.push_back(r.pairs.back().reflectance);
  }
  r.w_illum = illumination_weights(ls, regions, params.sigma_w, params.region_pull);
  r.w_refl = reflectance_weights(rs, params.reflectance_radius, params.reflectance_eps);
  const int levels = std::clamp(params.levels, 1, max_pyramid_levels(stack.width(), stack.height()));
  r.fused = pyramid_fuse(r.pairs, r.w_illum, r.w_refl, levels);
  return r;
}

}  // namespace cofuse
