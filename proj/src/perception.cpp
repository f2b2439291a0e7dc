#include "cofuse/perception.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cofuse/error.hpp"

namespace cofuse {
namespace {

constexpr double kScale = 255.0;

void require_stack(const ExposureStack& stack, const char* who) {
  if (stack.channels.empty()) throw InvalidArgument(std::string(who) + ": empty stack");
  stack.validate();
}

}  // namespace

GrayImage brightness_deviation(const ExposureStack& stack) {
  require_stack(stack, "brightness_deviation");
  const int k_count = stack.size();
  GrayImage acc(stack.width(), stack.height(), 0.0);
  for (const GrayImage& ch : stack.channels) {
    const double mu = kScale * mean(ch);
    const double floor_t = mu / 2.0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const double d = std::max(kScale * ch[i], floor_t) - mu;
      acc[i] += d * d;
    }
  }
  for (double& v : acc.pixels()) v = std::sqrt(v) / k_count;
  return acc;
}

GrayImage weber_contrast(const ExposureStack& stack) {
  require_stack(stack, "weber_contrast");
  GrayImage acc(stack.width(), stack.height(), 0.0);
  for (const GrayImage& ch : stack.channels) {
    const GrayImage mag = gradient_magnitude(ch);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += kScale * mag[i] / (kScale * ch[i] + 1.0);
  }
  for (double& v : acc.pixels()) v /= stack.size();
  return acc;
}

GrayImage contrast_feature(const ExposureStack& stack, int window_radius) {
  require_stack(stack, "contrast_feature");
  if (window_radius < 0) throw InvalidArgument("contrast_feature: window radius must be >= 0");
  GrayImage lo = stack.channels.front();
  GrayImage hi = stack.channels.front();
  for (const GrayImage& ch : stack.channels) {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] = std::min(lo[i], ch[i]);
      hi[i] = std::max(hi[i], ch[i]);
    }
  }
  const GrayImage dark = min_filter(lo, window_radius);
  const GrayImage bright = max_filter(hi, window_radius);
  GrayImage cf(lo.width(), lo.height());
  for (std::size_t i = 0; i < cf.size(); ++i) {
    cf[i] = std::clamp(1.0 - kScale * dark[i] / std::max(kScale * bright[i], 1.0), 0.0, 1.0);
  }
  return cf;
}

GrayImage response_variance(const ExposureStack& stack) {
  require_stack(stack, "response_variance");
  if (stack.size() < 2) throw InvalidArgument("response_variance: needs K >= 2 channels");
  const double k_count = stack.size();
  GrayImage var(stack.width(), stack.height(), 0.0);
  for (std::size_t i = 0; i < var.size(); ++i) {
    double m = 0.0;
    for (const GrayImage& ch : stack.channels) m += kScale * ch[i];
    m /= k_count;
    double s = 0.0;
    for (const GrayImage& ch : stack.channels) {
      const double d = kScale * ch[i] - m;
      s += d * d;
    }
    var[i] = s / k_count;
  }
  double log_sum = 0.0;
  for (double v : var.pixels()) log_sum += std::log(v + 1.0);
  const double chi = std::exp(log_sum / static_cast<double>(var.size())) - 1.0;
  constexpr double kEps = 1e-6;
  for (double& v : var.pixels()) v = (v - chi) / (chi + kEps);
  return var;
}

PerceptionWeights PerceptionWeights::normalized() const {
  if (alpha < 0 || beta < 0 || gamma < 0 || sigma < 0) {
    throw InvalidArgument("perception weights must be >= 0");
  }
  const double s = alpha + beta + gamma + sigma;
  if (!(s > 0.0)) throw InvalidArgument("perception weights must not all be zero");
  return {alpha / s, beta / s, gamma / s, sigma / s};
}

GrayImage normalize_min_max(const GrayImage& map) {
  const auto [lo, hi] = min_max(map);
  GrayImage out(map.width(), map.height(), 0.0);
  if (hi - lo <= 0.0) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (map[i] - lo) / (hi - lo);
  return out;
}

GrayImage perception_map(const GrayImage& bi, const GrayImage& wc, const GrayImage& cf,
                         const GrayImage& v, const PerceptionWeights& weights) {
  if (!bi.same_size(wc) || !bi.same_size(cf) || !bi.same_size(v)) {
    throw InvalidArgument("perception_map: feature maps differ in size");
  }
  const PerceptionWeights w = weights.normalized();
  const GrayImage nb = normalize_min_max(bi);
  const GrayImage nw = normalize_min_max(wc);
  const GrayImage nc = normalize_min_max(cf);
  const GrayImage nv = normalize_min_max(v);
  GrayImage f(bi.width(), bi.height());
  for (std::size_t i = 0; i < f.size(); ++i) {
    f[i] = w.alpha * nb[i] + w.beta * nw[i] + w.gamma * nc[i] + w.sigma * nv[i];
  }
  return f;
}

PerceptionFeatures compute_perception(const ExposureStack& stack, const PerceptionWeights& weights,
                                      int cf_radius) {
  PerceptionFeatures pf;
  pf.weights = weights.normalized();
  pf.bi = brightness_deviation(stack);
  pf.wc = weber_contrast(stack);
  pf.cf = contrast_feature(stack, cf_radius);
  pf.v = stack.size() >= 2 ? response_variance(stack) : GrayImage(stack.width(), stack.height(), 0.0);
  pf.f = perception_map(pf.bi, pf.wc, pf.cf, pf.v, pf.weights);
  return pf;
}

// ---------------------------------------------------------------------------
// Segmentation

void update_region_stats(RegionMap& map, const GrayImage& f) {
  map.stats.assign(map.regions, RegionStat{});
  std::vector<double> sums(map.regions, 0.0);
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    const int m = map.labels[i] - 1;
    ++map.stats[m].count;
    sums[m] += f[i];
  }
  for (int m = 0; m < map.regions; ++m) {
    if (map.stats[m].count > 0) map.stats[m].mean_f = sums[m] / map.stats[m].count;
  }
}

namespace {

struct Mixture {
  std::vector<double> weight, mean, var;
};

constexpr double kLog2Pi = 1.8378770664093453;

double log_component(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + d * d / var);
}

// log sum_j exp(a_j), also fills per-component log terms.
double log_sum_exp(const std::vector<double>& a) {
  const double m = *std::max_element(a.begin(), a.end());
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

RegionMap segment_regions(const GrayImage& f, int regions, bool refine, const EmParams& em) {
  if (regions < 2) throw InvalidArgument("segment_regions: M must be >= 2");
  if (!all_finite(f)) throw InvalidArgument("segment_regions: non-finite perception values");
  const std::size_t n = f.size();
  RegionMap map;
  map.width = f.width();
  map.height = f.height();
  map.regions = regions;
  map.labels.assign(n, 1);

  // Stage 1: threshold i is the last value of the i-th of M equal-count groups.
  std::vector<double> sorted(f.pixels().begin(), f.pixels().end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> thresholds;
  for (int i = 1; i < regions; ++i) {
    const std::size_t rank = (static_cast<std::size_t>(i) * n + regions - 1) / regions;
    thresholds.push_back(sorted[std::max<std::size_t>(rank, 1) - 1]);
  }
  for (std::size_t p = 0; p < n; ++p) {
    int label = 1;
    for (double t : thresholds) label += f[p] > t ? 1 : 0;
    map.labels[p] = label;
  }
  update_region_stats(map, f);

  const bool any_empty = std::any_of(map.stats.begin(), map.stats.end(),
                                     [](const RegionStat& s) { return s.count == 0; });
  if (!refine || any_empty) return map;

  // Stage 2: EM from the stage-1 partition.
  Mixture mix;
  for (int m = 0; m < regions; ++m) {
    mix.weight.push_back(static_cast<double>(map.stats[m].count) / n);
    mix.mean.push_back(map.stats[m].mean_f);
  }
  mix.var.assign(regions, 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    const int m = map.labels[p] - 1;
    const double d = f[p] - mix.mean[m];
    mix.var[m] += d * d;
  }
  for (int m = 0; m < regions; ++m) {
    mix.var[m] = std::max(mix.var[m] / map.stats[m].count, em.variance_floor);
  }

  std::vector<double> resp(n * regions);
  std::vector<double> terms(regions);
  auto e_step = [&]() {
    double ll = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (int m = 0; m < regions; ++m) {
        terms[m] = mix.weight[m] > 0.0
                       ? std::log(mix.weight[m]) + log_component(f[p], mix.mean[m], mix.var[m])
                       : -INFINITY;
      }
      const double lse = log_sum_exp(terms);
      ll += lse;
      for (int m = 0; m < regions; ++m) resp[p * regions + m] = std::exp(terms[m] - lse);
    }
    return ll;
  };

  double ll = e_step();
  map.log_likelihood.push_back(ll);
  for (int it = 0; it < em.max_iter; ++it) {
    // M-step.
    for (int m = 0; m < regions; ++m) {
      double nk = 0.0, s = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        nk += resp[p * regions + m];
        s += resp[p * regions + m] * f[p];
      }
      if (nk <= 0.0) {
        mix.weight[m] = 0.0;
        continue;
      }
      const double mu = s / nk;
      double v = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        const double d = f[p] - mu;
        v += resp[p * regions + m] * d * d;
      }
      mix.weight[m] = nk / n;
      mix.mean[m] = mu;
      mix.var[m] = std::max(v / nk, em.variance_floor);
    }
    const double next = e_step();
    map.log_likelihood.push_back(next);
    const double gain = next - ll;
    ll = next;
    if (gain < em.tol) break;
  }

  // Relabel by maximum posterior, component order by ascending mean.
  std::vector<int> order(regions);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return mix.mean[a] < mix.mean[b]; });
  std::vector<int> rank_of(regions);
  for (int r = 0; r < regions; ++r) rank_of[order[r]] = r;
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    for (int m = 1; m < regions; ++m) {
      if (resp[p * regions + m] > resp[p * regions + best]) best = m;
    }
    map.labels[p] = rank_of[best] + 1;
  }
  map.refined = true;
  update_region_stats(map, f);
  return map;
}

}  // namespace cofuse
