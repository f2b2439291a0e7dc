#include "cofuse/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cofuse/error.hpp"

namespace cofuse {

DescriptorImage::DescriptorImage(const GrayImage& img, const DescriptorParams& params) {
  GrayImage t(img.width(), img.height());
  const double c = params.log_offset;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double v = std::clamp(img[i], 0.0, 1.0);
    t[i] = std::log((v + c) / (1.0 - v + c));
  }
  t = gaussian_blur(t, params.smoothing_sigma);
  auto [gx, gy] = central_gradient(t);
  magnitude_ = GrayImage(img.width(), img.height());
  orientation_ = GrayImage(img.width(), img.height());
  for (std::size_t i = 0; i < t.size(); ++i) {
    magnitude_[i] = std::hypot(gx[i], gy[i]);
    double a = std::atan2(gy[i], gx[i]);
    a = std::fmod(a + 2.0 * M_PI, M_PI);
    if (a >= M_PI) a -= M_PI;
    orientation_[i] = a;
  }
}

std::vector<float> describe_point(const DescriptorImage& prepared, double x, double y,
                                  int patch_radius, double clip) {
  constexpr int kCells = 4;
  constexpr int kBins = 8;
  std::vector<double> hist(kDescriptorSize, 0.0);
  const GrayImage& mag = prepared.magnitude();
  const GrayImage& ori = prepared.orientation();
  const int cx = static_cast<int>(std::lround(x));
  const int cy = static_cast<int>(std::lround(y));
  const double cell = 2.0 * patch_radius / kCells;
  const double sigma = 0.5 * patch_radius;
  for (int dy = -patch_radius; dy <= patch_radius; ++dy) {
    for (int dx = -patch_radius; dx <= patch_radius; ++dx) {
      const double m = mag(cx + dx, cy + dy);
      if (m <= 0.0) continue;
      const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      // Continuous cell coordinates, bilinear over cells, linear over circular bins.
      const double u = (dx + patch_radius) / cell - 0.5;
      const double v = (dy + patch_radius) / cell - 0.5;
      const double o = ori(cx + dx, cy + dy) / M_PI * kBins;
      const int u0 = static_cast<int>(std::floor(u));
      const int v0 = static_cast<int>(std::floor(v));
      const int o0 = static_cast<int>(std::floor(o));
      const double fu = u - u0, fv = v - v0, fo = o - o0;
      for (int iv = 0; iv < 2; ++iv) {
        const int cv = v0 + iv;
        if (cv < 0 || cv >= kCells) continue;
        const double wv = iv ? fv : 1.0 - fv;
        for (int iu = 0; iu < 2; ++iu) {
          const int cu = u0 + iu;
          if (cu < 0 || cu >= kCells) continue;
          const double wu = iu ? fu : 1.0 - fu;
          for (int io = 0; io < 2; ++io) {
            const int bin = ((o0 + io) % kBins + kBins) % kBins;
            const double wo = io ? fo : 1.0 - fo;
            hist[(cv * kCells + cu) * kBins + bin] += m * g * wu * wv * wo;
          }
        }
      }
    }
  }
  auto normalize = [&hist]() {
    double s = 0.0;
    for (double h : hist) s += h * h;
    s = std::sqrt(s);
    if (s <= 0.0) return false;
    for (double& h : hist) h /= s;
    return true;
  };
  std::vector<float> out(kDescriptorSize);
  if (!normalize()) {
    std::fill(out.begin(), out.end(), static_cast<float>(1.0 / std::sqrt(kDescriptorSize)));
    return out;
  }
  for (double& h : hist) h = std::min(h, clip);
  normalize();
  for (int i = 0; i < kDescriptorSize; ++i) out[i] = static_cast<float>(hist[i]);
  return out;
}

DescribeResult describe(const GrayImage& img, const FeatureSet& features,
                        const DescriptorParams& params) {
  if (params.patch_radius < 2) throw InvalidArgument("describe: patch radius must be >= 2");
  const DescriptorImage prepared(img, params);
  DescribeResult r;
  r.described.width = features.width;
  r.described.height = features.height;
  for (const Feature& f : features.features) {
    const Point2 b = f.base();
    const int radius = params.patch_radius << f.level;
    const long cx = std::lround(b.x);
    const long cy = std::lround(b.y);
    if (cx - radius < 0 || cy - radius < 0 || cx + radius >= img.width() ||
        cy + radius >= img.height()) {
      ++r.dropped;
      continue;
    }
    Feature d = f;
    d.descriptor = describe_point(prepared, b.x, b.y, radius, params.clip);
    r.described.features.push_back(std::move(d));
  }
  return r;
}

namespace {

double distance_sq(const std::vector<float>& a, const std::vector<float>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

struct Nearest {
  std::size_t index = 0;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
};

// Ratio test on squared distances: d1 < r * d2  <=>  d1^2 < r^2 d2^2.
bool passes_ratio(const Nearest& n, double ratio) {
  return std::isinf(n.second) || n.best < ratio * ratio * n.second;
}

}  // namespace

std::vector<MatchPair> match(const FeatureSet& a, const FeatureSet& b, double ratio_threshold) {
  std::vector<MatchPair> out;
  if (a.empty() || b.empty()) return out;
  for (const auto* s : {&a, &b}) {
    for (const Feature& f : s->features) {
      if (f.descriptor.size() != kDescriptorSize) throw InvalidArgument("match: feature without descriptor");
    }
  }
  std::vector<Nearest> from_a(a.size()), from_b(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = distance_sq(a.features[i].descriptor, b.features[j].descriptor);
      auto update = [d](Nearest& n, std::size_t idx) {
        if (d < n.best) {
          n.second = n.best;
          n.best = d;
          n.index = idx;
        } else if (d < n.second) {
          n.second = d;
        }
      };
      update(from_a[i], j);
      update(from_b[j], i);
    }
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t j = from_a[i].index;
    if (from_b[j].index != i) continue;
    if (!passes_ratio(from_a[i], ratio_threshold) || !passes_ratio(from_b[j], ratio_threshold)) continue;
    out.push_back({i, j, std::sqrt(from_a[i].best)});
  }
  return out;
}

std::vector<MatchPair> guided_match(const FeatureSet& a, const FeatureSet& b, const Transform2D& b_to_a,
                                    double radius) {
  if (!(radius > 0)) throw InvalidArgument("guided_match: radius must be > 0");
  std::vector<MatchPair> best_for_a(a.size(), MatchPair{0, 0, std::numeric_limits<double>::infinity()});
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Point2 p = b_to_a.apply(b.features[j].base());
    MatchPair best{0, j, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Point2 q = a.features[i].base();
      if (std::hypot(q.x - p.x, q.y - p.y) > radius) continue;
      const double d = distance_sq(a.features[i].descriptor, b.features[j].descriptor);
      if (d < best.distance) best = {i, j, d};
    }
    if (std::isinf(best.distance)) continue;
    MatchPair& slot = best_for_a[best.a];
    if (best.distance < slot.distance) slot = best;
  }
  std::vector<MatchPair> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isinf(best_for_a[i].distance)) continue;
    out.push_back({i, best_for_a[i].b, std::sqrt(best_for_a[i].distance)});
  }
  return out;
}

}  // namespace cofuse
