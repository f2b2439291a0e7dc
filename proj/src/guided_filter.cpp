#include "cofuse/guided_filter.hpp"

#include "cofuse/error.hpp"

namespace cofuse {
namespace {

template <typename Eps>
GrayImage guided_impl(const GrayImage& p, const GrayImage& g, int radius, Eps eps_at) {
  if (!p.same_size(g)) throw InvalidArgument("guided_filter: input and guide differ in size");
  if (radius < 1) throw InvalidArgument("guided_filter: radius must be >= 1");
  const std::size_t n = p.size();
  GrayImage gg(g.width(), g.height()), gp(g.width(), g.height());
  for (std::size_t i = 0; i < n; ++i) {
    gg[i] = g[i] * g[i];
    gp[i] = g[i] * p[i];
  }
  const GrayImage mean_g = box_mean(g, radius);
  const GrayImage mean_p = box_mean(p, radius);
  const GrayImage corr_gg = box_mean(gg, radius);
  const GrayImage corr_gp = box_mean(gp, radius);
  GrayImage a(g.width(), g.height()), b(g.width(), g.height());
  for (std::size_t i = 0; i < n; ++i) {
    const double var = corr_gg[i] - mean_g[i] * mean_g[i];
    const double cov = corr_gp[i] - mean_g[i] * mean_p[i];
    a[i] = cov / (var + eps_at(i));
    b[i] = mean_p[i] - a[i] * mean_g[i];
  }
  const GrayImage mean_a = box_mean(a, radius);
  const GrayImage mean_b = box_mean(b, radius);
  GrayImage q(g.width(), g.height());
  for (std::size_t i = 0; i < n; ++i) q[i] = mean_a[i] * g[i] + mean_b[i];
  return q;
}

}  // namespace

GrayImage guided_filter(const GrayImage& input, const GrayImage& guide, int radius, double eps) {
  if (!(eps > 0.0)) throw InvalidArgument("guided_filter: eps must be > 0");
  return guided_impl(input, guide, radius, [eps](std::size_t) { return eps; });
}

GrayImage guided_filter(const GrayImage& input, const GrayImage& guide, int radius,
                        const GrayImage& eps_map) {
  if (!eps_map.same_size(guide)) throw InvalidArgument("guided_filter: eps map size mismatch");
  for (double e : eps_map.pixels()) {
    if (!(e > 0.0)) throw InvalidArgument("guided_filter: eps map entries must be > 0");
  }
  return guided_impl(input, guide, radius, [&eps_map](std::size_t i) { return eps_map[i]; });
}

}  // namespace cofuse
