#include "cofuse/pseudoexp.hpp"

#include <algorithm>
#include <cmath>

#include "cofuse/error.hpp"

namespace cofuse {

void GammaSpec::validate() const {
  if (gammas.empty()) throw InvalidArgument("gamma list is empty");
  if (!(alpha > 0.0)) throw InvalidArgument("gamma gain alpha must be > 0");
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > 0.0)) throw InvalidArgument("gamma values must be > 0");
    if (i > 0 && !(gammas[i] > gammas[i - 1])) throw InvalidArgument("gamma list must be strictly ascending");
  }
}

GrayImage luminance(const ColorImage& rgb) { return to_gray(rgb); }

ExposureStack gamma_stack(const GrayImage& y, const GammaSpec& spec) {
  spec.validate();
  ExposureStack stack;
  for (double g : spec.gammas) {
    GrayImage ch(y.width(), y.height());
    for (std::size_t i = 0; i < y.size(); ++i) {
      ch[i] = std::clamp(spec.alpha * std::pow(std::max(y[i], 0.0), g), 0.0, 1.0);
    }
    stack.channels.push_back(std::move(ch));
    stack.exposure_meta.push_back(g);
  }
  return stack;
}

namespace {

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

}  // namespace

GammaSpec select_gammas(const GrayImage& y, const GammaSelection& sel) {
  if (sel.count < 2) throw InvalidArgument("select_gammas: count must be >= 2");
  if (!(sel.lo > 0.0) || !(sel.hi > sel.lo)) throw InvalidArgument("select_gammas: need 0 < lo < hi");
  const double m = mean(y);
  const double pivot = std::clamp(1.0, sel.lo, sel.hi);
  double lo = sel.lo, hi = sel.hi;
  if (m > sel.bright_threshold) {
    lo = pivot < sel.hi ? pivot : 0.5 * (sel.lo + sel.hi);
  } else if (m < sel.dark_threshold) {
    hi = pivot > sel.lo ? pivot : 0.5 * (sel.lo + sel.hi);
  }
  GammaSpec spec;
  spec.gammas = linspace(lo, hi, sel.count);
  return spec;
}

ColorImage recombine_color(const GrayImage& y_fused, const ColorImage& original) {
  if (!y_fused.same_size(original.r)) throw InvalidArgument("recombine_color: size mismatch");
  const GrayImage y = luminance(original);
  ColorImage out(GrayImage(y.width(), y.height()), GrayImage(y.width(), y.height()),
                 GrayImage(y.width(), y.height()));
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = std::clamp(y_fused[i] / std::max(y[i], 1e-4), 0.0, 4.0);
    out.r[i] = std::clamp(original.r[i] * r, 0.0, 1.0);
    out.g[i] = std::clamp(original.g[i] * r, 0.0, 1.0);
    out.b[i] = std::clamp(original.b[i] * r, 0.0, 1.0);
  }
  return out;
}

}  // namespace cofuse
