#include "cofuse/ivfuse.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include "cofuse/error.hpp"
#include "cofuse/guided_filter.hpp"

namespace cofuse {

void AdmmParams::validate() const {
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw InvalidArgument("ADMM: c1 and c2 must be >= 0");
  if (!(rho > 0.0)) throw InvalidArgument("ADMM: rho must be > 0");
  if (max_iter < 1) throw InvalidArgument("ADMM: max_iter must be >= 1");
  if (!(tol > 0.0)) throw InvalidArgument("ADMM: tol must be > 0");
  if (prefilter_radius < 1 || !(prefilter_eps > 0.0) || !(gradient_eps > 0.0)) {
    throw InvalidArgument("ADMM: prefilter radius/eps and gradient eps must be positive");
  }
}

GrayImage forward_dx(const GrayImage& img) {
  GrayImage d(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) d(x, y) = img((x + 1) % img.width(), y) - img(x, y);
  }
  return d;
}

GrayImage forward_dy(const GrayImage& img) {
  GrayImage d(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) d(x, y) = img(x, (y + 1) % img.height()) - img(x, y);
  }
  return d;
}

namespace {

// Adjoint of the periodic forward differences: (Dx^T v)(x) = v(x-1) - v(x).
GrayImage adjoint_dx(const GrayImage& v) {
  GrayImage d(v.width(), v.height());
  const int w = v.width();
  for (int y = 0; y < v.height(); ++y) {
    for (int x = 0; x < w; ++x) d(x, y) = v((x - 1 + w) % w, y) - v(x, y);
  }
  return d;
}

GrayImage adjoint_dy(const GrayImage& v) {
  GrayImage d(v.width(), v.height());
  const int h = v.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < v.width(); ++x) d(x, y) = v(x, (y - 1 + h) % h) - v(x, y);
  }
  return d;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// Solves (a + b * (Dx^T Dx + Dy^T Dy)) x = rhs under periodic boundaries.
class PeriodicPoissonSolver {
 public:
  PeriodicPoissonSolver(int width, int height)
      : w_(width), h_(height), cw_(width / 2 + 1),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * width * height))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * height * (width / 2 + 1)))) {
    forward_ = fftw_plan_dft_r2c_2d(h_, w_, real_.get(), spec_.get(), FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_c2r_2d(h_, w_, spec_.get(), real_.get(), FFTW_ESTIMATE);
    if (!forward_ || !backward_) throw NumericError("FFTW plan creation failed");
    eig_.resize(static_cast<std::size_t>(h_) * cw_);
    for (int v = 0; v < h_; ++v) {
      for (int u = 0; u < cw_; ++u) {
        eig_[static_cast<std::size_t>(v) * cw_ + u] =
            (2.0 - 2.0 * std::cos(2.0 * M_PI * u / w_)) + (2.0 - 2.0 * std::cos(2.0 * M_PI * v / h_));
      }
    }
  }
  ~PeriodicPoissonSolver() {
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  PeriodicPoissonSolver(const PeriodicPoissonSolver&) = delete;
  PeriodicPoissonSolver& operator=(const PeriodicPoissonSolver&) = delete;

  GrayImage solve(const GrayImage& rhs, double a, double b) {
    std::copy(rhs.pixels().begin(), rhs.pixels().end(), real_.get());
    fftw_execute(forward_);
    for (std::size_t i = 0; i < eig_.size(); ++i) {
      const double d = a + b * eig_[i];
      spec_.get()[i][0] /= d;
      spec_.get()[i][1] /= d;
    }
    fftw_execute(backward_);
    GrayImage out(w_, h_);
    const double scale = 1.0 / (static_cast<double>(w_) * h_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = real_.get()[i] * scale;
    return out;
  }

 private:
  int w_, h_, cw_;
  std::unique_ptr<double, FftwDeleter> real_;
  std::unique_ptr<fftw_complex, FftwDeleter> spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
  std::vector<double> eig_;
};

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

}  // namespace

double background_objective(const GrayImage& b, const GrayImage& pre, const GrayImage& ir,
                            const GrayImage& gx_w, const GrayImage& gy_w, const AdmmParams& p) {
  const GrayImage bx = forward_dx(b), by = forward_dy(b);
  const GrayImage ix = forward_dx(ir), iy = forward_dy(ir);
  double data = 0.0, fid = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double d = pre[i] - b[i];
    data += d * d;
    const double ex = ix[i] - bx[i], ey = iy[i] - by[i];
    fid += ex * ex + ey * ey;
    l1 += gx_w[i] * std::abs(bx[i]) + gy_w[i] * std::abs(by[i]);
  }
  return data + p.c1 * fid + p.c2 * l1;
}

BackgroundResult extract_background(const GrayImage& ir, const AdmmParams& p) {
  p.validate();
  if (!all_finite(ir)) throw InvalidArgument("extract_background: non-finite input");
  BackgroundResult r;
  r.prefiltered = guided_filter(ir, ir, p.prefilter_radius, p.prefilter_eps);
  const GrayImage px = forward_dx(r.prefiltered), py = forward_dy(r.prefiltered);
  r.weight_x = GrayImage(ir.width(), ir.height());
  r.weight_y = GrayImage(ir.width(), ir.height());
  for (std::size_t i = 0; i < ir.size(); ++i) {
    r.weight_x[i] = std::max(0.0, -std::log(std::abs(px[i]) + p.gradient_eps));
    r.weight_y[i] = std::max(0.0, -std::log(std::abs(py[i]) + p.gradient_eps));
  }

  // Constant part of the B-step right-hand side: 2 I~ + 2 c1 grad^T grad I.
  const GrayImage ix = forward_dx(ir), iy = forward_dy(ir);
  const GrayImage lap_x = adjoint_dx(ix), lap_y = adjoint_dy(iy);
  GrayImage rhs_fixed(ir.width(), ir.height());
  for (std::size_t i = 0; i < ir.size(); ++i) {
    rhs_fixed[i] = 2.0 * r.prefiltered[i] + 2.0 * p.c1 * (lap_x[i] + lap_y[i]);
  }

  PeriodicPoissonSolver solver(ir.width(), ir.height());
  GrayImage b = r.prefiltered;
  GrayImage zx = forward_dx(b), zy = forward_dy(b);
  GrayImage ux(ir.width(), ir.height(), 0.0), uy(ir.width(), ir.height(), 0.0);
  auto objective = [&](const GrayImage& cur) {
    return background_objective(cur, r.prefiltered, ir, r.weight_x, r.weight_y, p);
  };
  r.objective.push_back(objective(b));

  for (int it = 0; it < p.max_iter; ++it) {
    GrayImage vx(ir.width(), ir.height()), vy(ir.width(), ir.height());
    for (std::size_t i = 0; i < ir.size(); ++i) {
      vx[i] = zx[i] - ux[i];
      vy[i] = zy[i] - uy[i];
    }
    const GrayImage ax = adjoint_dx(vx), ay = adjoint_dy(vy);
    GrayImage rhs = rhs_fixed;
    for (std::size_t i = 0; i < ir.size(); ++i) rhs[i] += p.rho * (ax[i] + ay[i]);
    b = solver.solve(rhs, 2.0, 2.0 * p.c1 + p.rho);

    const GrayImage bx = forward_dx(b), by = forward_dy(b);
    for (std::size_t i = 0; i < ir.size(); ++i) {
      zx[i] = soft_threshold(bx[i] + ux[i], p.c2 * r.weight_x[i] / p.rho);
      zy[i] = soft_threshold(by[i] + uy[i], p.c2 * r.weight_y[i] / p.rho);
      ux[i] += bx[i] - zx[i];
      uy[i] += by[i] - zy[i];
    }
    const double f = objective(b);
    if (!std::isfinite(f)) throw NumericError("extract_background: objective became non-finite");
    const double prev = r.objective.back();
    r.objective.push_back(f);
    r.iterations = it + 1;
    if (std::abs(prev - f) <= p.tol * std::max(std::abs(prev), 1e-12)) {
      r.converged = true;
      break;
    }
  }
  r.background = std::move(b);
  return r;
}

IrSaliency ir_saliency(const GrayImage& ir, const GrayImage& background) {
  if (!ir.same_size(background)) throw InvalidArgument("ir_saliency: size mismatch");
  IrSaliency s{GrayImage(ir.width(), ir.height()), background};
  for (std::size_t i = 0; i < ir.size(); ++i) s.zeta[i] = std::max(ir[i] - background[i], 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Regional SSIM

double ssim_patch(std::span<const double> a, std::span<const double> b, double b1, double b2) {
  if (a.size() != b.size() || a.empty()) throw InvalidArgument("ssim_patch: samples differ in length");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  va /= n;
  vb /= n;
  cov /= n;
  return (2.0 * ma * mb + b1) * (2.0 * cov + b2) / ((ma * ma + mb * mb + b1) * (va + vb + b2));
}

namespace {

// Window origins covering [lo, hi] with stride t, the last flush with hi, inside [0, extent).
std::vector<int> window_origins(int lo, int hi, int window, int stride, int extent) {
  std::vector<int> out;
  const int first = std::clamp(lo, 0, extent - window);
  const int last = std::clamp(hi - window + 1, 0, extent - window);
  for (int o = first; o <= last; o += stride) out.push_back(o);
  if (out.empty() || out.back() < last) out.push_back(last);
  return out;
}

struct Window {
  int x0, y0;
  double score;
};

}  // namespace

RegionalWeights regional_ssim(const GrayImage& pre, const GrayImage& ir, const RegionMap& regions,
                              const SsimParams& p) {
  if (!pre.same_size(ir)) throw InvalidArgument("regional_ssim: images differ in size");
  if (regions.width != pre.width() || regions.height != pre.height()) {
    throw InvalidArgument("regional_ssim: region map size mismatch");
  }
  if (p.window < 3) throw InvalidArgument("regional_ssim: window must be >= 3");
  if (p.stride < 1 || p.stride > p.window) throw InvalidArgument("regional_ssim: stride must lie in [1, N]");
  if (p.window > pre.width() || p.window > pre.height()) {
    throw InvalidArgument("regional_ssim: window larger than image");
  }
  const int w = pre.width();
  const int h = pre.height();
  const int n_win = p.window * p.window;

  GrayImage sum(w, h, 0.0);
  std::vector<int> hits(pre.size(), 0);
  std::vector<std::vector<Window>> per_region(regions.regions);
  std::vector<double> a, b;
  a.reserve(n_win);
  b.reserve(n_win);

  for (int m = 1; m <= regions.regions; ++m) {
    int bx0 = w, by0 = h, bx1 = -1, by1 = -1;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (regions.label(x, y) != m) continue;
        bx0 = std::min(bx0, x);
        by0 = std::min(by0, y);
        bx1 = std::max(bx1, x);
        by1 = std::max(by1, y);
      }
    }
    if (bx1 < 0) continue;
    for (int y0 : window_origins(by0, by1, p.window, p.stride, h)) {
      for (int x0 : window_origins(bx0, bx1, p.window, p.stride, w)) {
        a.clear();
        b.clear();
        for (int y = y0; y < y0 + p.window; ++y) {
          for (int x = x0; x < x0 + p.window; ++x) {
            if (regions.label(x, y) != m) continue;
            a.push_back(pre(x, y));
            b.push_back(ir(x, y));
          }
        }
        if (static_cast<double>(a.size()) < p.min_coverage * n_win) continue;
        const double s = ssim_patch(a, b, p.b1, p.b2);
        per_region[m - 1].push_back({x0, y0, s});
        for (int y = y0; y < y0 + p.window; ++y) {
          for (int x = x0; x < x0 + p.window; ++x) {
            if (regions.label(x, y) != m) continue;
            sum(x, y) += s;
            ++hits[static_cast<std::size_t>(y) * w + x];
          }
        }
      }
    }
  }

  std::vector<Window> all;
  for (const auto& v : per_region) all.insert(all.end(), v.begin(), v.end());
  double global = 0.0;
  if (all.empty()) global = ssim_patch(pre.pixels(), ir.pixels(), p.b1, p.b2);

  RegionalWeights out{GrayImage(w, h, 0.0), p.window, p.stride};
  const double half = 0.5 * (p.window - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (hits[i] > 0) {
        out.map[i] = sum[i] / hits[i];
        continue;
      }
      if (all.empty()) {
        out.map[i] = global;
        continue;
      }
      // Nearest window centre, own region first.
      const std::vector<Window>& pool = per_region[regions.labels[i] - 1].empty() ? all : per_region[regions.labels[i] - 1];
      double best = std::numeric_limits<double>::infinity();
      double score = 0.0;
      for (const Window& win : pool) {
        const double dx = win.x0 + half - x, dy = win.y0 + half - y;
        const double d = dx * dx + dy * dy;
        if (d < best) {
          best = d;
          score = win.score;
        }
      }
      out.map[i] = score;
    }
  }
  return out;
}

RegionalWeights fusion_weights(const RegionalWeights& scores) {
  RegionalWeights w = scores;
  for (double& v : w.map.pixels()) {
    const double c = std::clamp(v, 0.0, 1.0);
    v = c * c;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Complementary fusion

ComplementaryResult complementary_fuse(const GrayImage& pre, const ExposureStack& stack, const GrayImage& ir,
                                       const IrSaliency& sal, const RegionalWeights& weights,
                                       const ComplementaryParams& params) {
  if (stack.channels.empty()) throw InvalidArgument("complementary_fuse: empty stack");
  stack.validate();
  if (!pre.same_size(ir) || !pre.same_size(sal.zeta) || !pre.same_size(weights.map) ||
      !pre.same_size(stack.channels.front())) {
    throw InvalidArgument("complementary_fuse: size mismatch");
  }
  const std::size_t n = pre.size();
  ComplementaryResult r;
  r.zeta_fused = GrayImage(pre.width(), pre.height(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (const GrayImage& ch : stack.channels) {
      best = std::max(best, sal.zeta[i] + weights.map[i] * std::max(ch[i] - ir[i], 0.0));
    }
    r.zeta_fused[i] = best;
  }

  std::vector<double> combined(n);
  for (std::size_t i = 0; i < n; ++i) combined[i] = pre[i] + r.zeta_fused[i];
  std::sort(combined.begin(), combined.end(), std::greater<>());
  const std::size_t half = (n + 1) / 2;
  double aver = 0.0;
  if (params.eta_rule == EtaRule::brightest_half) {
    for (std::size_t i = 0; i < half; ++i) aver += combined[i];
  } else {
    for (std::size_t i = n - half; i < n; ++i) aver += combined[i];
  }
  aver /= static_cast<double>(half);
  r.eta = aver > 0.0 ? std::min(1.0 / aver, 1.0) : 1.0;

  const GrayImage filtered = params.gif_radius > 0
                                 ? guided_filter(r.zeta_fused, pre, params.gif_radius, params.gif_eps)
                                 : r.zeta_fused;
  r.compensation = GrayImage(pre.width(), pre.height());
  r.fused = GrayImage(pre.width(), pre.height());
  for (std::size_t i = 0; i < n; ++i) {
    r.compensation[i] = r.eta * filtered[i];
    r.fused[i] = std::clamp(pre[i] + r.compensation[i], 0.0, 1.0);
  }
  return r;
}

}  // namespace cofuse
