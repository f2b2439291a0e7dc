#include "cofuse/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "cofuse/error.hpp"

namespace cofuse {

double avg_gradient(const GrayImage& img) {
  if (img.width() < 2 || img.height() < 2) throw InvalidArgument("avg_gradient: image must be at least 2x2");
  double sum = 0.0;
  for (int y = 0; y + 1 < img.height(); ++y) {
    for (int x = 0; x + 1 < img.width(); ++x) {
      const double gx = 255.0 * (img(x + 1, y) - img(x, y));
      const double gy = 255.0 * (img(x, y + 1) - img(x, y));
      sum += std::sqrt(0.5 * (gx * gx + gy * gy));
    }
  }
  return sum / (static_cast<double>(img.width() - 1) * (img.height() - 1));
}

namespace {

int bin_of(double v, int bins) {
  return std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
}

double pair_information(const GrayImage& x, const GrayImage& y, int bins) {
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  std::vector<double> px(bins, 0.0), py(bins, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int a = bin_of(x[i], bins), b = bin_of(y[i], bins);
    joint[static_cast<std::size_t>(a) * bins + b] += 1.0;
    px[a] += 1.0;
    py[b] += 1.0;
  }
  const double n = static_cast<double>(x.size());
  double mi = 0.0;
  for (int a = 0; a < bins; ++a) {
    for (int b = 0; b < bins; ++b) {
      const double c = joint[static_cast<std::size_t>(a) * bins + b];
      if (c == 0.0) continue;
      mi += (c / n) * std::log(c * n / (px[a] * py[b]));
    }
  }
  return mi / std::log(2.0);
}

}  // namespace

double mutual_information(const GrayImage& fused, const GrayImage& a, const GrayImage& b, int bins) {
  if (!fused.same_size(a) || !fused.same_size(b)) throw InvalidArgument("mutual_information: size mismatch");
  if (bins < 2) throw InvalidArgument("mutual_information: bins must be >= 2");
  return pair_information(fused, a, bins) + pair_information(fused, b, bins);
}

double psnr(const GrayImage& x, const GrayImage& y) {
  if (!x.same_size(y)) throw InvalidArgument("psnr: size mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) mse += (x[i] - y[i]) * (x[i] - y[i]);
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const GrayImage& fused, const GrayImage& a, const GrayImage& b) {
  return 0.5 * (psnr(fused, a) + psnr(fused, b));
}

double mef_ssim(const ExposureStack& stack, const GrayImage& fused, const MefSsimParams& p) {
  stack.validate();
  if (!fused.same_size(stack.channels.front())) throw InvalidArgument("mef_ssim: size mismatch");
  if (p.window < 2 || p.stride < 1) throw InvalidArgument("mef_ssim: invalid window geometry");
  if (p.window > fused.width() || p.window > fused.height()) {
    throw InvalidArgument("mef_ssim: window larger than image");
  }
  const int k_count = stack.size();
  const int n = p.window * p.window;
  std::vector<std::vector<double>> dev(k_count, std::vector<double>(n));
  std::vector<double> contrast(k_count), desired(n), yd(n);
  double total = 0.0;
  long windows = 0;
  for (int y0 = 0; y0 + p.window <= fused.height(); y0 += p.stride) {
    for (int x0 = 0; x0 + p.window <= fused.width(); x0 += p.stride) {
      double c_max = 0.0;
      for (int k = 0; k < k_count; ++k) {
        const GrayImage& ch = stack.channels[k];
        double mu = 0.0;
        for (int j = 0; j < p.window; ++j) {
          for (int i = 0; i < p.window; ++i) mu += ch(x0 + i, y0 + j);
        }
        mu /= n;
        double norm = 0.0;
        for (int j = 0; j < p.window; ++j) {
          for (int i = 0; i < p.window; ++i) {
            const double d = ch(x0 + i, y0 + j) - mu;
            dev[k][j * p.window + i] = d;
            norm += d * d;
          }
        }
        contrast[k] = std::sqrt(norm);
        c_max = std::max(c_max, contrast[k]);
      }
      std::fill(desired.begin(), desired.end(), 0.0);
      for (int k = 0; k < k_count; ++k) {
        if (contrast[k] <= 0.0) continue;
        const double w = std::pow(contrast[k], p.structure_power) / contrast[k];
        for (int i = 0; i < n; ++i) desired[i] += w * dev[k][i];
      }
      double s_norm = 0.0;
      for (double v : desired) s_norm += v * v;
      s_norm = std::sqrt(s_norm);
      for (double& v : desired) v = s_norm > 0.0 ? c_max * v / s_norm : 0.0;

      double mu_y = 0.0;
      for (int j = 0; j < p.window; ++j) {
        for (int i = 0; i < p.window; ++i) mu_y += fused(x0 + i, y0 + j);
      }
      mu_y /= n;
      double var_x = 0.0, var_y = 0.0, cov = 0.0;
      for (int j = 0; j < p.window; ++j) {
        for (int i = 0; i < p.window; ++i) {
          const double dy = fused(x0 + i, y0 + j) - mu_y;
          const double dx = desired[j * p.window + i];
          var_x += dx * dx;
          var_y += dy * dy;
          cov += dx * dy;
        }
      }
      var_x /= n;
      var_y /= n;
      cov /= n;
      total += (2.0 * cov + p.c2) / (var_x + var_y + p.c2);
      ++windows;
    }
  }
  return std::clamp(total / static_cast<double>(windows), 0.0, 1.0);
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["AG"] = ag;
  j["MI"] = mi;
  j["PSNR"] = psnr;
  j["MEF-SSIM"] = mef_ssim ? nlohmann::ordered_json(*mef_ssim) : nlohmann::ordered_json(nullptr);
  j["VIFF"] = nullptr;
  j["NIQE"] = nullptr;
  j["inputs"] = inputs;
  j["params"] = {{"mi_bins", bins},
                 {"psnr_peak", 1.0},
                 {"psnr_cap_db", kPsnrCap},
                 {"mef_ssim_window", mef_params.window},
                 {"mef_ssim_stride", mef_params.stride},
                 {"mef_ssim_c2", mef_params.c2},
                 {"mef_ssim_structure_power", mef_params.structure_power}};
  return j.dump(2);
}

MetricReport evaluate(const GrayImage& fused, const GrayImage& a, const GrayImage& b, const ExposureStack* stack,
                      int bins) {
  MetricReport r;
  r.ag = avg_gradient(fused);
  r.mi = mutual_information(fused, a, b, bins);
  r.psnr = psnr(fused, a, b);
  if (stack != nullptr) r.mef_ssim = mef_ssim(*stack, fused, r.mef_params);
  r.bins = bins;
  return r;
}

}  // namespace cofuse
