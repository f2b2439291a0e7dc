#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

/// Mean of sqrt((Ix^2 + Iy^2) / 2) over the (W-1)x(H-1) interior, forward
/// differences on the x255 scale.
double avg_gradient(const GrayImage& img);

/// I(fused; a) + I(fused; b) in bits from `bins`-bin joint histograms over [0,1].
double mutual_information(const GrayImage& fused, const GrayImage& a, const GrayImage& b, int bins = 256);

/// Peak-1 PSNR in dB, capped at kPsnrCap for identical images.
inline constexpr double kPsnrCap = 100.0;
double psnr(const GrayImage& x, const GrayImage& y);
/// Mean of psnr(fused, a) and psnr(fused, b).
double psnr(const GrayImage& fused, const GrayImage& a, const GrayImage& b);

struct MefSsimParams {
  int window = 8;
  int stride = 1;
  double c2 = 0.03 * 0.03;
  double structure_power = 4.0;  // structure vectors weighted by contrast^p
};

/// Patch-wise structural fidelity of `fused` to the desired patch built from
/// the stack (max contrast, contrast-weighted structure); mean over windows, in [0,1].
double mef_ssim(const ExposureStack& stack, const GrayImage& fused, const MefSsimParams& params = MefSsimParams{});

struct MetricReport {
  double ag = 0.0;
  double mi = 0.0;
  double psnr = 0.0;
  std::optional<double> mef_ssim;  // present when a stack was supplied
  std::vector<std::string> inputs;
  int bins = 256;
  MefSsimParams mef_params;

  /// {"AG":..,"MI":..,"PSNR":..,"MEF-SSIM":..|null,"VIFF":null,"NIQE":null,"inputs":[..],"params":{..}}
  std::string to_json() const;
};

MetricReport evaluate(const GrayImage& fused, const GrayImage& a, const GrayImage& b, const ExposureStack* stack,
                      int bins = 256);

}  // namespace cofuse
