#pragma once

#include <span>
#include <vector>

#include "cofuse/image.hpp"
#include "cofuse/perception.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

struct AdmmParams {
  double c1 = 0.1;    // gradient fidelity to the raw IR image
  double c2 = 0.05;   // weighted L1 gradient penalty
  double rho = 1.0;
  int max_iter = 100;
  double tol = 1e-5;  // relative objective change
  int prefilter_radius = 8;
  double prefilter_eps = 1e-3;
  double gradient_eps = 1e-3;

  void validate() const;
};

struct BackgroundResult {
  GrayImage background;          // B_ir
  GrayImage prefiltered;         // guided-filtered IR
  GrayImage weight_x, weight_y;  // texture weights G_x, G_y (>= 0)
  std::vector<double> objective; // entry 0 is the starting point, then one per iteration
  int iterations = 0;
  bool converged = false;
};

/// min_B ||I~ - B||^2 + c1 ||grad I - grad B||^2 + c2 ||G o grad B||_1 by ADMM
/// on the split z = grad B. Gradients are periodic forward differences; the
/// quadratic B-step is solved exactly in the Fourier domain.
BackgroundResult extract_background(const GrayImage& ir, const AdmmParams& params = AdmmParams{});

/// Objective value of `b` for the given data, texture weights and parameters.
double background_objective(const GrayImage& b, const GrayImage& prefiltered, const GrayImage& ir,
                            const GrayImage& weight_x, const GrayImage& weight_y, const AdmmParams& params);

/// Periodic forward differences (wrap-around at the last column / row).
GrayImage forward_dx(const GrayImage& img);
GrayImage forward_dy(const GrayImage& img);

struct IrSaliency {
  GrayImage zeta;        // max(ir - background, 0)
  GrayImage background;
};

IrSaliency ir_saliency(const GrayImage& ir, const GrayImage& background);

/// Per-pixel map with the sliding-window geometry that produced it.
struct RegionalWeights {
  GrayImage map;
  int window = 11;
  int stride = 6;
};

struct SsimParams {
  int window = 11;
  int stride = 6;
  double b1 = 0.01 * 0.01;
  double b2 = 0.03 * 0.03;
  double min_coverage = 0.5;
};

/// SSIM of two equally long samples (population statistics).
double ssim_patch(std::span<const double> a, std::span<const double> b, double b1, double b2);

/// Region-constrained local SSIM score map between I_pre and the IR image.
RegionalWeights regional_ssim(const GrayImage& pre, const GrayImage& ir, const RegionMap& regions,
                              const SsimParams& params = SsimParams{});

/// w = clamp(score, 0, 1)^2.
RegionalWeights fusion_weights(const RegionalWeights& scores);

enum class EtaRule { brightest_half, dimmest_half };

struct ComplementaryParams {
  int gif_radius = 4;  // 0 disables the final guided filter
  double gif_eps = 1e-4;
  EtaRule eta_rule = EtaRule::brightest_half;
};

struct ComplementaryResult {
  GrayImage fused;         // I_out
  GrayImage zeta_fused;
  GrayImage compensation;  // eta * GIF(zeta_fused)
  double eta = 1.0;
};

/// zeta'_k = zeta + w * max(I_k - ir, 0), zeta_fused = max_k zeta'_k,
/// eta = min(1 / mean of half of (I_pre + zeta_fused), 1),
/// I_out = clamp(I_pre + eta * GIF(zeta_fused, guide = I_pre), 0, 1).
ComplementaryResult complementary_fuse(const GrayImage& pre, const ExposureStack& stack, const GrayImage& ir,
                                       const IrSaliency& saliency, const RegionalWeights& weights,
                                       const ComplementaryParams& params = ComplementaryParams{});

}  // namespace cofuse
