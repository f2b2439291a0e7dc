#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cofuse/image.hpp"

namespace cofuse {

/// K aligned captures of one scene, brightest first. `exposure_meta` holds the
/// per-channel transmittance (SVE) or gamma (pseudo-exposure) value.
struct ExposureStack {
  std::vector<GrayImage> channels;
  std::vector<double> exposure_meta;

  int size() const { return static_cast<int>(channels.size()); }
  int width() const { return channels.front().width(); }
  int height() const { return channels.front().height(); }

  /// Throws InvalidArgument unless K >= 1, all channels share dimensions and
  /// the metadata (when present) has one entry per channel.
  void validate() const;
};

/// 2x2 macro-pixel: `channel_at[p]` is the channel index (1..4) captured at
/// position p, positions ordered (0,0), (1,0), (0,1), (1,1) as (dx, dy).
/// `transmittance[k-1]` belongs to channel k.
struct SveLayout {
  std::array<int, 4> channel_at{1, 2, 3, 4};
  std::array<double, 4> transmittance{1.0, 0.55, 0.45, 0.0025};

  /// Throws unless channel_at is a permutation and transmittances are
  /// strictly positive and strictly decreasing.
  void validate() const;
  /// Offset (dx, dy) of channel k (1..4) inside the macro-pixel.
  std::array<int, 2> offset_of(int channel) const;
  /// 20 log10(tau_first / tau_last).
  double dynamic_range_extension_db() const;
};

/// Splits a raw mosaic into four channels (half resolution), optionally
/// bilinearly resampled back to raw resolution with the sub-grid phase honoured.
ExposureStack decode_mosaic(const GrayImage& raw, const SveLayout& layout, bool upsample);

/// Interleaves four half-resolution channels into a mosaic (inverse of decode without upsampling).
GrayImage assemble_mosaic(const ExposureStack& stack, const SveLayout& layout);

struct SveSimulation {
  GrayImage mosaic;
  /// Full-resolution channels clamp(quantize(hdr * tau_k + noise)); the mosaic samples them.
  ExposureStack truth;
};

/// Forward SVE model with seeded Gaussian read noise. `hdr` is radiance >= 0 (may exceed 1).
SveSimulation simulate_sve(const GrayImage& hdr, const SveLayout& layout, double noise_sigma,
                           int quantize_bits, std::uint64_t seed);

}  // namespace cofuse
