#include "cofuse/sve.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cofuse/error.hpp"
#include "cofuse/warp.hpp"

namespace cofuse {

void ExposureStack::validate() const {
  if (channels.empty()) throw InvalidArgument("ExposureStack: at least one channel required");
  for (const GrayImage& c : channels) {
    if (c.empty() || !c.same_size(channels.front())) {
      throw InvalidArgument("ExposureStack: channels must share dimensions");
    }
  }
  if (!exposure_meta.empty() && exposure_meta.size() != channels.size()) {
    throw InvalidArgument("ExposureStack: exposure metadata count differs from channel count");
  }
}

void SveLayout::validate() const {
  std::array<int, 4> sorted = channel_at;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 4; ++i) {
    if (sorted[i] != i + 1) throw InvalidArgument("SveLayout: channel map is not a permutation of 1..4");
  }
  for (int i = 0; i < 4; ++i) {
    if (!(transmittance[i] > 0.0)) throw InvalidArgument("SveLayout: transmittance must be > 0");
    if (i > 0 && !(transmittance[i] < transmittance[i - 1])) {
      throw InvalidArgument("SveLayout: transmittances must be strictly decreasing");
    }
  }
}

std::array<int, 2> SveLayout::offset_of(int channel) const {
  for (int p = 0; p < 4; ++p) {
    if (channel_at[p] == channel) return {p % 2, p / 2};
  }
  throw InvalidArgument("SveLayout: channel " + std::to_string(channel) + " not in layout");
}

double SveLayout::dynamic_range_extension_db() const {
  return 20.0 * std::log10(transmittance.front() / transmittance.back());
}

ExposureStack decode_mosaic(const GrayImage& raw, const SveLayout& layout, bool upsample) {
  layout.validate();
  if (raw.width() % 2 != 0 || raw.height() % 2 != 0) {
    throw InvalidArgument("decode_mosaic: raw dimensions must be even, got " +
                          std::to_string(raw.width()) + "x" + std::to_string(raw.height()));
  }
  const int hw = raw.width() / 2;
  const int hh = raw.height() / 2;
  ExposureStack stack;
  for (int k = 0; k < 4; ++k) {
    const auto [ox, oy] = layout.offset_of(k + 1);
    GrayImage sub(hw, hh);
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < hw; ++x) sub(x, y) = raw(2 * x + ox, 2 * y + oy);
    }
    if (upsample) {
      // Raw pixel (x, y) sits at sub-grid coordinate ((x - ox) / 2, (y - oy) / 2).
      GrayImage full(raw.width(), raw.height());
      for (int y = 0; y < raw.height(); ++y) {
        for (int x = 0; x < raw.width(); ++x) {
          const double sx = std::clamp((x - ox) / 2.0, 0.0, hw - 1.0);
          const double sy = std::clamp((y - oy) / 2.0, 0.0, hh - 1.0);
          full(x, y) = sample_bilinear(sub, sx, sy);
        }
      }
      sub = std::move(full);
    }
    stack.channels.push_back(std::move(sub));
    stack.exposure_meta.push_back(layout.transmittance[k]);
  }
  return stack;
}

GrayImage assemble_mosaic(const ExposureStack& stack, const SveLayout& layout) {
  layout.validate();
  stack.validate();
  if (stack.size() != 4) throw InvalidArgument("assemble_mosaic: stack must have 4 channels");
  const int hw = stack.width();
  const int hh = stack.height();
  GrayImage raw(2 * hw, 2 * hh);
  for (int k = 0; k < 4; ++k) {
    const auto [ox, oy] = layout.offset_of(k + 1);
    for (int y = 0; y < hh; ++y) {
      for (int x = 0; x < hw; ++x) raw(2 * x + ox, 2 * y + oy) = stack.channels[k](x, y);
    }
  }
  return raw;
}

SveSimulation simulate_sve(const GrayImage& hdr, const SveLayout& layout, double noise_sigma,
                           int quantize_bits, std::uint64_t seed) {
  layout.validate();
  if (quantize_bits != 8 && quantize_bits != 16) {
    throw InvalidArgument("simulate_sve: quantize_bits must be 8 or 16");
  }
  if (!(noise_sigma >= 0.0)) throw InvalidArgument("simulate_sve: noise_sigma must be >= 0");
  for (double v : hdr.pixels()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw InvalidArgument("simulate_sve: radiance must be finite and >= 0");
    }
  }
  const double levels = std::ldexp(1.0, quantize_bits) - 1.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  SveSimulation sim;
  for (int k = 0; k < 4; ++k) {
    GrayImage ch(hdr.width(), hdr.height());
    for (std::size_t i = 0; i < ch.size(); ++i) {
      double v = hdr[i] * layout.transmittance[k];
      if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
      v = std::clamp(v, 0.0, 1.0);
      ch[i] = std::round(v * levels) / levels;
    }
    sim.truth.channels.push_back(std::move(ch));
    sim.truth.exposure_meta.push_back(layout.transmittance[k]);
  }
  GrayImage raw(hdr.width(), hdr.height());
  for (int p = 0; p < 4; ++p) {
    const int dx = p % 2;
    const int dy = p / 2;
    const GrayImage& src = sim.truth.channels[layout.channel_at[p] - 1];
    for (int y = dy; y < hdr.height(); y += 2) {
      for (int x = dx; x < hdr.width(); x += 2) raw(x, y) = src(x, y);
    }
  }
  sim.mosaic = std::move(raw);
  return sim;
}

}  // namespace cofuse
