#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cofuse/descriptor.hpp"
#include "cofuse/features.hpp"
#include "cofuse/ivfuse.hpp"
#include "cofuse/mef.hpp"
#include "cofuse/perception.hpp"
#include "cofuse/pseudoexp.hpp"
#include "cofuse/registration.hpp"
#include "cofuse/sve.hpp"

namespace cofuse {

struct PerceptionConfig {
  PerceptionWeights weights;
  int regions = 4;
  int cf_radius = 7;
  bool refine = true;
  EmParams em;
};

struct FeatureConfig {
  HarrisParams harris;
  double transfer_sigma = 1.0;
  TransferMode transfer_mode = TransferMode::literal;
  DescriptorParams descriptor;
  double ratio = 0.8;
  int guided_rounds = 2;  // geometry-gated re-matching passes after the first fit
};

struct PseudoExpConfig {
  GammaSelection selection;
  double alpha = 1.0;
  bool adaptive = false;  // false: evenly spaced over [lo, hi]
};

struct IoConfig {
  std::filesystem::path mosaic;                 // raw SVE frame
  std::vector<std::filesystem::path> channels;  // or pre-split channels, brightest first
  std::filesystem::path image;                  // single-exposure input
  std::filesystem::path ir;
  std::filesystem::path out_dir = "out";
  bool upsample = true;
  int bit_depth = 8;
};

struct FusionConfig {
  PerceptionConfig perception;
  FeatureConfig features;
  RansacParams registration;
  MefParams mef;
  AdmmParams admm;
  SsimParams ssim;
  ComplementaryParams fusion;
  PseudoExpConfig pseudoexp;
  int metric_bins = 256;
  SveLayout sve;
  IoConfig io;
};

/// Parses the sectioned key = value format (TOML subset: [section], numbers,
/// booleans, "strings", flat arrays, # comments). Missing keys keep their
/// defaults; unknown keys and out-of-range values raise ConfigError naming the key.
/// Perception weights are normalized to unit sum.
FusionConfig parse_config(const std::string& text);

/// Reads and parses a config file; relative paths in [io] resolve against the file's directory
/// and every named input file must exist.
FusionConfig validate_config(const std::filesystem::path& path);

/// Range checks shared by the parser and programmatic callers.
void check_config(const FusionConfig& config);

/// Serializes every key with its current value in the parse_config format.
std::string dump_config(const FusionConfig& config);

}  // namespace cofuse
