#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cofuse/config.hpp"
#include "cofuse/descriptor.hpp"
#include "cofuse/features.hpp"
#include "cofuse/ivfuse.hpp"
#include "cofuse/mef.hpp"
#include "cofuse/metrics.hpp"
#include "cofuse/perception.hpp"
#include "cofuse/registration.hpp"
#include "cofuse/warp.hpp"

namespace cofuse {

// ---------------------------------------------------------------------------
// Stage building blocks, shared by the pipeline and the stage subcommands.

struct PerceptionStage {
  PerceptionFeatures features;
  RegionMap regions;
};

PerceptionStage run_perception(const ExposureStack& stack, const PerceptionConfig& config);

struct FeatureStage {
  std::vector<FeatureSet> per_exposure;
  Matrix distribution;  // L, M x K
  ExposureWeightMatrix weights;
  std::vector<unsigned char> exposure_warnings;  // per region
  FeatureSet merged;
};

FeatureStage run_feature_stage(const ExposureStack& stack, const RegionMap& regions, const FeatureConfig& config);

/// Weighted response w_m(k) * S of every feature of one exposure set, in place.
void apply_weights(FeatureSet& set, const ExposureWeightMatrix& weights, const RegionMap& regions);

struct Localization {
  double rmse = 0.0;
  std::size_t matched = 0;
};

/// RMSE from each feature's base position to its nearest ground-truth point,
/// over features with a ground-truth point within `max_distance`.
Localization localization_rmse(const FeatureSet& features, const std::vector<Point2>& truth,
                               double max_distance = 3.0);

struct FeatureReportRow {
  std::string source;  // "exposure k" or "merged"
  std::size_t count = 0;
  double mean_response = 0.0;
  double mean_weighted = 0.0;
  std::optional<Localization> localization;
};

std::vector<FeatureReportRow> feature_report(const FeatureStage& stage, const RegionMap& regions,
                                             const std::vector<Point2>* truth);
std::string feature_report_json(const std::vector<FeatureReportRow>& rows);

struct RegistrationStage {
  FeatureSet visible;  // described merged features
  FeatureSet infrared;  // described IR features
  std::size_t dropped = 0;
  std::vector<MatchPair> matches;  // descriptor matches
  std::vector<MatchPair> guided;   // final geometry-gated matches (empty without guided rounds)
  TransformEstimate estimate;  // maps IR pixels to visible pixels
};

/// Describes merged features on their own exposure channel and IR Harris
/// features on the IR image, matches them and fits the IR -> visible transform.
/// Each guided round re-matches under the current fit and refits.
RegistrationStage run_registration(const ExposureStack& stack, const FeatureSet& merged, const GrayImage& ir,
                                   const FusionConfig& config);

struct IvfStage {
  BackgroundResult background;
  IrSaliency saliency;
  RegionalWeights scores;
  RegionalWeights weights;
  ComplementaryResult fusion;
};

/// Background extraction, saliency, regional weights and complementary fusion.
/// Pixels flagged 0 in `valid` (when given) receive no compensation.
IvfStage run_ivf(const GrayImage& pre, const ExposureStack& stack, const GrayImage& ir_warped,
                 const std::vector<unsigned char>* valid, const RegionMap& regions, const FusionConfig& config);

// ---------------------------------------------------------------------------
// End-to-end run.

struct StageRecord {
  std::string name;
  std::string status;  // ok | skipped | failed
  double seconds = 0.0;
  std::vector<std::string> outputs;
  std::string detail;
};

struct PipelineTrace {
  std::vector<StageRecord> stages;
  std::vector<double> admm_objective;
  std::vector<FeatureReportRow> features;
  std::map<std::string, std::string> decisions;
};

struct PipelineOptions {
  bool use_ir = true;
  bool single_exposure = false;
  bool entropy_order = false;
  bool dump_intermediates = false;
  std::optional<std::uint64_t> seed;  // overrides registration.seed
};

struct PipelineInputs {
  ExposureStack stack;             // SVE mode
  std::optional<ColorImage> color; // single-exposure mode (stack derived from it)
  std::optional<GrayImage> gray;   // single-exposure gray input
  std::optional<GrayImage> ir;
};

struct PipelineResult {
  PipelineTrace trace;
  ExposureStack stack;
  RegionMap regions;
  GrayImage pre;  // MEF output I_pre (luminance)
  GrayImage out;  // I_out (luminance); equals pre without IR
  std::optional<ColorImage> pre_color;
  std::optional<ColorImage> out_color;
  Transform2D ir_to_vis;
  std::optional<MetricReport> metrics;
  std::optional<IvfStage> ivf;
  PerceptionStage perception;
  FeatureStage features;
  std::optional<RegistrationStage> registration;
  std::optional<WarpResult> ir_warped;
  MefResult mef;
};

/// Runs every stage in memory. Stage failures are rethrown with the stage name prepended.
PipelineResult run_fusion(const PipelineInputs& inputs, const FusionConfig& config, const PipelineOptions& options);

/// Loads the inputs named in config.io, runs the pipeline and writes
/// i_pre.png, i_out.png, labels.png, transform.json, report.json,
/// feature_report.json and manifest.json to config.io.out_dir. The manifest is
/// written even when a stage fails.
PipelineTrace run_pipeline(const FusionConfig& config, const PipelineOptions& options);

/// Loads the visible stack named in config.io (mosaic or channel files).
ExposureStack load_stack(const IoConfig& io, const SveLayout& layout);

/// Labels as raw 8-bit codes (label m stored as m / 255).
GrayImage labels_image(const RegionMap& regions);
RegionMap labels_from_image(const GrayImage& img);

std::string transform_json(const Transform2D& t, std::size_t inliers, std::size_t matches, std::size_t guided = 0);

}  // namespace cofuse
