#include "cofuse/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "cofuse/error.hpp"
#include "cofuse/io.hpp"
#include "cofuse/pseudoexp.hpp"

namespace cofuse {

using nlohmann::ordered_json;

PerceptionStage run_perception(const ExposureStack& stack, const PerceptionConfig& config) {
  PerceptionStage s;
  s.features = compute_perception(stack, config.weights, config.cf_radius);
  s.regions = segment_regions(s.features.f, config.regions, config.refine, config.em);
  return s;
}

void apply_weights(FeatureSet& set, const ExposureWeightMatrix& weights, const RegionMap& regions) {
  for (Feature& f : set.features) {
    f.weighted = weights.w(region_of(f, regions) - 1, f.exposure - 1) * f.response;
  }
}

FeatureStage run_feature_stage(const ExposureStack& stack, const RegionMap& regions, const FeatureConfig& config) {
  stack.validate();
  const int k_count = stack.size();
  FeatureStage s;
  for (int k = 0; k < k_count; ++k) s.per_exposure.push_back(detect_harris(stack.channels[k], config.harris, k + 1));
  s.distribution = feature_distribution(s.per_exposure, regions);
  const Matrix counts = feature_counts(s.per_exposure, regions);

  std::vector<double> sums(static_cast<std::size_t>(regions.regions) * k_count, 0.0);
  std::vector<double> pixels(regions.regions, 0.0);
  for (std::size_t i = 0; i < regions.labels.size(); ++i) {
    const int m = regions.labels[i] - 1;
    pixels[m] += 1.0;
    for (int k = 0; k < k_count; ++k) sums[static_cast<std::size_t>(m) * k_count + k] += stack.channels[k][i];
  }
  std::vector<double> i_opt(regions.regions, 1.0);
  s.exposure_warnings.assign(regions.regions, 0);
  for (int m = 0; m < regions.regions; ++m) {
    if (k_count < 2) continue;
    std::vector<double> c(k_count), b(k_count);
    for (int k = 0; k < k_count; ++k) {
      c[k] = counts(m, k);
      b[k] = pixels[m] > 0 ? sums[static_cast<std::size_t>(m) * k_count + k] / pixels[m] : 0.0;
    }
    const OptimalExposure opt = optimal_exposure(c, b);
    i_opt[m] = opt.index;
    s.exposure_warnings[m] = opt.warning ? 1 : 0;
  }
  s.weights = adaptive_weights(s.distribution, i_opt, config.transfer_sigma, config.transfer_mode);
  s.merged = merge_features(s.per_exposure, s.weights, regions);
  for (FeatureSet& set : s.per_exposure) apply_weights(set, s.weights, regions);
  return s;
}

Localization localization_rmse(const FeatureSet& features, const std::vector<Point2>& truth, double max_distance) {
  Localization loc;
  double sum = 0.0;
  for (const Feature& f : features.features) {
    const Point2 p = f.base();
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& t : truth) best = std::min(best, (p.x - t.x) * (p.x - t.x) + (p.y - t.y) * (p.y - t.y));
    if (best <= max_distance * max_distance) {
      sum += best;
      ++loc.matched;
    }
  }
  loc.rmse = loc.matched > 0 ? std::sqrt(sum / static_cast<double>(loc.matched)) : 0.0;
  return loc;
}

namespace {

FeatureReportRow report_row(const std::string& name, const FeatureSet& set, const std::vector<Point2>* truth) {
  FeatureReportRow r;
  r.source = name;
  r.count = set.size();
  for (const Feature& f : set.features) {
    r.mean_response += f.response;
    r.mean_weighted += f.weighted;
  }
  if (r.count > 0) {
    r.mean_response /= static_cast<double>(r.count);
    r.mean_weighted /= static_cast<double>(r.count);
  }
  if (truth != nullptr) r.localization = localization_rmse(set, *truth);
  return r;
}

}  // namespace

std::vector<FeatureReportRow> feature_report(const FeatureStage& stage, const RegionMap& regions,
                                             const std::vector<Point2>* truth) {
  (void)regions;
  std::vector<FeatureReportRow> rows;
  for (std::size_t k = 0; k < stage.per_exposure.size(); ++k) {
    rows.push_back(report_row("exposure " + std::to_string(k + 1), stage.per_exposure[k], truth));
  }
  rows.push_back(report_row("merged", stage.merged, truth));
  return rows;
}

namespace {

ordered_json rows_json(const std::vector<FeatureReportRow>& rows) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    ordered_json j;
    j["source"] = r.source;
    j["count"] = r.count;
    j["mean_response"] = r.mean_response;
    j["mean_weighted_response"] = r.mean_weighted;
    if (r.localization) {
      j["localization_rmse"] = r.localization->rmse;
      j["localized"] = r.localization->matched;
    }
    arr.push_back(j);
  }
  return arr;
}

}  // namespace

std::string feature_report_json(const std::vector<FeatureReportRow>& rows) {
  ordered_json j;
  j["features"] = rows_json(rows);
  return j.dump(2);
}

RegistrationStage run_registration(const ExposureStack& stack, const FeatureSet& merged, const GrayImage& ir,
                                   const FusionConfig& config) {
  RegistrationStage s;
  s.visible.width = merged.width;
  s.visible.height = merged.height;
  for (int k = 1; k <= stack.size(); ++k) {
    FeatureSet group;
    group.width = merged.width;
    group.height = merged.height;
    for (const Feature& f : merged.features) {
      if (f.exposure == k) group.features.push_back(f);
    }
    if (group.empty()) continue;
    DescribeResult d = describe(stack.channels[k - 1], group, config.features.descriptor);
    s.dropped += d.dropped;
    for (Feature& f : d.described.features) s.visible.features.push_back(std::move(f));
  }
  const FeatureSet ir_raw = detect_harris(ir, config.features.harris, 1);
  DescribeResult d_ir = describe(ir, ir_raw, config.features.descriptor);
  s.dropped += d_ir.dropped;
  s.infrared = std::move(d_ir.described);

  s.matches = match(s.visible, s.infrared, config.features.ratio);
  const std::size_t needed = config.registration.model == TransformModel::homography ? 4 : 3;
  if (s.matches.size() < needed) {
    throw NumericError("registration: only " + std::to_string(s.matches.size()) +
                       " descriptor matches between visible and IR features");
  }
  std::vector<PointPair> pairs;
  pairs.reserve(s.matches.size());
  for (const MatchPair& m : s.matches) {
    pairs.push_back({s.infrared.features[m.b].base(), s.visible.features[m.a].base()});
  }
  s.estimate = estimate_transform(pairs, config.registration);
  for (int round = 0; round < config.features.guided_rounds; ++round) {
    std::vector<MatchPair> guided =
        guided_match(s.visible, s.infrared, s.estimate.transform, config.registration.inlier_px);
    if (guided.size() < std::max(needed, s.estimate.inlier_count)) break;
    pairs.clear();
    for (const MatchPair& m : guided) {
      pairs.push_back({s.infrared.features[m.b].base(), s.visible.features[m.a].base()});
    }
    s.estimate = estimate_transform(pairs, config.registration);
    s.guided = std::move(guided);
  }
  return s;
}

IvfStage run_ivf(const GrayImage& pre, const ExposureStack& stack, const GrayImage& ir_warped,
                 const std::vector<unsigned char>* valid, const RegionMap& regions, const FusionConfig& config) {
  IvfStage s;
  s.background = extract_background(ir_warped, config.admm);
  s.saliency = ir_saliency(ir_warped, s.background.background);
  s.scores = regional_ssim(pre, ir_warped, regions, config.ssim);
  s.weights = fusion_weights(s.scores);
  if (valid != nullptr) {
    for (std::size_t i = 0; i < valid->size(); ++i) {
      if ((*valid)[i] == 0) {
        s.saliency.zeta[i] = 0.0;
        s.weights.map[i] = 0.0;
      }
    }
  }
  s.fusion = complementary_fuse(pre, stack, ir_warped, s.saliency, s.weights, config.fusion);
  return s;
}

GrayImage labels_image(const RegionMap& regions) {
  if (regions.regions > 255) throw InvalidArgument("labels_image: more than 255 regions");
  GrayImage img(regions.width, regions.height);
  for (std::size_t i = 0; i < regions.labels.size(); ++i) img[i] = regions.labels[i] / 255.0;
  return img;
}

RegionMap labels_from_image(const GrayImage& img) {
  RegionMap r;
  r.width = img.width();
  r.height = img.height();
  r.labels.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const long v = std::lround(img[i] * 255.0);
    if (v < 1) throw IoError("label image contains label 0; labels start at 1");
    r.labels[i] = static_cast<int>(v);
    r.regions = std::max(r.regions, r.labels[i]);
  }
  r.stats.assign(r.regions, RegionStat{});
  for (int l : r.labels) ++r.stats[l - 1].count;
  return r;
}

std::string transform_json(const Transform2D& t, std::size_t inliers, std::size_t matches, std::size_t guided) {
  ordered_json j;
  j["maps"] = "ir_to_visible";
  j["matrix"] = t.matrix();
  j["inliers"] = inliers;
  j["matches"] = matches;
  j["guided_matches"] = guided;
  return j.dump(2);
}

ExposureStack load_stack(const IoConfig& io, const SveLayout& layout) {
  ExposureStack stack;
  if (!io.mosaic.empty()) {
    stack = decode_mosaic(load_gray(io.mosaic), layout, io.upsample);
  } else if (!io.channels.empty()) {
    for (const auto& p : io.channels) stack.channels.push_back(load_gray(p));
    if (stack.channels.size() == 4) {
      stack.exposure_meta.assign(layout.transmittance.begin(), layout.transmittance.end());
    }
  } else {
    throw ConfigError("config key 'io.mosaic': a mosaic or io.channels is required");
  }
  stack.validate();
  return stack;
}

namespace {

using Clock = std::chrono::steady_clock;

[[noreturn]] void rethrow_with_stage(const std::string& stage) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + stage + "': " + e.what());
  } catch (const IoError& e) {
    throw IoError("stage '" + stage + "': " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("stage '" + stage + "': " + e.what());
  } catch (const NumericError& e) {
    throw NumericError("stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    throw NumericError("stage '" + stage + "': " + e.what());
  }
}

template <class F>
void stage(PipelineTrace& trace, const std::string& name, F&& body) {
  StageRecord rec;
  rec.name = name;
  const auto t0 = Clock::now();
  try {
    rec.detail = body();
    rec.status = "ok";
  } catch (...) {
    rec.status = "failed";
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    try {
      throw;
    } catch (const std::exception& e) {
      rec.detail = e.what();
    }
    trace.stages.push_back(rec);
    rethrow_with_stage(name);
  }
  rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  trace.stages.push_back(rec);
}

void skip(PipelineTrace& trace, const std::string& name, const std::string& why) {
  trace.stages.push_back({name, "skipped", 0.0, {}, why});
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void run_fusion_into(const PipelineInputs& in, const FusionConfig& config, const PipelineOptions& opt,
                     PipelineResult& r) {
  PipelineTrace& trace = r.trace;
  FusionConfig cfg = config;
  if (opt.seed) cfg.registration.seed = *opt.seed;
  std::optional<GrayImage> ir = opt.use_ir ? in.ir : std::nullopt;
  std::optional<ColorImage> color = in.color;

  stage(trace, "decode/pseudoexp", [&]() -> std::string {
    if (!opt.single_exposure) {
      if (opt.entropy_order) trace.decisions["ordering"] = "not applicable to a multi-exposure stack";
      r.stack = in.stack;
      r.stack.validate();
      return "multi-exposure stack, K = " + std::to_string(r.stack.size());
    }
    GrayImage y;
    if (color) y = luminance(*color);
    else if (in.gray) y = *in.gray;
    else throw InvalidArgument("single-exposure mode needs an input image");
    if (opt.entropy_order && in.ir) {
      const double e_vis = entropy_bits(y);
      const double e_ir = entropy_bits(*in.ir);
      trace.decisions["entropy_first"] = fixed(e_vis);
      trace.decisions["entropy_second"] = fixed(e_ir);
      if (e_ir > e_vis) {
        trace.decisions["base"] = "second";
        if (ir) std::swap(y, *ir);
        else y = *in.ir;
        color.reset();
      } else {
        trace.decisions["base"] = "first";
      }
    }
    GammaSpec spec;
    if (cfg.pseudoexp.adaptive) {
      spec = select_gammas(y, cfg.pseudoexp.selection);
    } else {
      const auto& s = cfg.pseudoexp.selection;
      spec.gammas.clear();
      for (int i = 0; i < s.count; ++i) {
        spec.gammas.push_back(s.count == 1 ? s.lo : s.lo + (s.hi - s.lo) * i / (s.count - 1));
      }
    }
    spec.alpha = cfg.pseudoexp.alpha;
    r.stack = gamma_stack(y, spec);
    std::string g;
    for (double v : spec.gammas) g += (g.empty() ? "" : ", ") + fixed(v);
    trace.decisions["gammas"] = "[" + g + "]";
    return "pseudo-exposure stack, gammas [" + g + "]";
  });

  stage(trace, "perception", [&]() -> std::string {
    r.perception = run_perception(r.stack, cfg.perception);
    r.regions = r.perception.regions;
    return std::to_string(r.regions.regions) + " regions" + (r.regions.refined ? ", EM refined" : "");
  });

  stage(trace, "feature_merge", [&]() -> std::string {
    r.features = run_feature_stage(r.stack, r.regions, cfg.features);
    r.trace.features = feature_report(r.features, r.regions, nullptr);
    return std::to_string(r.features.merged.size()) + " merged features";
  });

  if (ir) {
    stage(trace, "registration", [&]() -> std::string {
      r.registration = run_registration(r.stack, r.features.merged, *ir, cfg);
      r.ir_to_vis = r.registration->estimate.transform;
      const auto& g = *r.registration;
      return std::to_string(g.matches.size()) + " descriptor matches, " + std::to_string(g.guided.size()) +
             " guided, " + std::to_string(g.estimate.inlier_count) + " inliers";
    });
    stage(trace, "warp_ir", [&]() -> std::string {
      r.ir_warped = warp_image(*ir, r.ir_to_vis, r.stack.width(), r.stack.height());
      const auto valid = std::count(r.ir_warped->valid.begin(), r.ir_warped->valid.end(), 1);
      return std::to_string(valid) + " valid pixels";
    });
  } else {
    const std::string why = opt.use_ir ? "no IR input" : "IR disabled";
    skip(trace, "registration", why);
    skip(trace, "warp_ir", why);
  }

  stage(trace, "mef", [&]() -> std::string {
    r.mef = fuse_exposures(r.stack, r.regions, cfg.mef);
    r.pre = r.mef.fused;
    return "I_pre mean " + fixed(mean(r.pre));
  });

  if (r.ir_warped) {
    stage(trace, "ivf", [&]() -> std::string {
      r.ivf = run_ivf(r.pre, r.stack, r.ir_warped->image, &r.ir_warped->valid, r.regions, cfg);
      r.out = r.ivf->fusion.fused;
      trace.admm_objective = r.ivf->background.objective;
      return "eta " + fixed(r.ivf->fusion.eta) + ", ADMM iterations " + std::to_string(r.ivf->background.iterations);
    });
  } else {
    r.out = r.pre;
    skip(trace, "ivf", opt.use_ir ? "no IR input" : "IR disabled");
  }

  if (color) {
    r.pre_color = recombine_color(r.pre, *color);
    r.out_color = recombine_color(r.out, *color);
  }

  stage(trace, "metrics", [&]() -> std::string {
    const GrayImage& b = r.ir_warped ? r.ir_warped->image : r.pre;
    r.metrics = evaluate(r.out, r.pre, b, &r.stack, cfg.metric_bins);
    r.metrics->inputs = {"i_pre", r.ir_warped ? "ir_warped" : "i_pre"};
    return "AG " + fixed(r.metrics->ag);
  });
}

ordered_json manifest_json(const PipelineTrace& t, const PipelineResult& r, const FusionConfig& cfg,
                           const PipelineOptions& opt) {
  ordered_json j;
  ordered_json stages = ordered_json::array();
  for (const auto& s : t.stages) {
    stages.push_back({{"name", s.name}, {"status", s.status}, {"seconds", s.seconds},
                      {"outputs", s.outputs}, {"detail", s.detail}});
  }
  j["stages"] = stages;
  j["decisions"] = t.decisions;
  j["seed"] = opt.seed ? *opt.seed : cfg.registration.seed;
  j["options"] = {{"use_ir", opt.use_ir}, {"single_exposure", opt.single_exposure},
                  {"entropy_order", opt.entropy_order}, {"dump_intermediates", opt.dump_intermediates}};
  if (r.ivf) {
    j["admm"] = {{"iterations", r.ivf->background.iterations}, {"converged", r.ivf->background.converged},
                 {"objective", t.admm_objective}};
  }
  j["features"] = rows_json(t.features);
  return j;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text << "\n";
  if (!out) throw IoError("write failed: " + p.string());
}

GrayImage mask_image(const std::vector<unsigned char>& mask, int w, int h) {
  GrayImage img(w, h);
  for (std::size_t i = 0; i < mask.size(); ++i) img[i] = mask[i] ? 1.0 : 0.0;
  return img;
}

// Writes every artifact that exists; returns the written file names.
std::vector<std::string> write_outputs(const PipelineResult& r, const FusionConfig& cfg, const PipelineOptions& opt) {
  const auto& dir = cfg.io.out_dir;
  std::vector<std::string> files;
  auto save = [&](const GrayImage& img, const std::string& name, int depth) {
    save_image(img, dir / name, depth);
    files.push_back(name);
  };
  const int depth = cfg.io.bit_depth;
  if (!r.pre.empty()) {
    if (r.pre_color) {
      save_image(*r.pre_color, dir / "i_pre.png", depth);
      files.push_back("i_pre.png");
    } else {
      save(r.pre, "i_pre.png", depth);
    }
  }
  if (!r.out.empty()) {
    if (r.out_color) {
      save_image(*r.out_color, dir / "i_out.png", depth);
      files.push_back("i_out.png");
    } else {
      save(r.out, "i_out.png", depth);
    }
  }
  if (!r.regions.labels.empty()) save(labels_image(r.regions), "labels.png", 8);
  if (r.registration) {
    write_text(dir / "transform.json",
               transform_json(r.ir_to_vis, r.registration->estimate.inlier_count, r.registration->matches.size(),
                              r.registration->guided.size()));
    files.push_back("transform.json");
  }
  if (r.metrics) {
    write_text(dir / "report.json", r.metrics->to_json());
    files.push_back("report.json");
  }
  if (!r.trace.features.empty()) {
    write_text(dir / "feature_report.json", feature_report_json(r.trace.features));
    files.push_back("feature_report.json");
  }
  if (!opt.dump_intermediates) return files;

  for (int k = 0; k < r.stack.size(); ++k) save(r.stack.channels[k], "channel_" + std::to_string(k + 1) + ".png", 16);
  if (!r.perception.features.f.empty()) {
    const auto& pf = r.perception.features;
    save(pf.f, "perception_f.png", 16);
    save(normalize_min_max(pf.bi), "perception_bi.png", 16);
    save(normalize_min_max(pf.wc), "perception_wc.png", 16);
    save(normalize_min_max(pf.cf), "perception_cf.png", 16);
    save(normalize_min_max(pf.v), "perception_v.png", 16);
  }
  if (r.ir_warped) {
    save(r.ir_warped->image, "ir_warped.png", 16);
    save(mask_image(r.ir_warped->valid, r.stack.width(), r.stack.height()), "ir_valid.png", 8);
  }
  if (r.ivf) {
    save(r.ivf->background.background, "ir_background.png", 16);
    save(r.ivf->saliency.zeta, "zeta.png", 16);
    save(r.ivf->fusion.zeta_fused, "zeta_fused.png", 16);
    save(r.ivf->weights.map, "fusion_weights.png", 16);
    save(r.ivf->fusion.compensation, "compensation.png", 16);
    std::ostringstream csv;
    csv << "iteration,objective\n";
    csv.precision(17);
    for (std::size_t i = 0; i < r.ivf->background.objective.size(); ++i) {
      csv << i << "," << r.ivf->background.objective[i] << "\n";
    }
    write_text(dir / "admm_trace.csv", csv.str());
    files.push_back("admm_trace.csv");
  }
  return files;
}

}  // namespace

PipelineResult run_fusion(const PipelineInputs& inputs, const FusionConfig& config, const PipelineOptions& options) {
  PipelineResult r;
  run_fusion_into(inputs, config, options, r);
  return r;
}

PipelineTrace run_pipeline(const FusionConfig& config, const PipelineOptions& options) {
  PipelineInputs in;
  if (options.single_exposure) {
    if (config.io.image.empty()) throw ConfigError("config key 'io.image': required in single-exposure mode");
    AnyImage img = load_image(config.io.image);
    if (auto* c = std::get_if<ColorImage>(&img)) in.color = *c;
    else in.gray = std::get<GrayImage>(img);
  } else {
    in.stack = load_stack(config.io, config.sve);
  }
  if (options.use_ir) {
    if (config.io.ir.empty()) throw ConfigError("config key 'io.ir': required unless IR is disabled");
    in.ir = load_gray(config.io.ir);
  }
  std::error_code ec;
  std::filesystem::create_directories(config.io.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + config.io.out_dir.string() + ": " + ec.message());

  PipelineResult r;
  auto finish = [&] {
    const auto files = write_outputs(r, config, options);
    ordered_json m = manifest_json(r.trace, r, config, options);
    m["outputs"] = files;
    write_text(config.io.out_dir / "manifest.json", m.dump(2));
  };
  try {
    run_fusion_into(in, config, options, r);
  } catch (...) {
    try {
      finish();
    } catch (...) {
    }
    throw;
  }
  finish();
  return r.trace;
}

}  // namespace cofuse
