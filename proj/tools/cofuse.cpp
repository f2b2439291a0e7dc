#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cofuse/config.hpp"
#include "cofuse/error.hpp"
#include "cofuse/io.hpp"
#include "cofuse/pipeline.hpp"
#include "cofuse/synth.hpp"

namespace fs = std::filesystem;
using namespace cofuse;
using json = nlohmann::ordered_json;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kNumeric = 4 };

struct Globals {
  std::string config;
  std::string out_dir;
  bool dump = false;
  std::optional<std::uint64_t> seed;
  bool single_exposure = false;
  bool no_ir = false;
};

struct Inputs {
  std::string mosaic;
  std::vector<std::string> channels;
  std::string image;
  std::string ir;
};

FusionConfig load_config(const Globals& g, const Inputs& in) {
  FusionConfig cfg = g.config.empty() ? FusionConfig{} : validate_config(g.config);
  if (!in.mosaic.empty()) {
    cfg.io.mosaic = in.mosaic;
    cfg.io.channels.clear();
  }
  if (!in.channels.empty()) {
    cfg.io.channels.assign(in.channels.begin(), in.channels.end());
    cfg.io.mosaic.clear();
  }
  if (!in.image.empty()) cfg.io.image = in.image;
  if (!in.ir.empty()) cfg.io.ir = in.ir;
  if (!g.out_dir.empty()) cfg.io.out_dir = g.out_dir;
  if (g.seed) cfg.registration.seed = *g.seed;
  return cfg;
}

fs::path prepare_out(const FusionConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.io.out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.io.out_dir.string() + ": " + ec.message());
  return cfg.io.out_dir;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << text << "\n";
  if (!out) throw IoError("write failed: " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError("cannot read " + p.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

std::vector<Point2> read_corners(const fs::path& p) {
  const json j = read_json(p);
  if (!j.contains("corners") || !j["corners"].is_array()) throw IoError(p.string() + ": missing \"corners\" array");
  std::vector<Point2> pts;
  for (const auto& c : j["corners"]) pts.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  return pts;
}

json matrix_json(const Transform2D& t) { return t.matrix(); }

void add_input_options(CLI::App* cmd, Inputs& in, bool with_ir) {
  cmd->add_option("--mosaic", in.mosaic, "Raw SVE mosaic");
  cmd->add_option("--channels", in.channels, "Pre-split exposure channels, brightest first");
  if (with_ir) cmd->add_option("--ir", in.ir, "Infrared image");
}

// Channel with the highest histogram entropy, used as the visible backdrop of matches.png.
int display_channel(const ExposureStack& stack) {
  int best = 0;
  double best_h = -1.0;
  for (int k = 0; k < stack.size(); ++k) {
    const double h = entropy_bits(stack.channels[k]);
    if (h > best_h) {
      best_h = h;
      best = k;
    }
  }
  return best;
}

void draw_line(ColorImage& img, Point2 a, Point2 b, double r, double g, double bl) {
  const int steps = static_cast<int>(std::ceil(std::max(std::abs(b.x - a.x), std::abs(b.y - a.y)))) + 1;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(a.x + t * (b.x - a.x)));
    const int y = static_cast<int>(std::lround(a.y + t * (b.y - a.y)));
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) continue;
    img.r(x, y) = r;
    img.g(x, y) = g;
    img.b(x, y) = bl;
  }
}

ColorImage matches_image(const GrayImage& vis, const GrayImage& ir, const RegistrationStage& reg) {
  const int w = vis.width() + ir.width();
  const int h = std::max(vis.height(), ir.height());
  GrayImage canvas(w, h, 0.0);
  for (int y = 0; y < vis.height(); ++y)
    for (int x = 0; x < vis.width(); ++x) canvas(x, y) = vis(x, y);
  for (int y = 0; y < ir.height(); ++y)
    for (int x = 0; x < ir.width(); ++x) canvas(vis.width() + x, y) = ir(x, y);
  ColorImage out(canvas, canvas, canvas);
  const bool guided = !reg.guided.empty();
  const auto& pairs = guided ? reg.guided : reg.matches;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Point2 a = reg.visible.features[pairs[i].a].base();
    Point2 b = reg.infrared.features[pairs[i].b].base();
    b.x += vis.width();
    const bool inlier = i < reg.estimate.inliers.size() && reg.estimate.inliers[i];
    if (inlier) draw_line(out, a, b, 0.0, 1.0, 0.0);
    else draw_line(out, a, b, 1.0, 0.0, 0.0);
  }
  return out;
}

int cmd_simulate(const Globals& g, int size, double rotation, double tx, double ty, double projective,
                 double noise, int bits, int hot_spots) {
  FusionConfig cfg;
  if (!g.out_dir.empty()) cfg.io.out_dir = g.out_dir;
  const fs::path dir = prepare_out(cfg);
  SceneParams sp;
  sp.width = size;
  sp.height = size;
  sp.seed = g.seed.value_or(0);
  sp.rotation_deg = rotation;
  sp.tx = tx;
  sp.ty = ty;
  sp.projective = projective;
  sp.hot_spots = hot_spots;
  const SyntheticScene scene = make_scene(sp);
  const SveSimulation sim = simulate_sve(scene.hdr, cfg.sve, noise, bits, sp.seed);
  save_image(sim.mosaic, dir / "mosaic.png", 16);
  save_image(scene.ir, dir / "ir.png", 16);
  save_image(scene.ir_aligned, dir / "ir_aligned.png", 16);
  save_image(scene.hot_mask, dir / "hot_mask.png", 8);
  for (int k = 0; k < sim.truth.size(); ++k) {
    save_image(sim.truth.channels[k], dir / ("truth_channel_" + std::to_string(k + 1) + ".png"), 16);
  }
  json truth;
  truth["ir_to_vis"] = matrix_json(scene.ir_to_vis);
  json corners = json::array();
  for (const Point2& p : scene.corners) corners.push_back({p.x, p.y});
  truth["corners"] = corners;
  truth["seed"] = sp.seed;
  truth["transmittance"] = cfg.sve.transmittance;
  truth["noise_sigma"] = noise;
  truth["quantize_bits"] = bits;
  write_text(dir / "truth.json", truth.dump(2));

  FusionConfig run_cfg;
  run_cfg.io.mosaic = "mosaic.png";
  run_cfg.io.ir = "ir.png";
  run_cfg.io.out_dir = "run";
  write_text(dir / "scene.toml", dump_config(run_cfg));
  std::cout << "wrote scene " << size << "x" << size << " to " << dir.string() << "\n";
  return kOk;
}

int cmd_decode(const Globals& g, const Inputs& in, bool no_upsample) {
  FusionConfig cfg = load_config(g, in);
  if (no_upsample) cfg.io.upsample = false;
  if (cfg.io.mosaic.empty()) throw ConfigError("config key 'io.mosaic': decode-sve needs a mosaic");
  const fs::path dir = prepare_out(cfg);
  const ExposureStack stack = load_stack(cfg.io, cfg.sve);
  for (int k = 0; k < stack.size(); ++k) {
    save_image(stack.channels[k], dir / ("channel_" + std::to_string(k + 1) + ".png"), 16);
  }
  std::cout << "decoded " << stack.size() << " channels of " << stack.width() << "x" << stack.height() << "\n";
  return kOk;
}

int cmd_perceive(const Globals& g, const Inputs& in) {
  const FusionConfig cfg = load_config(g, in);
  const fs::path dir = prepare_out(cfg);
  const ExposureStack stack = load_stack(cfg.io, cfg.sve);
  const PerceptionStage p = run_perception(stack, cfg.perception);
  save_image(p.features.f, dir / "perception_f.png", 16);
  save_image(normalize_min_max(p.features.bi), dir / "perception_bi.png", 16);
  save_image(normalize_min_max(p.features.wc), dir / "perception_wc.png", 16);
  save_image(normalize_min_max(p.features.cf), dir / "perception_cf.png", 16);
  save_image(normalize_min_max(p.features.v), dir / "perception_v.png", 16);
  save_image(labels_image(p.regions), dir / "labels.png", 8);
  json j;
  j["regions"] = p.regions.regions;
  j["refined"] = p.regions.refined;
  json stats = json::array();
  for (const RegionStat& s : p.regions.stats) stats.push_back({{"count", s.count}, {"mean_f", s.mean_f}});
  j["stats"] = stats;
  j["log_likelihood"] = p.regions.log_likelihood;
  write_text(dir / "regions.json", j.dump(2));
  std::cout << p.regions.regions << " regions\n";
  return kOk;
}

int cmd_register(const Globals& g, const Inputs& in, const std::string& corners) {
  const FusionConfig cfg = load_config(g, in);
  if (cfg.io.ir.empty()) throw ConfigError("config key 'io.ir': register needs an IR image");
  const fs::path dir = prepare_out(cfg);
  const ExposureStack stack = load_stack(cfg.io, cfg.sve);
  const GrayImage ir = load_gray(cfg.io.ir);
  const PerceptionStage p = run_perception(stack, cfg.perception);
  const FeatureStage f = run_feature_stage(stack, p.regions, cfg.features);

  std::vector<Point2> truth;
  if (!corners.empty()) truth = read_corners(corners);
  const auto rows = feature_report(f, p.regions, corners.empty() ? nullptr : &truth);
  write_text(dir / "feature_report.json", feature_report_json(rows));

  const RegistrationStage reg = run_registration(stack, f.merged, ir, cfg);
  write_text(dir / "transform.json",
             transform_json(reg.estimate.transform, reg.estimate.inlier_count, reg.matches.size(), reg.guided.size()));
  const WarpResult warped = warp_image(ir, reg.estimate.transform, stack.width(), stack.height());
  save_image(warped.image, dir / "ir_warped.png", 16);
  GrayImage valid(stack.width(), stack.height());
  for (std::size_t i = 0; i < warped.valid.size(); ++i) valid[i] = warped.valid[i] ? 1.0 : 0.0;
  save_image(valid, dir / "ir_valid.png", 8);
  save_image(matches_image(stack.channels[display_channel(stack)], ir, reg), dir / "matches.png", 8);
  std::cout << reg.matches.size() << " descriptor matches, " << reg.guided.size() << " guided, "
            << reg.estimate.inlier_count << " inliers\n";
  return kOk;
}

int cmd_fuse_mef(const Globals& g, const Inputs& in, const std::string& labels) {
  const FusionConfig cfg = load_config(g, in);
  const fs::path dir = prepare_out(cfg);
  const ExposureStack stack = load_stack(cfg.io, cfg.sve);
  const RegionMap regions =
      labels.empty() ? run_perception(stack, cfg.perception).regions : labels_from_image(load_gray(labels));
  const MefResult r = fuse_exposures(stack, regions, cfg.mef);
  save_image(r.fused, dir / "i_pre.png", cfg.io.bit_depth);
  if (g.dump) {
    for (int k = 0; k < r.w_illum.size(); ++k) {
      save_image(r.w_illum.maps[k], dir / ("w_illum_" + std::to_string(k + 1) + ".png"), 16);
      save_image(r.w_refl.maps[k], dir / ("w_refl_" + std::to_string(k + 1) + ".png"), 16);
    }
  }
  std::cout << "I_pre mean " << mean(r.fused) << "\n";
  return kOk;
}

int cmd_fuse_ivf(const Globals& g, const Inputs& in, const std::string& pre_path, const std::string& labels,
                 const std::string& valid_path) {
  const FusionConfig cfg = load_config(g, in);
  if (cfg.io.ir.empty()) throw ConfigError("config key 'io.ir': fuse-ivf needs the warped IR image");
  const fs::path dir = prepare_out(cfg);
  const ExposureStack stack = load_stack(cfg.io, cfg.sve);
  const GrayImage ir = load_gray(cfg.io.ir);
  const GrayImage pre = load_gray(pre_path);
  const RegionMap regions =
      labels.empty() ? run_perception(stack, cfg.perception).regions : labels_from_image(load_gray(labels));
  std::vector<unsigned char> valid;
  if (!valid_path.empty()) {
    const GrayImage v = load_gray(valid_path);
    valid.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) valid[i] = v[i] > 0.5 ? 1 : 0;
  }
  const IvfStage s = run_ivf(pre, stack, ir, valid.empty() ? nullptr : &valid, regions, cfg);
  save_image(s.fusion.fused, dir / "i_out.png", cfg.io.bit_depth);
  save_image(s.fusion.zeta_fused, dir / "zeta_fused.png", 16);
  save_image(s.weights.map, dir / "fusion_weights.png", 16);
  if (g.dump) {
    save_image(s.background.background, dir / "ir_background.png", 16);
    save_image(s.saliency.zeta, dir / "zeta.png", 16);
    save_image(s.fusion.compensation, dir / "compensation.png", 16);
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "iteration,objective\n";
  for (std::size_t i = 0; i < s.background.objective.size(); ++i) csv << i << "," << s.background.objective[i] << "\n";
  write_text(dir / "admm_trace.csv", csv.str());
  std::cout << "eta " << s.fusion.eta << ", ADMM iterations " << s.background.iterations
            << (s.background.converged ? " (converged)" : " (max_iter reached)") << "\n";
  return kOk;
}

int cmd_pipeline(const Globals& g, const Inputs& in, bool entropy_order) {
  const FusionConfig cfg = load_config(g, in);
  PipelineOptions opt;
  opt.use_ir = !g.no_ir;
  opt.single_exposure = g.single_exposure;
  opt.entropy_order = entropy_order;
  opt.dump_intermediates = g.dump;
  opt.seed = g.seed;
  const PipelineTrace trace = run_pipeline(cfg, opt);
  for (const StageRecord& s : trace.stages) {
    std::cout << s.name << ": " << s.status << " (" << s.seconds << " s) " << s.detail << "\n";
  }
  return kOk;
}

int cmd_metrics(const Globals& g, const Inputs& in, const std::string& fused, const std::vector<std::string>& sources,
                const std::string& out) {
  const FusionConfig cfg = load_config(g, in);
  const std::string& a = sources.at(0);
  const std::string& b = sources.at(1);
  const GrayImage f = load_gray(fused);
  const GrayImage ia = load_gray(a);
  const GrayImage ib = load_gray(b);
  std::optional<ExposureStack> stack;
  if (!cfg.io.channels.empty() || !cfg.io.mosaic.empty()) stack = load_stack(cfg.io, cfg.sve);
  MetricReport report = evaluate(f, ia, ib, stack ? &*stack : nullptr, cfg.metric_bins);
  report.inputs = {fs::path(a).filename().string(), fs::path(b).filename().string()};
  const std::string text = report.to_json();
  if (!out.empty()) {
    write_text(out, text);
  } else if (!g.out_dir.empty()) {
    const fs::path dir = prepare_out(cfg);
    write_text(dir / "report.json", text);
  }
  std::cout << text << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-exposure visible / infrared complementary fusion"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "Configuration file (sectioned key = value)");
  app.add_option("--out-dir", g.out_dir, "Output directory (overrides io.out_dir)");
  app.add_flag("--dump-intermediates", g.dump, "Write every stage artifact");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for RANSAC and simulation");
  app.add_flag("--single-exposure", g.single_exposure, "Derive the stack from one image by gamma mapping");
  app.add_flag("--no-ir", g.no_ir, "Disable infrared compensation");

  Inputs in;

  auto* sim = app.add_subcommand("simulate", "Render a synthetic SVE scene with a misaligned hot-spot IR frame");
  int size = 256, bits = 16, hot_spots = 3;
  double rotation = 3.0, tx = 12.0, ty = -8.0, projective = 2e-5, noise = 0.0005;
  sim->add_option("--size", size, "Width and height")->check(CLI::Range(32, 8192));
  sim->add_option("--rotation", rotation, "IR -> visible rotation in degrees");
  sim->add_option("--tx", tx, "IR -> visible translation x");
  sim->add_option("--ty", ty, "IR -> visible translation y");
  sim->add_option("--projective", projective, "Projective distortion term");
  sim->add_option("--noise", noise, "Read noise sigma")->check(CLI::NonNegativeNumber);
  sim->add_option("--bits", bits, "Quantization bits (8 or 16)");
  sim->add_option("--hot-spots", hot_spots, "Number of IR hot spots")->check(CLI::NonNegativeNumber);

  auto* decode = app.add_subcommand("decode-sve", "Split a raw mosaic into exposure channels");
  bool no_upsample = false;
  decode->add_option("--mosaic", in.mosaic, "Raw SVE mosaic");
  decode->add_flag("--no-upsample", no_upsample, "Keep half-resolution channels");

  auto* perceive = app.add_subcommand("perceive", "Regional perception maps and region labels");
  add_input_options(perceive, in, false);

  auto* reg = app.add_subcommand("register", "Merged-feature VIS/IR registration");
  std::string corners;
  add_input_options(reg, in, true);
  reg->add_option("--corners", corners, "truth.json with ground-truth corners for localization RMSE");

  auto* mef = app.add_subcommand("fuse-mef", "Multi-exposure fusion to I_pre");
  std::string labels;
  add_input_options(mef, in, false);
  mef->add_option("--labels", labels, "Region label image (computed when absent)");

  auto* ivf = app.add_subcommand("fuse-ivf", "Complementary IR fusion of I_pre and the warped IR image");
  std::string pre_path, valid_path;
  add_input_options(ivf, in, true);
  ivf->add_option("--pre", pre_path, "I_pre image")->required();
  ivf->add_option("--labels", labels, "Region label image (computed when absent)");
  ivf->add_option("--valid", valid_path, "Warp validity mask");

  auto* pipe = app.add_subcommand("pipeline", "End-to-end fusion");
  bool entropy_order = false;
  add_input_options(pipe, in, true);
  pipe->add_option("--image", in.image, "Single-exposure input image");
  pipe->add_flag("--entropy-order", entropy_order, "Use the higher-entropy input as the base");

  auto* met = app.add_subcommand("metrics", "AG, MI, PSNR and MEF-SSIM of a fused image");
  std::string fused, report_out;
  std::vector<std::string> sources;
  add_input_options(met, in, false);
  met->add_option("--fused", fused, "Fused image")->required();
  met->add_option("--sources", sources, "The two source images")->required()->expected(2);
  met->add_option("--out", report_out, "Report path (default: <out-dir>/report.json when --out-dir is set)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  if (seed_opt->count() > 0) g.seed = seed;

  try {
    if (*sim) return cmd_simulate(g, size, rotation, tx, ty, projective, noise, bits, hot_spots);
    if (*decode) return cmd_decode(g, in, no_upsample);
    if (*perceive) return cmd_perceive(g, in);
    if (*reg) return cmd_register(g, in, corners);
    if (*mef) return cmd_fuse_mef(g, in, labels);
    if (*ivf) return cmd_fuse_ivf(g, in, pre_path, labels, valid_path);
    if (*pipe) return cmd_pipeline(g, in, entropy_order);
    if (*met) return cmd_metrics(g, in, fused, sources, report_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
