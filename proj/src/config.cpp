#include "cofuse/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <variant>

#include "cofuse/error.hpp"

namespace cofuse {

namespace {

struct Value {
  std::variant<double, bool, std::string, std::vector<Value>> v;
};

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError("config key '" + key + "': " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing # comment that is not inside a string.
std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

class ValueParser {
 public:
  ValueParser(const std::string& text, const std::string& key) : s_(text), key_(key) {}

  Value parse() {
    Value v = value();
    skip_ws();
    if (pos_ != s_.size()) fail(key_, "trailing characters after value");
    return v;
  }

 private:
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  Value value() {
    skip_ws();
    if (pos_ >= s_.size()) fail(key_, "missing value");
    const char c = s_[pos_];
    if (c == '"') {
      const auto end = s_.find('"', pos_ + 1);
      if (end == std::string::npos) fail(key_, "unterminated string");
      Value v{s_.substr(pos_ + 1, end - pos_ - 1)};
      pos_ = end + 1;
      return v;
    }
    if (c == '[') {
      ++pos_;
      std::vector<Value> items;
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ']') {
        ++pos_;
        return Value{items};
      }
      while (true) {
        items.push_back(value());
        skip_ws();
        if (pos_ >= s_.size()) fail(key_, "unterminated array");
        if (s_[pos_] == ',') {
          ++pos_;
          continue;
        }
        if (s_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail(key_, "expected ',' or ']' in array");
      }
      return Value{items};
    }
    std::size_t end = pos_;
    while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' && s_[end] != '\t') ++end;
    const std::string tok = s_.substr(pos_, end - pos_);
    pos_ = end;
    if (tok == "true") return Value{true};
    if (tok == "false") return Value{false};
    std::size_t used = 0;
    double d = 0.0;
    try {
      d = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail(key_, "cannot parse value '" + tok + "'");
    }
    if (used != tok.size() || !std::isfinite(d)) fail(key_, "cannot parse value '" + tok + "'");
    return Value{d};
  }

  const std::string& s_;
  std::string key_;
  std::size_t pos_ = 0;
};

double as_number(const Value& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v.v)) return *d;
  fail(key, "expected a number");
}

int as_int(const Value& v, const std::string& key) {
  const double d = as_number(v, key);
  if (d != std::floor(d) || std::abs(d) > std::numeric_limits<int>::max()) fail(key, "expected an integer");
  return static_cast<int>(d);
}

bool as_bool(const Value& v, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&v.v)) return *b;
  fail(key, "expected true or false");
}

std::string as_string(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v.v)) return *s;
  fail(key, "expected a quoted string");
}

const std::vector<Value>& as_array(const Value& v, const std::string& key) {
  if (const auto* a = std::get_if<std::vector<Value>>(&v.v)) return *a;
  fail(key, "expected an array");
}

std::string fmt(double d) {
  std::ostringstream os;
  os << std::setprecision(17) << d;
  std::string s = os.str();
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

struct Binding {
  std::function<void(const Value&, const std::string&)> set;
  std::function<std::string()> get;
};

Binding number(double& ref) {
  return {[&ref](const Value& v, const std::string& k) { ref = as_number(v, k); }, [&ref] { return fmt(ref); }};
}

Binding integer(int& ref) {
  return {[&ref](const Value& v, const std::string& k) { ref = as_int(v, k); },
          [&ref] { return std::to_string(ref); }};
}

Binding boolean(bool& ref) {
  return {[&ref](const Value& v, const std::string& k) { ref = as_bool(v, k); },
          [&ref] { return std::string(ref ? "true" : "false"); }};
}

Binding path(std::filesystem::path& ref) {
  return {[&ref](const Value& v, const std::string& k) { ref = as_string(v, k); },
          [&ref] { return quote(ref.string()); }};
}

std::map<std::string, Binding> bindings(FusionConfig& c) {
  std::map<std::string, Binding> b;
  b["perception.alpha"] = number(c.perception.weights.alpha);
  b["perception.beta"] = number(c.perception.weights.beta);
  b["perception.gamma"] = number(c.perception.weights.gamma);
  b["perception.sigma"] = number(c.perception.weights.sigma);
  b["perception.regions"] = integer(c.perception.regions);
  b["perception.cf_radius"] = integer(c.perception.cf_radius);
  b["perception.refine"] = boolean(c.perception.refine);
  b["perception.em_max_iter"] = integer(c.perception.em.max_iter);
  b["perception.em_tol"] = number(c.perception.em.tol);
  b["perception.em_variance_floor"] = number(c.perception.em.variance_floor);

  b["features.levels"] = integer(c.features.harris.levels);
  b["features.harris_k"] = number(c.features.harris.k);
  b["features.rel_threshold"] = number(c.features.harris.rel_threshold);
  b["features.window_sigma"] = number(c.features.harris.window_sigma);
  b["features.transfer_sigma"] = number(c.features.transfer_sigma);
  b["features.transfer_mode"] = {
      [&c](const Value& v, const std::string& k) {
        const std::string s = as_string(v, k);
        if (s == "literal") c.features.transfer_mode = TransferMode::literal;
        else if (s == "mixture") c.features.transfer_mode = TransferMode::mixture;
        else fail(k, "expected \"literal\" or \"mixture\"");
      },
      [&c] { return quote(c.features.transfer_mode == TransferMode::literal ? "literal" : "mixture"); }};
  b["features.patch_radius"] = integer(c.features.descriptor.patch_radius);
  b["features.descriptor_sigma"] = number(c.features.descriptor.smoothing_sigma);
  b["features.descriptor_offset"] = number(c.features.descriptor.log_offset);
  b["features.descriptor_clip"] = number(c.features.descriptor.clip);
  b["features.ratio"] = number(c.features.ratio);
  b["features.guided_rounds"] = integer(c.features.guided_rounds);

  b["registration.model"] = {
      [&c](const Value& v, const std::string& k) {
        const std::string s = as_string(v, k);
        if (s == "homography") c.registration.model = TransformModel::homography;
        else if (s == "affine") c.registration.model = TransformModel::affine;
        else fail(k, "expected \"homography\" or \"affine\"");
      },
      [&c] { return quote(c.registration.model == TransformModel::homography ? "homography" : "affine"); }};
  b["registration.inlier_px"] = number(c.registration.inlier_px);
  b["registration.iterations"] = integer(c.registration.iterations);
  b["registration.seed"] = {
      [&c](const Value& v, const std::string& k) {
        const double d = as_number(v, k);
        if (d < 0 || d != std::floor(d) || d > 9007199254740992.0) fail(k, "expected a non-negative integer");
        c.registration.seed = static_cast<std::uint64_t>(d);
      },
      [&c] { return std::to_string(c.registration.seed); }};

  b["mef.retinex_radius"] = integer(c.mef.retinex_radius);
  b["mef.retinex_eps"] = number(c.mef.retinex_eps);
  b["mef.sigma_w"] = number(c.mef.sigma_w);
  b["mef.region_pull"] = number(c.mef.region_pull);
  b["mef.reflectance_radius"] = integer(c.mef.reflectance_radius);
  b["mef.reflectance_eps"] = number(c.mef.reflectance_eps);
  b["mef.levels"] = integer(c.mef.levels);

  b["admm.c1"] = number(c.admm.c1);
  b["admm.c2"] = number(c.admm.c2);
  b["admm.rho"] = number(c.admm.rho);
  b["admm.max_iter"] = integer(c.admm.max_iter);
  b["admm.tol"] = number(c.admm.tol);
  b["admm.prefilter_radius"] = integer(c.admm.prefilter_radius);
  b["admm.prefilter_eps"] = number(c.admm.prefilter_eps);
  b["admm.gradient_eps"] = number(c.admm.gradient_eps);

  b["ssim.window"] = integer(c.ssim.window);
  b["ssim.stride"] = integer(c.ssim.stride);
  b["ssim.b1"] = number(c.ssim.b1);
  b["ssim.b2"] = number(c.ssim.b2);
  b["ssim.min_coverage"] = number(c.ssim.min_coverage);

  b["fusion.gif_radius"] = integer(c.fusion.gif_radius);
  b["fusion.gif_eps"] = number(c.fusion.gif_eps);
  b["fusion.eta_rule"] = {
      [&c](const Value& v, const std::string& k) {
        const std::string s = as_string(v, k);
        if (s == "brightest_half") c.fusion.eta_rule = EtaRule::brightest_half;
        else if (s == "dimmest_half") c.fusion.eta_rule = EtaRule::dimmest_half;
        else fail(k, "expected \"brightest_half\" or \"dimmest_half\"");
      },
      [&c] { return quote(c.fusion.eta_rule == EtaRule::brightest_half ? "brightest_half" : "dimmest_half"); }};

  b["pseudoexp.gamma_lo"] = number(c.pseudoexp.selection.lo);
  b["pseudoexp.gamma_hi"] = number(c.pseudoexp.selection.hi);
  b["pseudoexp.gamma_count"] = integer(c.pseudoexp.selection.count);
  b["pseudoexp.dark_threshold"] = number(c.pseudoexp.selection.dark_threshold);
  b["pseudoexp.bright_threshold"] = number(c.pseudoexp.selection.bright_threshold);
  b["pseudoexp.alpha"] = number(c.pseudoexp.alpha);
  b["pseudoexp.adaptive"] = boolean(c.pseudoexp.adaptive);

  b["metrics.bins"] = integer(c.metric_bins);

  b["sve.transmittance"] = {
      [&c](const Value& v, const std::string& k) {
        const auto& a = as_array(v, k);
        if (a.size() != 4) fail(k, "expected 4 values");
        for (int i = 0; i < 4; ++i) c.sve.transmittance[i] = as_number(a[i], k);
      },
      [&c] {
        std::string s = "[";
        for (int i = 0; i < 4; ++i) s += (i ? ", " : "") + fmt(c.sve.transmittance[i]);
        return s + "]";
      }};
  b["sve.layout"] = {
      [&c](const Value& v, const std::string& k) {
        const auto& a = as_array(v, k);
        if (a.size() != 4) fail(k, "expected 4 channel indices");
        for (int i = 0; i < 4; ++i) c.sve.channel_at[i] = as_int(a[i], k);
      },
      [&c] {
        std::string s = "[";
        for (int i = 0; i < 4; ++i) s += (i ? ", " : "") + std::to_string(c.sve.channel_at[i]);
        return s + "]";
      }};
  b["sve.upsample"] = boolean(c.io.upsample);

  b["io.mosaic"] = path(c.io.mosaic);
  b["io.channels"] = {
      [&c](const Value& v, const std::string& k) {
        c.io.channels.clear();
        for (const Value& item : as_array(v, k)) c.io.channels.emplace_back(as_string(item, k));
      },
      [&c] {
        std::string s = "[";
        for (std::size_t i = 0; i < c.io.channels.size(); ++i) s += (i ? ", " : "") + quote(c.io.channels[i].string());
        return s + "]";
      }};
  b["io.image"] = path(c.io.image);
  b["io.ir"] = path(c.io.ir);
  b["io.out_dir"] = path(c.io.out_dir);
  b["io.bit_depth"] = integer(c.io.bit_depth);
  return b;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) fail(key, what);
}

}  // namespace

void check_config(const FusionConfig& c) {
  const auto& w = c.perception.weights;
  require(w.alpha >= 0, "perception.alpha", "must be >= 0");
  require(w.beta >= 0, "perception.beta", "must be >= 0");
  require(w.gamma >= 0, "perception.gamma", "must be >= 0");
  require(w.sigma >= 0, "perception.sigma", "must be >= 0");
  require(w.alpha + w.beta + w.gamma + w.sigma > 0, "perception.alpha", "perception weights sum to zero");
  require(c.perception.regions >= 2, "perception.regions", "must be >= 2");
  require(c.perception.cf_radius >= 0, "perception.cf_radius", "must be >= 0");
  require(c.perception.em.max_iter >= 1, "perception.em_max_iter", "must be >= 1");
  require(c.perception.em.tol > 0, "perception.em_tol", "must be > 0");
  require(c.perception.em.variance_floor > 0, "perception.em_variance_floor", "must be > 0");

  require(c.features.harris.levels >= 1, "features.levels", "must be >= 1");
  require(c.features.harris.k > 0 && c.features.harris.k < 0.25, "features.harris_k", "must lie in (0, 0.25)");
  require(c.features.harris.rel_threshold > 0 && c.features.harris.rel_threshold < 1, "features.rel_threshold",
          "must lie in (0, 1)");
  require(c.features.harris.window_sigma > 0, "features.window_sigma", "must be > 0");
  require(c.features.transfer_sigma > 0, "features.transfer_sigma", "must be > 0");
  require(c.features.descriptor.patch_radius >= 4, "features.patch_radius", "must be >= 4");
  require(c.features.descriptor.smoothing_sigma > 0, "features.descriptor_sigma", "must be > 0");
  require(c.features.descriptor.log_offset > 0, "features.descriptor_offset", "must be > 0");
  require(c.features.descriptor.clip > 0 && c.features.descriptor.clip <= 1, "features.descriptor_clip",
          "must lie in (0, 1]");
  require(c.features.ratio > 0 && c.features.ratio <= 1, "features.ratio", "must lie in (0, 1]");
  require(c.features.guided_rounds >= 0, "features.guided_rounds", "must be >= 0");

  require(c.registration.inlier_px > 0, "registration.inlier_px", "must be > 0");
  require(c.registration.iterations >= 1, "registration.iterations", "must be >= 1");

  require(c.mef.retinex_radius >= 1, "mef.retinex_radius", "must be >= 1");
  require(c.mef.retinex_eps > 0, "mef.retinex_eps", "must be > 0");
  require(c.mef.sigma_w > 0, "mef.sigma_w", "must be > 0");
  require(c.mef.region_pull >= 0 && c.mef.region_pull <= 1, "mef.region_pull", "must lie in [0, 1]");
  require(c.mef.reflectance_radius >= 1, "mef.reflectance_radius", "must be >= 1");
  require(c.mef.reflectance_eps > 0, "mef.reflectance_eps", "must be > 0");
  require(c.mef.levels >= 1, "mef.levels", "must be >= 1");

  require(c.admm.c1 >= 0, "admm.c1", "must be >= 0");
  require(c.admm.c2 >= 0, "admm.c2", "must be >= 0");
  require(c.admm.rho > 0, "admm.rho", "must be > 0");
  require(c.admm.max_iter >= 1, "admm.max_iter", "must be >= 1");
  require(c.admm.tol > 0, "admm.tol", "must be > 0");
  require(c.admm.prefilter_radius >= 1, "admm.prefilter_radius", "must be >= 1");
  require(c.admm.prefilter_eps > 0, "admm.prefilter_eps", "must be > 0");
  require(c.admm.gradient_eps > 0, "admm.gradient_eps", "must be > 0");

  require(c.ssim.window >= 3, "ssim.window", "must be >= 3");
  require(c.ssim.stride >= 1 && c.ssim.stride <= c.ssim.window, "ssim.stride", "must lie in [1, window]");
  require(c.ssim.b1 > 0, "ssim.b1", "must be > 0");
  require(c.ssim.b2 > 0, "ssim.b2", "must be > 0");
  require(c.ssim.min_coverage > 0 && c.ssim.min_coverage <= 1, "ssim.min_coverage", "must lie in (0, 1]");

  require(c.fusion.gif_radius >= 0, "fusion.gif_radius", "must be >= 0");
  require(c.fusion.gif_eps > 0, "fusion.gif_eps", "must be > 0");

  const auto& g = c.pseudoexp.selection;
  require(g.lo > 0, "pseudoexp.gamma_lo", "must be > 0");
  require(g.count >= 1, "pseudoexp.gamma_count", "must be >= 1");
  require(!c.pseudoexp.adaptive || g.count >= 2, "pseudoexp.gamma_count", "must be >= 2 with adaptive selection");
  if (g.count == 1) {
    require(g.hi >= g.lo, "pseudoexp.gamma_hi", "must not be below gamma_lo");
  } else {
    require(g.hi > g.lo, "pseudoexp.gamma_hi", "must exceed gamma_lo");
  }
  require(g.dark_threshold >= 0 && g.dark_threshold <= 1, "pseudoexp.dark_threshold", "must lie in [0, 1]");
  require(g.bright_threshold > g.dark_threshold && g.bright_threshold <= 1, "pseudoexp.bright_threshold",
          "must lie in (dark_threshold, 1]");
  require(c.pseudoexp.alpha > 0, "pseudoexp.alpha", "must be > 0");

  require(c.metric_bins >= 2 && c.metric_bins <= 65536, "metrics.bins", "must lie in [2, 65536]");

  try {
    c.sve.validate();
  } catch (const InvalidArgument& e) {
    fail("sve.layout", e.what());
  }
  require(c.io.bit_depth == 8 || c.io.bit_depth == 16, "io.bit_depth", "must be 8 or 16");
}

FusionConfig parse_config(const std::string& text) {
  FusionConfig c;
  auto table = bindings(c);
  std::istringstream in(text);
  std::string raw, section;
  std::map<std::string, bool> seen;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string name = trim(line.substr(0, eq));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto it = table.find(key);
    if (it == table.end()) fail(key, "unknown key");
    if (seen[key]) fail(key, "duplicate key");
    seen[key] = true;
    it->second.set(ValueParser(trim(line.substr(eq + 1)), key).parse(), key);
  }
  check_config(c);
  c.perception.weights = c.perception.weights.normalized();
  return c;
}

FusionConfig validate_config(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  FusionConfig c = parse_config(ss.str());
  const auto base = file.parent_path();
  auto resolve = [&base](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  auto require_file = [&](std::filesystem::path& p, const std::string& key) {
    resolve(p);
    if (!p.empty() && !std::filesystem::is_regular_file(p)) {
      throw ConfigError("config key '" + key + "': no such file: " + p.string());
    }
  };
  require_file(c.io.mosaic, "io.mosaic");
  require_file(c.io.image, "io.image");
  require_file(c.io.ir, "io.ir");
  for (auto& p : c.io.channels) require_file(p, "io.channels");
  resolve(c.io.out_dir);
  return c;
}

std::string dump_config(const FusionConfig& config) {
  FusionConfig copy = config;
  const auto table = bindings(copy);
  std::string out, section;
  for (const auto& [key, binding] : table) {
    const auto dot = key.find('.');
    const std::string sec = key.substr(0, dot);
    if (sec != section) {
      out += (out.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + binding.get() + "\n";
  }
  return out;
}

}  // namespace cofuse
