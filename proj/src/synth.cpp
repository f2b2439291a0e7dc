#include "cofuse/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "cofuse/error.hpp"

namespace cofuse {

namespace {

// Convex quadrilateral; vertices ordered TL, TR, BR, BL (positive turn with y pointing down).
struct Quad {
  std::array<Point2, 4> v;
  double reflectance;
  double emissivity;  // signed IR offset
  double gap_x;       // free column to the right of the shape, for hot spots
  double mid_y;

  bool contains(double x, double y) const {
    for (int i = 0; i < 4; ++i) {
      const Point2& a = v[i];
      const Point2& b = v[(i + 1) % 4];
      if ((b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x) < 0.0) return false;
    }
    return true;
  }
};

bool convex(const std::array<Point2, 4>& v) {
  for (int i = 0; i < 4; ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % 4];
    const Point2& c = v[(i + 2) % 4];
    if ((b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x) <= 0.0) return false;
  }
  return true;
}

struct Blob {
  double x, y;
};

class Scene {
 public:
  explicit Scene(const SceneParams& p) : p_(p) {
    std::mt19937_64 rng(p.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double cw = static_cast<double>(p.width) / p.grid;
    const double ch = static_cast<double>(p.height) / p.grid;
    for (int gy = 0; gy < p.grid; ++gy) {
      for (int gx = 0; gx < p.grid; ++gx) {
        const double w = cw * (0.45 + 0.2 * u(rng));
        const double h = ch * (0.45 + 0.2 * u(rng));
        const double x0 = gx * cw + (cw - w) * (0.2 + 0.6 * u(rng));
        const double y0 = gy * ch + (ch - h) * (0.2 + 0.6 * u(rng));
        const std::array<Point2, 4> base{Point2{x0, y0}, Point2{x0 + w, y0}, Point2{x0 + w, y0 + h},
                                         Point2{x0, y0 + h}};
        std::array<Point2, 4> v;
        do {
          for (int i = 0; i < 4; ++i) {
            v[i] = {base[i].x + 0.2 * w * (2.0 * u(rng) - 1.0), base[i].y + 0.2 * h * (2.0 * u(rng) - 1.0)};
          }
        } while (!convex(v));
        const double refl = u(rng) < 0.5 ? 0.1 + 0.2 * u(rng) : 0.65 + 0.25 * u(rng);
        const double sign = (u(rng) < 0.5 ? -1.0 : 1.0) * (0.4 + 0.6 * u(rng));
        const double right = std::max({v[0].x, v[1].x, v[2].x, v[3].x});
        quads_.push_back({v, refl, sign * p.ir_structure, 0.5 * (right + (gx + 1) * cw), y0 + 0.5 * h});
      }
    }
    for (int i = 0; i < p.hot_spots; ++i) {
      // Hot spots sit in the gaps between shapes so that they read as IR-only content.
      const int gx = static_cast<int>(u(rng) * p.grid) % p.grid;
      const int gy = static_cast<int>(u(rng) * p.grid) % p.grid;
      const Quad& q = quads_[static_cast<std::size_t>(gy) * p.grid + gx];
      blobs_.push_back({std::min(q.gap_x, p.width - 3.0 * p.hot_sigma), q.mid_y});
    }
    phase_ = 2.0 * M_PI * u(rng);
  }

  const std::vector<Quad>& quads() const { return quads_; }

  double reflectance(double x, double y) const {
    const Quad* q = quad_at(x, y);
    return q ? q->reflectance : 0.45;
  }

  double illumination(double x, double y) const {
    const double d = 0.6 * x / p_.width + 0.4 * y / p_.height +
                     0.05 * std::sin(2.0 * M_PI * y / p_.height + phase_) - 0.5;
    const double t = 1.0 / (1.0 + std::exp(-d / p_.transition));
    return std::exp(std::log(p_.illum_lo) + t * (std::log(p_.illum_hi) - std::log(p_.illum_lo)));
  }

  double hot(double x, double y) const {
    double v = 0.0;
    for (const Blob& b : blobs_) {
      const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      v += p_.hot_amplitude * std::exp(-d2 / (2.0 * p_.hot_sigma * p_.hot_sigma));
    }
    return v;
  }

  double thermal(double x, double y) const {
    const Quad* q = quad_at(x, y);
    double v = 0.4 + 0.1 * y / p_.height + (q ? q->emissivity : 0.0);
    const double h = hot(x, y);
    v += h;
    if (p_.ir_texture > 0.0 && p_.hot_amplitude > 0.0) {
      v += p_.ir_texture * (h / p_.hot_amplitude) * std::sin(1.7 * x) * std::sin(1.3 * y);
    }
    return std::clamp(v, 0.0, 1.0);
  }

 private:
  const Quad* quad_at(double x, double y) const {
    const int gx = static_cast<int>(std::floor(x * p_.grid / p_.width));
    const int gy = static_cast<int>(std::floor(y * p_.grid / p_.height));
    if (gx < 0 || gy < 0 || gx >= p_.grid || gy >= p_.grid) return nullptr;
    const Quad& q = quads_[static_cast<std::size_t>(gy) * p_.grid + gx];
    return q.contains(x, y) ? &q : nullptr;
  }

  SceneParams p_;
  std::vector<Quad> quads_;
  std::vector<Blob> blobs_;
  double phase_ = 0.0;
};

// 3x3 supersampled average of f over the unit footprint of pixel (x, y) mapped through t.
template <class F>
double render(const F& f, const Transform2D& t, int x, int y) {
  double s = 0.0;
  for (int j = -1; j <= 1; ++j) {
    for (int i = -1; i <= 1; ++i) {
      const Point2 q = t.apply({x + i / 3.0, y + j / 3.0});
      s += f(q.x, q.y);
    }
  }
  return s / 9.0;
}

}  // namespace

SyntheticScene make_scene(const SceneParams& p) {
  if (p.width < 16 || p.height < 16) throw InvalidArgument("make_scene: frame must be at least 16x16");
  if (p.grid < 1) throw InvalidArgument("make_scene: grid must be >= 1");
  if (!(p.illum_lo > 0.0) || !(p.illum_hi >= p.illum_lo) || !(p.transition > 0.0)) {
    throw InvalidArgument("make_scene: need 0 < illum_lo <= illum_hi and transition > 0");
  }
  const Scene scene(p);
  SyntheticScene out;
  const double cx = 0.5 * (p.width - 1), cy = 0.5 * (p.height - 1);
  Transform2D rigid = Transform2D::rigid(p.rotation_deg, cx, cy, p.tx, p.ty);
  // Projective terms act about the centre so the mapping stays close to rigid.
  const Transform2D to_centre = Transform2D::translation(-cx, -cy);
  const Transform2D persp({1, 0, 0, 0, 1, 0, p.projective, -0.5 * p.projective, 1});
  out.ir_to_vis = Transform2D::translation(cx, cy) * persp * to_centre * rigid;

  const Transform2D id = Transform2D::identity();
  out.hdr = GrayImage(p.width, p.height);
  out.reflectance = GrayImage(p.width, p.height);
  out.ir = GrayImage(p.width, p.height);
  out.ir_aligned = GrayImage(p.width, p.height);
  out.hot_mask = GrayImage(p.width, p.height);
  auto radiance = [&](double x, double y) { return scene.illumination(x, y) * scene.reflectance(x, y); };
  auto refl = [&](double x, double y) { return scene.reflectance(x, y); };
  auto thermal = [&](double x, double y) { return scene.thermal(x, y); };
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      out.hdr(x, y) = render(radiance, id, x, y);
      out.reflectance(x, y) = render(refl, id, x, y);
      out.ir(x, y) = render(thermal, out.ir_to_vis, x, y);
      out.ir_aligned(x, y) = render(thermal, id, x, y);
      out.hot_mask(x, y) = scene.hot(x, y) >= 0.5 * p.hot_amplitude && p.hot_amplitude > 0.0 ? 1.0 : 0.0;
    }
  }
  for (const Quad& q : scene.quads()) {
    for (const Point2& v : q.v) out.corners.push_back(v);
  }
  return out;
}

std::vector<Point2> grid_points(int width, int height, int per_side, double margin) {
  if (per_side < 2) throw InvalidArgument("grid_points: per_side must be >= 2");
  std::vector<Point2> pts;
  for (int j = 0; j < per_side; ++j) {
    for (int i = 0; i < per_side; ++i) {
      pts.push_back({margin + (width - 1 - 2.0 * margin) * i / (per_side - 1),
                     margin + (height - 1 - 2.0 * margin) * j / (per_side - 1)});
    }
  }
  return pts;
}

}  // namespace cofuse
