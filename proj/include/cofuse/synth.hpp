#pragma once

#include <cstdint>
#include <vector>

#include "cofuse/image.hpp"

namespace cofuse {

struct SceneParams {
  int width = 256;
  int height = 256;
  std::uint64_t seed = 0;
  double illum_lo = 0.8;     // illumination of the shadowed side
  double illum_hi = 300.0;   // and of the lit side
  double transition = 0.04;  // width of the log-illumination sigmoid, in image fractions
  int grid = 6;             // grid x grid cells, one shape each
  int hot_spots = 3;
  double hot_amplitude = 0.35;
  double hot_sigma = 4.0;
  double ir_structure = 0.25;  // IR contrast of the shapes
  double ir_texture = 0.0;     // amplitude of fine IR texture inside hot spots
  // IR -> visible mapping: rotation about the centre, translation, projective terms.
  double rotation_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double projective = 0.0;
};

struct SyntheticScene {
  GrayImage hdr;          // radiance, visible frame
  GrayImage reflectance;  // visible frame
  GrayImage ir;           // IR frame
  GrayImage ir_aligned;   // IR scene rendered directly in the visible frame
  Transform2D ir_to_vis;
  GrayImage hot_mask;     // visible frame, 1 where the hot-spot term >= half its peak
  std::vector<Point2> corners;  // shape vertices, visible frame
};

/// Piecewise-constant convex quadrilaterals under a shadow/sunlight illumination split plus a
/// co-registered thermal image with Gaussian hot spots. Rendering is 3x3
/// supersampled; the IR image is sampled through ir_to_vis.
SyntheticScene make_scene(const SceneParams& params);

/// Regular grid of points spanning the interior of a width x height frame.
std::vector<Point2> grid_points(int width, int height, int per_side, double margin);

}  // namespace cofuse
