#pragma once

#include <filesystem>
#include <variant>

#include "cofuse/image.hpp"

namespace cofuse {

using AnyImage = std::variant<GrayImage, ColorImage>;

/// Loads PGM/PPM (binary P5/P6, maxval up to 65535) or PNG (8/16-bit gray,
/// gray+alpha, RGB, RGBA, palette). Samples are scaled to [0,1] by the
/// format's full-scale value; alpha is discarded.
/// Throws IoError for a missing file, unsupported format or corrupt data.
AnyImage load_image(const std::filesystem::path& path);

/// As load_image, converting color input to Rec.601 luma.
GrayImage load_gray(const std::filesystem::path& path);

/// Writes PNG (.png) or PGM/PPM (.pgm/.ppm/.pnm) chosen by extension.
/// Values are clamped to [0,1] and quantized to the nearest code of the
/// given bit depth (8 or 16).
void save_image(const GrayImage& img, const std::filesystem::path& path, int bit_depth = 8);
void save_image(const ColorImage& img, const std::filesystem::path& path, int bit_depth = 8);

}  // namespace cofuse
