#include "cofuse/io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "cofuse/error.hpp"

namespace cofuse {
namespace {

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

std::uint32_t quantize(double v, std::uint32_t maxval) {
  const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
  return static_cast<std::uint32_t>(std::floor(c * maxval + 0.5));
}

// Interleaved samples -> planes.
AnyImage from_samples(const std::vector<std::uint32_t>& samples, int w, int h, int channels,
                      double maxval) {
  std::vector<GrayImage> planes;
  const int color = channels >= 3 ? 3 : 1;
  for (int c = 0; c < color; ++c) planes.emplace_back(w, h);
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    for (int c = 0; c < color; ++c) planes[c][i] = samples[i * channels + c] / maxval;
  }
  if (color == 1) return std::move(planes[0]);
  return ColorImage(std::move(planes[0]), std::move(planes[1]), std::move(planes[2]));
}

// ---------------------------------------------------------------------------
// PNM

int read_pnm_int(std::istream& in, const std::string& name) {
  // Skips whitespace and '#' comments in the header.
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int v = 0;
  if (!(in >> v)) throw IoError("PNM: corrupt header in " + name);
  return v;
}

AnyImage load_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  if (magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw IoError("unsupported PNM variant (only binary P5/P6): " + path.string());
  }
  const int channels = magic[1] == '5' ? 1 : 3;
  const int w = read_pnm_int(in, path.string());
  const int h = read_pnm_int(in, path.string());
  const int maxval = read_pnm_int(in, path.string());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw IoError("PNM: invalid header values in " + path.string());
  }
  in.get();  // single whitespace after maxval
  const int bytes = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(w) * h * channels;
  std::vector<unsigned char> raw(n * bytes);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw IoError("PNM: truncated pixel data in " + path.string());
  }
  std::vector<std::uint32_t> samples(n);
  for (std::size_t i = 0; i < n; ++i) {
    samples[i] = bytes == 2 ? (raw[2 * i] << 8) | raw[2 * i + 1] : raw[i];
    if (samples[i] > static_cast<std::uint32_t>(maxval)) {
      throw IoError("PNM: sample exceeds maxval in " + path.string());
    }
  }
  return from_samples(samples, w, h, channels, maxval);
}

void save_pnm(const std::vector<const GrayImage*>& planes, const std::filesystem::path& path,
              int bit_depth) {
  const int w = planes[0]->width();
  const int h = planes[0]->height();
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << (planes.size() == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n" << maxval << "\n";
  std::vector<unsigned char> buf;
  buf.reserve(static_cast<std::size_t>(w) * h * planes.size() * (bit_depth / 8));
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    for (const GrayImage* p : planes) {
      const std::uint32_t q = quantize((*p)[i], maxval);
      if (bit_depth == 16) buf.push_back(static_cast<unsigned char>(q >> 8));
      buf.push_back(static_cast<unsigned char>(q & 0xFF));
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// PNG

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

AnyImage load_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("corrupt PNG signature: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG data: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // host little-endian 16-bit samples
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  buffer.resize(rowbytes * h);
  rows.resize(h);
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<std::uint32_t> samples(static_cast<std::size_t>(w) * h * channels);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (out_depth == 16) {
      std::uint16_t v;
      std::memcpy(&v, buffer.data() + 2 * i, 2);
      samples[i] = v;
    } else {
      samples[i] = buffer[i];
    }
  }
  // Gray+alpha (2) keeps one plane; RGB(A) keeps three.
  const int keep = channels >= 3 ? 3 : 1;
  std::vector<std::uint32_t> packed(static_cast<std::size_t>(w) * h * keep);
  for (std::size_t p = 0; p < static_cast<std::size_t>(w) * h; ++p) {
    for (int c = 0; c < keep; ++c) packed[p * keep + c] = samples[p * channels + c];
  }
  return from_samples(packed, w, h, keep, out_depth == 16 ? 65535.0 : 255.0);
}

void save_png(const std::vector<const GrayImage*>& planes, const std::filesystem::path& path,
              int bit_depth) {
  const int w = planes[0]->width();
  const int h = planes[0]->height();
  const int channels = static_cast<int>(planes.size());
  const std::uint32_t maxval = bit_depth == 16 ? 65535 : 255;
  const int bytes = bit_depth / 8;
  std::vector<png_byte> buffer(static_cast<std::size_t>(w) * h * channels * bytes);
  std::size_t o = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    for (const GrayImage* p : planes) {
      const std::uint32_t q = quantize((*p)[i], maxval);
      if (bytes == 2) buffer[o++] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      buffer[o++] = static_cast<png_byte>(q & 0xFF);
    }
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  std::vector<png_bytep> rows(h);
  const std::size_t rowbytes = static_cast<std::size_t>(w) * channels * bytes;
  for (int y = 0; y < h; ++y) rows[y] = buffer.data() + y * rowbytes;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, bit_depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("write failed: " + path.string());
}

void check_depth(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw InvalidArgument("save_image: bit depth must be 8 or 16, got " + std::to_string(bit_depth));
  }
}

void save_planes(const std::vector<const GrayImage*>& planes, const std::filesystem::path& path,
                 int bit_depth) {
  check_depth(bit_depth);
  const std::string ext = lower_ext(path);
  if (ext == ".png") {
    save_png(planes, path, bit_depth);
  } else if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    save_pnm(planes, path, bit_depth);
  } else {
    throw IoError("unsupported output format '" + ext + "' for " + path.string());
  }
}

}  // namespace

AnyImage load_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
  const std::string ext = lower_ext(path);
  if (ext == ".png") return load_png(path);
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") return load_pnm(path);
  throw IoError("unsupported image format '" + ext + "': " + path.string());
}

GrayImage load_gray(const std::filesystem::path& path) {
  AnyImage img = load_image(path);
  if (auto* g = std::get_if<GrayImage>(&img)) return std::move(*g);
  return to_gray(std::get<ColorImage>(img));
}

void save_image(const GrayImage& img, const std::filesystem::path& path, int bit_depth) {
  save_planes({&img}, path, bit_depth);
}

void save_image(const ColorImage& img, const std::filesystem::path& path, int bit_depth) {
  save_planes({&img.r, &img.g, &img.b}, path, bit_depth);
}

}  // namespace cofuse
