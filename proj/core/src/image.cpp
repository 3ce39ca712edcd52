#include "plateflow/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "plateflow/errors.hpp"

namespace plateflow {

float Image::at_clamped(int row, int col) const {
  row = std::clamp(row, 0, height_ - 1);
  col = std::clamp(col, 0, width_ - 1);
  return at(row, col);
}

float Image::sample_bilinear(double x, double y) const {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const double dx = x - x0;
  const double dy = y - y0;
  const double p00 = at_clamped(y0, x0);
  const double p01 = at_clamped(y0, x0 + 1);
  const double p10 = at_clamped(y0 + 1, x0);
  const double p11 = at_clamped(y0 + 1, x0 + 1);
  const double top = p00 * (1.0 - dx) + p01 * dx;
  const double bot = p10 * (1.0 - dx) + p11 * dx;
  return static_cast<float>(top * (1.0 - dy) + bot * dy);
}

Image resize_bilinear(const Image& src, int new_width, int new_height) {
  if (new_width <= 0 || new_height <= 0) throw DataError("resize: non-positive target size");
  if (new_width == src.width() && new_height == src.height()) return src;
  Image out(new_width, new_height);
  // Pixel-center mapping: out pixel (c + 0.5) maps to src (c + 0.5) * scale.
  const double sx = static_cast<double>(src.width()) / new_width;
  const double sy = static_cast<double>(src.height()) / new_height;
  for (int r = 0; r < new_height; ++r) {
    const double y = (r + 0.5) * sy - 0.5;
    for (int c = 0; c < new_width; ++c) {
      const double x = (c + 0.5) * sx - 0.5;
      out.at(r, c) = src.sample_bilinear(x, y);
    }
  }
  return out;
}

Image rotate_about_center(const Image& src, double angle_deg) {
  if (angle_deg == 0.0) return src;
  const double rad = angle_deg * M_PI / 180.0;
  const double ca = std::cos(rad);
  const double sa = std::sin(rad);
  const double cx = (src.width() - 1) / 2.0;
  const double cy = (src.height() - 1) / 2.0;
  Image out(src.width(), src.height());
  for (int r = 0; r < src.height(); ++r) {
    for (int c = 0; c < src.width(); ++c) {
      // Inverse map: rotate destination point back into the source frame.
      const double dx = c - cx;
      const double dy = r - cy;
      const double sxp = cx + ca * dx + sa * dy;
      const double syp = cy - sa * dx + ca * dy;
      out.at(r, c) = src.sample_bilinear(sxp, syp);
    }
  }
  return out;
}

std::uint8_t quantize8(float p) {
  const float v = std::clamp(p, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(v * 255.0f));
}

namespace {

bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() && s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

void skip_pnm_space(std::istream& in) {
  for (;;) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      return;
    }
  }
}

Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image: " + path);
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5" && magic != "P6") throw DataError("unsupported NetPBM magic in " + path);
  int w = 0, h = 0, maxval = 0;
  skip_pnm_space(in);
  in >> w;
  skip_pnm_space(in);
  in >> h;
  skip_pnm_space(in);
  in >> maxval;
  in.get();  // single whitespace before raster
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw DataError("malformed NetPBM header in " + path);
  const int channels = magic == "P6" ? 3 : 1;
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw DataError("truncated NetPBM raster in " + path);
  Image img(w, h);
  const float inv = 1.0f / static_cast<float>(maxval);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = (static_cast<std::size_t>(r) * w + c) * channels;
      if (channels == 1) {
        img.at(r, c) = raw[i] * inv;
      } else {
        img.at(r, c) = (0.299f * raw[i] + 0.587f * raw[i + 1] + 0.114f * raw[i + 2]) * inv;
      }
    }
  }
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};

Image load_png_file(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("malformed PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h * channels);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = raw.data() + static_cast<std::size_t>(r) * w * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(static_cast<int>(w), static_cast<int>(h));
  for (png_uint_32 r = 0; r < h; ++r) {
    for (png_uint_32 c = 0; c < w; ++c) {
      const std::size_t i = (static_cast<std::size_t>(r) * w + c) * channels;
      if (channels >= 3) {
        img.at(static_cast<int>(r), static_cast<int>(c)) =
            (0.299f * raw[i] + 0.587f * raw[i + 1] + 0.114f * raw[i + 2]) / 255.0f;
      } else {
        img.at(static_cast<int>(r), static_cast<int>(c)) = raw[i] / 255.0f;
      }
    }
  }
  return img;
}

}  // namespace

Image load_image(const std::string& path) {
  if (has_suffix(path, ".png") || has_suffix(path, ".PNG")) return load_png_file(path);
  if (has_suffix(path, ".pgm") || has_suffix(path, ".ppm")) return load_pnm(path);
  throw DataError("unsupported image extension: " + path);
}

void save_pgm(const Image& img, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write image: " + path);
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<std::uint8_t> raw(img.pixels().size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize8(img.pixels()[i]);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw DataError("short write: " + path);
}

void save_png(const Image& img, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failure: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width()));
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) row[static_cast<std::size_t>(c)] = quantize8(img.at(r, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_image(const Image& img, const std::string& path) {
  if (has_suffix(path, ".png")) {
    save_png(img, path);
  } else if (has_suffix(path, ".pgm")) {
    save_pgm(img, path);
  } else {
    throw DataError("unsupported image extension: " + path);
  }
}

}  // namespace plateflow
