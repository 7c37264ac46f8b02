#include "kneeflex/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>

#include "kneeflex/error.hpp"

namespace kneeflex {

ImageRGBA::ImageRGBA(int w, int h, Rgba fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ShapeError("image dimensions must be positive");
  pixels.resize(static_cast<std::size_t>(w) * h * 4);
  for (std::size_t i = 0; i < pixels.size(); i += 4) std::copy(fill.begin(), fill.end(), pixels.begin() + i);
}

void ImageRGBA::set(int x, int y, Rgba c) { std::copy(c.begin(), c.end(), at(x, y)); }

Rgba ImageRGBA::get(int x, int y) const {
  const auto* p = at(x, y);
  return {p[0], p[1], p[2], p[3]};
}

// --- PNG ------------------------------------------------------------------

namespace {

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

struct PngErrorContext {
  std::string message;
};

[[noreturn]] void png_record_error(png_structp png, png_const_charp msg) {
  static_cast<PngErrorContext*>(png_get_error_ptr(png))->message = msg;
  png_longjmp(png, 1);
}

void png_warn_silent(png_structp, png_const_charp) {}

struct PngReadSource {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void png_read_from_span(png_structp png, png_bytep data, png_size_t length) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->offset + length > src->bytes.size()) png_error(png, "truncated stream");
  std::copy_n(src->bytes.data() + src->offset, length, data);
  src->offset += length;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_png(const ImageRGBA& img) {
  std::vector<std::uint8_t> out;
  PngErrorContext ctx;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx, png_record_error, png_warn_silent);
  if (!png) throw IoError("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png: " + ctx.message);
  }
  {
    png_set_write_fn(png, &out, png_write_to_vector, png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void write_png(const std::filesystem::path& path, const ImageRGBA& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

ImageRGBA decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
  PngErrorContext ctx;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx, png_record_error, png_warn_silent);
  if (!png) throw IoError("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  PngReadSource src{bytes, 0};
  ImageRGBA img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("png: " + ctx.message);
  }
  {
    png_set_read_fn(png, &src, png_read_from_span);
    png_read_info(png, info);
    const auto color = png_get_color_type(png, info);
    const auto depth = png_get_bit_depth(png, info);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (!(color & PNG_COLOR_MASK_ALPHA) && !png_get_valid(png, info, PNG_INFO_tRNS))
      png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    img = ImageRGBA(static_cast<int>(png_get_image_width(png, info)), static_cast<int>(png_get_image_height(png, info)));
    rows.resize(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = img.at(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// --- JPEG -----------------------------------------------------------------

namespace {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

}  // namespace

ImageRGBA decode_jpeg(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  std::vector<std::uint8_t> rgb;
  int width = 0;
  int height = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw FormatError(std::string("jpeg: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  rgb.resize(static_cast<std::size_t>(width) * height * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);

  ImageRGBA img(width, height);
  for (std::size_t i = 0, n = static_cast<std::size_t>(width) * height; i < n; ++i) {
    img.pixels[i * 4 + 0] = rgb[i * 3 + 0];
    img.pixels[i * 4 + 1] = rgb[i * 3 + 1];
    img.pixels[i * 4 + 2] = rgb[i * 3 + 2];
    img.pixels[i * 4 + 3] = 255;
  }
  return img;
}

ImageRGBA read_image(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes);
  throw FormatError("unsupported image format: " + path.string());
}

// --- resampling -----------------------------------------------------------

namespace {

struct AxisTap {
  int index;
  float weight;
};

// Resampling taps for one output coordinate along one axis.
std::vector<std::vector<AxisTap>> axis_taps(int src_len, int dst_len) {
  std::vector<std::vector<AxisTap>> taps(static_cast<std::size_t>(dst_len));
  const double scale = static_cast<double>(src_len) / dst_len;
  for (int o = 0; o < dst_len; ++o) {
    auto& t = taps[static_cast<std::size_t>(o)];
    if (scale > 1.0) {
      // Box filter over the source interval covered by this output pixel.
      const double lo = o * scale;
      const double hi = lo + scale;
      double total = 0.0;
      for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)); ++s) {
        const double w = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
        if (w <= 0) continue;
        t.push_back({std::clamp(s, 0, src_len - 1), static_cast<float>(w)});
        total += w;
      }
      for (auto& tap : t) tap.weight = static_cast<float>(tap.weight / total);
    } else {
      const double c = (o + 0.5) * scale - 0.5;
      const int i0 = static_cast<int>(std::floor(c));
      const double f = c - i0;
      t.push_back({std::clamp(i0, 0, src_len - 1), static_cast<float>(1.0 - f)});
      t.push_back({std::clamp(i0 + 1, 0, src_len - 1), static_cast<float>(f)});
    }
  }
  return taps;
}

}  // namespace

ImageRGBA resize(const ImageRGBA& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  const auto xt = axis_taps(src.width, width);
  const auto yt = axis_taps(src.height, height);
  // Horizontal pass into float, then vertical.
  std::vector<float> tmp(static_cast<std::size_t>(width) * src.height * 4, 0.0f);
  for (int y = 0; y < src.height; ++y)
    for (int x = 0; x < width; ++x)
      for (const auto& tap : xt[static_cast<std::size_t>(x)])
        for (int c = 0; c < 4; ++c)
          tmp[(static_cast<std::size_t>(y) * width + x) * 4 + c] += tap.weight * src.at(tap.index, y)[c];
  ImageRGBA out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < 4; ++c) {
        float acc = 0.0f;
        for (const auto& tap : yt[static_cast<std::size_t>(y)])
          acc += tap.weight * tmp[(static_cast<std::size_t>(tap.index) * width + x) * 4 + c];
        out.at(x, y)[c] = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
      }
  return out;
}

ImageRGBA center_crop_to_aspect(const ImageRGBA& src, int width, int height) {
  // Compare src.w / src.h against width / height without floating point.
  const long lhs = static_cast<long>(src.width) * height;
  const long rhs = static_cast<long>(src.height) * width;
  int cw = src.width;
  int ch = src.height;
  if (lhs > rhs) {
    cw = static_cast<int>(rhs / height);
  } else if (lhs < rhs) {
    ch = static_cast<int>(lhs / width);
  }
  cw = std::max(cw, 1);
  ch = std::max(ch, 1);
  if (cw == src.width && ch == src.height) return src;
  const int x0 = (src.width - cw) / 2;
  const int y0 = (src.height - ch) / 2;
  ImageRGBA out(cw, ch);
  for (int y = 0; y < ch; ++y) std::copy_n(src.at(x0, y0 + y), static_cast<std::size_t>(cw) * 4, out.at(0, y));
  return out;
}

std::vector<float> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) return {1.0f};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  std::vector<float> out(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) out[i] = static_cast<float>(k[i] / total);
  return out;
}

void gaussian_blur_plane(std::span<float> plane, int width, int height, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  if (r == 0) return;
  std::vector<float> tmp(plane.size());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * plane[static_cast<std::size_t>(y) * width + std::clamp(x + i, 0, width - 1)];
      tmp[static_cast<std::size_t>(y) * width + x] = acc;
    }
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      float acc = 0.0f;
      for (int i = -r; i <= r; ++i)
        acc += k[static_cast<std::size_t>(i + r)] * tmp[static_cast<std::size_t>(std::clamp(y + i, 0, height - 1)) * width + x];
      plane[static_cast<std::size_t>(y) * width + x] = acc;
    }
}

ImageRGBA gaussian_blur(const ImageRGBA& src, double sigma) {
  ImageRGBA out = src;
  std::vector<float> plane(static_cast<std::size_t>(src.width) * src.height);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = src.pixels[i * 4 + c];
    gaussian_blur_plane(plane, src.width, src.height, sigma);
    for (std::size_t i = 0; i < plane.size(); ++i)
      out.pixels[i * 4 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(plane[i]), 0L, 255L));
  }
  return out;
}

}  // namespace kneeflex
