// Copyright 2026 The promptseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "promptseg/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "promptseg/errors.hpp"

namespace promptseg {
namespace {

struct RawImage {
  int width = 0, height = 0, channels = 0, bit_depth = 8;
  std::vector<std::uint8_t> data;  // 16-bit samples stored big-endian as in the file
};

void on_error(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  std::longjmp(png_jmpbuf(png), 1);
}
void on_warning(png_structp, png_const_charp) {}

struct MemoryReader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

void write_to_memory(png_structp png, png_bytep in, png_size_t n) {
  auto* v = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  v->insert(v->end(), in, in + n);
}
void flush_noop(png_structp) {}

// Decodes to gray / gray-alpha / RGB / RGBA at 8 or 16 bits, expanding
// palettes and sub-byte depths.
RawImage decode(FILE* file, const std::vector<std::uint8_t>* bytes, const std::string& where) {
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw IoError(where + ": cannot initialise PNG reader");
  png_infop info = png_create_info_struct(png);
  MemoryReader reader{bytes};
  RawImage out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(where + ": " + (err.empty() ? "invalid PNG" : err));
  }
  if (file) png_init_io(png, file);
  else png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  out.data.resize(stride * out.height);
  rows.resize(out.height);
  for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

RawImage decode_file(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return decode(f.get(), nullptr, path.string());
}

void encode(FILE* file, std::vector<std::uint8_t>* sink, const std::string& where, int width,
            int height, int color_type, int bit_depth, const std::vector<std::uint8_t>& data) {
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw IoError(where + ": cannot initialise PNG writer");
  png_infop info = png_create_info_struct(png);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride = std::size_t(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(where + ": " + (err.empty() ? "PNG encoding failed" : err));
  }
  if (file) png_init_io(png, file);
  else png_set_write_fn(png, sink, write_to_memory, flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(data.data() + stride * y);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void encode_file(const std::filesystem::path& path, int width, int height, int color_type,
                 int bit_depth, const std::vector<std::uint8_t>& data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  encode(f.get(), nullptr, path.string(), width, height, color_type, bit_depth, data);
}

RgbImage to_rgb(const RawImage& raw) {
  RgbImage img(raw.width, raw.height);
  const int step = raw.bit_depth / 8;  // take the high byte of 16-bit samples
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t base = (std::size_t(y) * raw.width + x) * raw.channels * step;
      for (int c = 0; c < 3; ++c) {
        const int src = raw.channels >= 3 ? c : 0;
        img.at(y, x, c) = raw.data[base + src * step];
      }
    }
  return img;
}

BinaryMask to_mask(const RawImage& raw, const std::string& where) {
  if (raw.channels != 1) throw IoError(where + ": mask PNG must be single-channel");
  BinaryMask m(raw.height, raw.width);
  const int step = raw.bit_depth / 8;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    bool on = false;
    for (int b = 0; b < step; ++b) on = on || raw.data[i * step + b] != 0;
    m.data()[i] = on ? 1 : 0;
  }
  return m;
}

std::vector<std::uint8_t> mask_bytes(const BinaryMask& mask) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(mask.size()));
  for (Eigen::Index i = 0; i < mask.size(); ++i) data[i] = mask.data()[i] ? 255 : 0;
  return data;
}

}  // namespace

RgbImage read_rgb_png(const std::filesystem::path& path) { return to_rgb(decode_file(path)); }

RgbImage decode_rgb_png(const std::vector<std::uint8_t>& bytes) {
  return to_rgb(decode(nullptr, &bytes, "inline image"));
}

void write_rgb_png(const std::filesystem::path& path, const RgbImage& image) {
  encode_file(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, image.data);
}

std::vector<std::uint8_t> encode_rgb_png(const RgbImage& image) {
  std::vector<std::uint8_t> out;
  encode(nullptr, &out, "inline image", image.width, image.height, PNG_COLOR_TYPE_RGB, 8,
         image.data);
  return out;
}

void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  encode_file(path, static_cast<int>(mask.cols()), static_cast<int>(mask.rows()),
              PNG_COLOR_TYPE_GRAY, 8, mask_bytes(mask));
}

BinaryMask read_mask_png(const std::filesystem::path& path) {
  return to_mask(decode_file(path), path.string());
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
  std::vector<std::uint8_t> out;
  encode(nullptr, &out, "mask", static_cast<int>(mask.cols()), static_cast<int>(mask.rows()),
         PNG_COLOR_TYPE_GRAY, 8, mask_bytes(mask));
  return out;
}

BinaryMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
  return to_mask(decode(nullptr, &bytes, "mask"), "mask");
}

void write_label_png(const std::filesystem::path& path, const LabelMap& labels) {
  std::vector<std::uint8_t> data(static_cast<std::size_t>(labels.size()) * 2);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const std::int32_t v = labels.data()[i];
    if (v < 0 || v > 65535) throw IoError(path.string() + ": label id out of 16-bit range");
    data[2 * i] = static_cast<std::uint8_t>(v >> 8);
    data[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  encode_file(path, static_cast<int>(labels.cols()), static_cast<int>(labels.rows()),
              PNG_COLOR_TYPE_GRAY, 16, data);
}

LabelMap read_label_png(const std::filesystem::path& path) {
  RawImage raw = decode_file(path);
  if (raw.channels != 1) throw IoError(path.string() + ": label map must be single-channel");
  LabelMap labels(raw.height, raw.width);
  for (Eigen::Index i = 0; i < labels.size(); ++i)
    labels.data()[i] = raw.bit_depth == 16 ? (raw.data[2 * i] << 8) | raw.data[2 * i + 1]
                                           : raw.data[i];
  return labels;
}

std::pair<int, int> png_dimensions(const std::filesystem::path& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
  if (!png) throw IoError(path.string() + ": cannot initialise PNG reader");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(path.string() + ": " + (err.empty() ? "invalid PNG" : err));
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const std::pair<int, int> dims{static_cast<int>(png_get_image_width(png, info)),
                                 static_cast<int>(png_get_image_height(png, info))};
  png_destroy_read_struct(&png, &info, nullptr);
  return dims;
}

}  // namespace promptseg
