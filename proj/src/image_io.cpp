// Copyright 2026 The phocnet-cpp Authors
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

#include "phocnet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace phocnet {
namespace {

constexpr std::size_t kMaxDimension = 1u << 16;

class PgmReader {
 public:
  PgmReader(std::span<const std::uint8_t> bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  Tensor<float> read() {
    pos_ = 2;  // "P5" already checked
    const std::size_t width = number("width");
    const std::size_t height = number("height");
    const std::size_t maxval = number("maxval");
    if (width == 0 || height == 0) fail("zero image dimension");
    if (width > kMaxDimension || height > kMaxDimension) fail("image dimension too large");
    if (maxval == 0 || maxval > 65535) fail("maxval " + std::to_string(maxval) + " out of range");
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("corrupt header");
    ++pos_;
    const std::size_t bpp = maxval < 256 ? 1 : 2;
    if (bytes_.size() - pos_ < width * height * bpp) fail("truncated pixel data");
    Tensor<float> image(1, height, width);
    const double scale = static_cast<double>(maxval);
    for (std::size_t i = 0; i < width * height; ++i) {
      std::size_t v = bytes_[pos_ + i * bpp];
      if (bpp == 2) v = (v << 8) | bytes_[pos_ + i * bpp + 1];
      if (v > maxval) fail("sample exceeds maxval");
      image[i] = static_cast<float>(1.0 - static_cast<double>(v) / scale);
    }
    return image;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ImageError(name_ + ": " + what); }

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* field) {
    skip_space();
    std::size_t value = 0, digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_++] - '0');
      if (value > std::numeric_limits<std::uint32_t>::max()) fail(std::string("corrupt header (") + field + ")");
      ++digits;
    }
    if (digits == 0) fail(std::string("corrupt header (") + field + ")");
    return value;
  }

  std::span<const std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

struct PngBuffer {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_span(png_structp png, png_bytep out, png_size_t n) {
  auto* buf = static_cast<PngBuffer*>(png_get_io_ptr(png));
  if (buf->bytes.size() - buf->pos < n) png_error(png, "truncated data");
  std::memcpy(out, buf->bytes.data() + buf->pos, n);
  buf->pos += n;
}

void png_error_handler(png_structp png, png_const_charp message) {
  auto* error = static_cast<std::string*>(png_get_error_ptr(png));
  *error = message;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Tensor<float> decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_handler, png_warning_handler);
  if (png == nullptr) throw ImageError(name + ": cannot initialise PNG decoder");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError(name + ": cannot initialise PNG decoder");
  }
  PngBuffer buffer{bytes, 0};
  Tensor<float> image;
  std::vector<png_byte> row;
  std::string unsupported;
  if (setjmp(png_jmpbuf(png)) == 0) {
    png_set_read_fn(png, &buffer, png_read_span);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    const int interlace = png_get_interlace_type(png, info);
    if (color != PNG_COLOR_TYPE_GRAY || depth != 8 || interlace != PNG_INTERLACE_NONE) {
      unsupported = "only 8-bit grayscale non-interlaced PNG is supported";
    } else if (width == 0 || height == 0) {
      unsupported = "zero image dimension";
    } else if (width > kMaxDimension || height > kMaxDimension) {
      unsupported = "image dimension too large";
    } else {
      image = Tensor<float>(1, height, width);
      row.resize(width);
      for (png_uint_32 y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < width; ++x) {
          image.at(0, y, x) = static_cast<float>(1.0 - static_cast<double>(row[x]) / 255.0);
        }
      }
    }
  } else {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError(name + ": corrupt PNG (" + error + ")");
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!unsupported.empty()) throw ImageError(name + ": " + unsupported);
  return image;
}

}  // namespace

Tensor<float> decode_image(std::span<const std::uint8_t> bytes, const std::string& name) {
  static constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8, kPngSignature)) {
    return decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return PgmReader(bytes, name).read();
  throw ImageError(name + ": unsupported image format (expected binary PGM or PNG)");
}

Tensor<float> load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError(path.string() + ": cannot open image");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_image(bytes, path.string());
}

std::vector<std::uint8_t> encode_pgm(const Tensor<float>& image) {
  if (image.channels() != 1 || image.empty()) throw ImageError("encode_pgm: expected a non-empty 1-channel image");
  const std::string header =
      "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const float v = image[i];
    if (!(v >= 0.0f && v <= 1.0f)) throw ImageError("encode_pgm: pixel value outside [0, 1]");
    out.push_back(static_cast<std::uint8_t>(std::lround((1.0 - static_cast<double>(v)) * 255.0)));
  }
  return out;
}

void save_pgm(const Tensor<float>& image, const std::filesystem::path& path) {
  const auto bytes = encode_pgm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError(path.string() + ": cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError(path.string() + ": write failed");
}

}  // namespace phocnet
