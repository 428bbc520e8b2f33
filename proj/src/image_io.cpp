// Copyright 2026 The DDAP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ddap/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "ddap/errors.hpp"

namespace ddap {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

torch::Tensor quantize_8bit(const torch::Tensor& image) {
  return torch::round(image.to(torch::kDouble).clamp(0.0, 1.0) * 255.0) / 255.0;
}

void write_png(const std::string& path, const torch::Tensor& image) {
  const bool gray = image.dim() == 2;
  if (!gray && !(image.dim() == 3 && image.size(0) == 3)) {
    throw ArgumentError("write_png expects [3,H,W] or [H,W]");
  }
  const int channels = gray ? 1 : 3;
  const int h = int(image.size(gray ? 0 : 1));
  const int w = int(image.size(gray ? 1 : 2));
  auto hwc = (gray ? image.unsqueeze(0) : image)
                 .detach()
                 .to(torch::kDouble)
                 .clamp(0.0, 1.0)
                 .mul(255.0)
                 .round()
                 .to(torch::kUInt8)
                 .permute({1, 2, 0})
                 .contiguous();

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open '" + path + "' for writing");
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8,
               gray ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto* data = hwc.data_ptr<uint8_t>();
  for (int y = 0; y < h; ++y) {
    png_write_row(png, data + size_t(y) * size_t(w) * size_t(channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

torch::Tensor read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open '" + path + "'");
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed reading PNG '" + path + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const auto color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool gray = (color & PNG_COLOR_MASK_COLOR) == 0 &&
                    color != PNG_COLOR_TYPE_PALETTE;
  if (gray) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  std::vector<uint8_t> buf(size_t(w) * size_t(h) * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, buf.data() + size_t(y) * w * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  auto t = torch::from_blob(buf.data(), {int64_t(h), int64_t(w), 3},
                            torch::kUInt8)
               .permute({2, 0, 1})
               .to(torch::kDouble)
               .div(255.0)
               .contiguous();
  return t;
}

}  // namespace ddap
