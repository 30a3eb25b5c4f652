#pragma once

#include <png.h>
#include <zlib.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "awapd/error.hpp"
#include "awapd/image.hpp"
#include "awapd/waveform.hpp"

namespace awapd {

namespace detail {

inline void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(char(v >> 24));
  out.push_back(char(v >> 16));
  out.push_back(char(v >> 8));
  out.push_back(char(v));
}

inline void put_chunk(std::string& out, const char type[4], std::string_view data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t crc_start = out.size();
  out.append(type, 4);
  out.append(data);
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data() + crc_start),
                         static_cast<uInt>(out.size() - crc_start));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

// 8-bit RGB, non-interlaced, filter type 0 on every row, zlib level 6, and no
// ancillary chunks: output is a pure function of the pixels.
inline std::string encode_png(const RgbImage& img) {
  const std::size_t stride = std::size_t(img.width) * 3;
  std::vector<std::uint8_t> raw((stride + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    raw[y * (stride + 1)] = 0;
    std::memcpy(&raw[y * (stride + 1) + 1], &img.pixels[y * stride], stride);
  }
  uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> z(zlen);
  if (compress2(z.data(), &zlen, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw IoError("png: deflate failed");
  }
  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.width));
  detail::put_be32(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // depth 8, RGB, deflate, filter 0, no interlace
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", std::string_view(reinterpret_cast<const char*>(z.data()), zlen));
  detail::put_chunk(out, "IEND", {});
  return out;
}

// Decodes any PNG libpng understands into 8-bit RGB (alpha composited on white).
inline RgbImage decode_png(std::string_view bytes) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw MalformedInput(std::string("png: ") + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  png_color white{255, 255, 255};
  if (!png_image_finish_read(&image, &white, out.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw MalformedInput("png: " + msg);
  }
  return out;
}

inline void write_png(const RgbImage& img, const std::filesystem::path& path) {
  detail::write_file(path, encode_png(img));
}

inline RgbImage read_png(const std::filesystem::path& path) { return decode_png(detail::read_file(path)); }

}  // namespace awapd
