#include "selfvio/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace selfvio {

ImageTensor<float> read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
  }
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  ImageTensor<float> out(3, h, w);
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < 3; ++c)
        out[c](v, u) = static_cast<float>(buffer[static_cast<std::size_t>((v * w + u) * 3 + c)]) / 127.5f - 1.0f;
  return out;
}

void write_png(const std::filesystem::path& path, const ImageTensor<float>& image) {
  const int ch = image.channel_count();
  if (ch != 1 && ch != 3) throw std::invalid_argument("write_png: need 1 or 3 channels");
  const int h = image.height(), w = image.width();
  std::vector<png_byte> buffer(static_cast<std::size_t>(h * w * ch));
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u)
      for (int c = 0; c < ch; ++c) {
        const float x = std::clamp((image[c](v, u) + 1.0f) * 127.5f, 0.0f, 255.0f);
        buffer[static_cast<std::size_t>((v * w + u) * ch + c)] = static_cast<png_byte>(std::lround(x));
      }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr))
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
}

namespace {

static_assert(std::endian::native == std::endian::little, "depth files assume a little-endian host");

}  // namespace

DepthMap<float> read_depth_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open depth file: " + path.string());
  std::array<std::uint32_t, 2> header{};
  in.read(reinterpret_cast<char*>(header.data()), sizeof(header));
  if (!in || header[0] == 0 || header[1] == 0 || header[0] > 65536 || header[1] > 65536)
    throw std::runtime_error("bad depth header: " + path.string());
  DepthMap<float> depth(header[0], header[1]);
  in.read(reinterpret_cast<char*>(depth.data()), static_cast<std::streamsize>(depth.size() * sizeof(float)));
  if (!in) throw std::runtime_error("truncated depth file: " + path.string());
  return depth;
}

void write_depth_bin(const std::filesystem::path& path, const DepthMap<float>& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write depth file: " + path.string());
  const std::array<std::uint32_t, 2> header{static_cast<std::uint32_t>(depth.rows()),
                                            static_cast<std::uint32_t>(depth.cols())};
  out.write(reinterpret_cast<const char*>(header.data()), sizeof(header));
  out.write(reinterpret_cast<const char*>(depth.data()), static_cast<std::streamsize>(depth.size() * sizeof(float)));
  if (!out) throw std::runtime_error("failed writing depth file: " + path.string());
}

}  // namespace selfvio
