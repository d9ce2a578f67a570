#pragma once

#include "selfvio/image.hpp"

#include <filesystem>

namespace selfvio {

/// Reads an 8-bit PNG (gray, RGB or RGBA) as 3 channels scaled to [-1, 1].
[[nodiscard]] ImageTensor<float> read_png(const std::filesystem::path& path);

/// Writes a 1- or 3-channel image with values in [-1, 1] as 8-bit PNG.
void write_png(const std::filesystem::path& path, const ImageTensor<float>& image);

/// Flat depth file: uint32 H, uint32 W (little endian), then H*W float32 row-major.
[[nodiscard]] DepthMap<float> read_depth_bin(const std::filesystem::path& path);
void write_depth_bin(const std::filesystem::path& path, const DepthMap<float>& depth);

}  // namespace selfvio
