#pragma once

#include <filesystem>

#include "dropletforge/raster.hpp"

namespace dropletforge {

// 8-bit PNG <-> [0,1] by /255. Grayscale files load as R = G = B.
ColorImage read_color_png(const std::filesystem::path& path);
void write_color_png(const std::filesystem::path& path, const ColorImage& img);
void write_gray_png(const std::filesystem::path& path, const GrayImage& img);

BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

// 16-bit label image: 0 = background, k = instance k.
LabelImage read_label_png(const std::filesystem::path& path);
void write_label_png(const std::filesystem::path& path, const LabelImage& labels);

}  // namespace dropletforge
