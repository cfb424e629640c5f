#pragma once

#include <filesystem>

#include "randgan/image.hpp"

namespace randgan {

// 8-bit PNG reading (gray, gray+alpha, RGB, RGBA; alpha dropped, palette expanded).
ColorImage read_png(const std::filesystem::path& path);

// Writes an 8-bit grayscale PNG, mapping the image's declared range onto 0..255.
void write_png(const std::filesystem::path& path, const Image& img);
void write_rgb_png(const std::filesystem::path& path, const ColorImage& img);

// Masks are stored as 0 / 255; any value >= 128 reads as foreground.
BinaryMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask);

// Tensor file: ASCII header line "height width range_lo range_hi\n" followed by
// height*width little-endian float32 values in row-major order.
void write_tensor_file(const std::filesystem::path& path, const Image& img);
Image read_tensor_file(const std::filesystem::path& path);

// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace randgan
