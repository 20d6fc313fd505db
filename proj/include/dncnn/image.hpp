#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace dncnn {

/// 8-bit single-channel raster, row-major.
struct ImageGray8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    ImageGray8() = default;
    ImageGray8(int w, int h, std::uint8_t fill = 0);
    ImageGray8(int w, int h, std::vector<std::uint8_t> px);

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const ImageGray8&, const ImageGray8&) = default;
};

/// 8-bit interleaved RGB raster, row-major.
struct ImageRgb8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // r, g, b per pixel

    friend bool operator==(const ImageRgb8&, const ImageRgb8&) = default;
};

/// Reads an 8-bit grayscale PNG or binary PGM (P5, maxval 255). Colour PNGs
/// are converted with to_grayscale; 16-bit data is rejected.
ImageGray8 load_image(const std::filesystem::path& path);
ImageGray8 decode_image(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

/// Format follows the extension: .png or .pgm. The write is atomic.
void save_image(const ImageGray8& img, const std::filesystem::path& path);
/// .png or .ppm.
void save_image(const ImageRgb8& img, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

/// luma = round(0.299 R + 0.587 G + 0.114 B) on interleaved 8-bit RGB.
ImageGray8 to_grayscale(std::span<const std::uint8_t> rgb, int width, int height);

/// Bilinear resampling with half-pixel centres and clamped edges.
ImageGray8 resize_bilinear(const ImageGray8& img, int out_w = 256, int out_h = 256);

/// Lossless counter-clockwise rotation by quarter_turns * 90 degrees.
ImageGray8 rotate(const ImageGray8& img, int quarter_turns);

} // namespace dncnn
