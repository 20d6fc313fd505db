#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dncnn/image.hpp"

namespace dncnn {

enum class Rotation : std::uint8_t { R0 = 0, R90 = 1, R180 = 2, R270 = 3 };

/// "r0", "r90", "r180", "r270".
std::string_view to_string(Rotation r);
Rotation rotation_from_string(std::string_view tag);

struct SourceImage {
    std::string name;
    ImageGray8 image;
};

struct AugmentedImage {
    std::string source;
    Rotation tag = Rotation::R0;
    ImageGray8 image;
};

/// Emits r0, r90, r180, r270 for every input, in input order.
std::vector<AugmentedImage> augment_dataset(std::span<const SourceImage> images);

/// All size x size windows at `stride`, raster order. When the stride does
/// not land on the far edge an extra window anchored to it is added, so every
/// pixel is covered.
std::vector<ImageGray8> extract_patches(const ImageGray8& img, int size = 64, int stride = 32);

/// Window origins along one axis as used by extract_patches.
std::vector<int> patch_origins(int extent, int size, int stride);

struct NoiseSpec {
    double sigma = 25.0;  // 8-bit units
    std::uint64_t seed = 0;
};

/// Adds N(0, sigma^2) per pixel, clamps to [0, 255] and rounds.
ImageGray8 add_noise(const ImageGray8& img, const NoiseSpec& spec);

struct ManifestEntry {
    std::string source;
    Rotation tag = Rotation::R0;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Packed training patches. One manifest entry per patch.
struct DatasetContainer {
    int patch_h = 0;
    int patch_w = 0;
    std::vector<std::uint8_t> payload;
    std::vector<ManifestEntry> manifest;

    std::size_t count() const { return manifest.size(); }
    std::span<const std::uint8_t> patch(std::size_t i) const {
        const std::size_t n = static_cast<std::size_t>(patch_h) * patch_w;
        return std::span<const std::uint8_t>(payload).subspan(i * n, n);
    }

    friend bool operator==(const DatasetContainer&, const DatasetContainer&) = default;
};

inline constexpr std::uint32_t kContainerVersion = 1;

DatasetContainer make_container(std::span<const ImageGray8> patches, std::span<const ManifestEntry> manifest);

// "PAD1", version, count, patch_h, patch_w, payload, manifest length + UTF-8
// lines "<source>\t<tag>\n", CRC-32. Integers are little-endian u32.
std::vector<std::uint8_t> encode_container(const DatasetContainer& c);
DatasetContainer decode_container(std::span<const std::uint8_t> bytes);

void pack_dataset(std::span<const ImageGray8> patches, std::span<const ManifestEntry> manifest,
                  const std::filesystem::path& path);
DatasetContainer load_dataset(const std::filesystem::path& path);

} // namespace dncnn
