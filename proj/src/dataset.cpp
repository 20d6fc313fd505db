#include "dncnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dncnn/binary_io.hpp"
#include "dncnn/error.hpp"

namespace dncnn {

std::string_view to_string(Rotation r) {
    switch (r) {
    case Rotation::R0: return "r0";
    case Rotation::R90: return "r90";
    case Rotation::R180: return "r180";
    case Rotation::R270: return "r270";
    }
    return "r?";
}

Rotation rotation_from_string(std::string_view tag) {
    for (auto r : {Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270})
        if (to_string(r) == tag) return r;
    throw FormatError(FormatErrorKind::Malformed, "unknown augmentation tag '" + std::string(tag) + "'");
}

std::vector<AugmentedImage> augment_dataset(std::span<const SourceImage> images) {
    std::vector<AugmentedImage> out;
    out.reserve(images.size() * 4);
    for (const auto& src : images)
        for (int q = 0; q < 4; ++q) out.push_back({src.name, static_cast<Rotation>(q), rotate(src.image, q)});
    return out;
}

std::vector<int> patch_origins(int extent, int size, int stride) {
    std::vector<int> origins;
    for (int p = 0; p + size <= extent; p += stride) origins.push_back(p);
    if (origins.back() + size < extent) origins.push_back(extent - size);
    return origins;
}

std::vector<ImageGray8> extract_patches(const ImageGray8& img, int size, int stride) {
    if (size < 1 || stride < 1) throw std::invalid_argument("patch size and stride must be >= 1");
    if (size > img.width || size > img.height)
        throw ShapeError("patch size " + std::to_string(size) + " exceeds image " + std::to_string(img.width) + "x" +
                         std::to_string(img.height));
    const auto xs = patch_origins(img.width, size, stride);
    const auto ys = patch_origins(img.height, size, stride);
    std::vector<ImageGray8> patches;
    patches.reserve(xs.size() * ys.size());
    for (int y : ys)
        for (int x : xs) {
            ImageGray8 p(size, size);
            for (int r = 0; r < size; ++r)
                std::copy_n(&img.pixels[static_cast<std::size_t>(y + r) * img.width + x], size,
                            &p.pixels[static_cast<std::size_t>(r) * size]);
            patches.push_back(std::move(p));
        }
    return patches;
}

ImageGray8 add_noise(const ImageGray8& img, const NoiseSpec& spec) {
    if (!(spec.sigma >= 0)) throw std::invalid_argument("noise sigma must be >= 0");
    if (spec.sigma == 0) return img;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.sigma);
    ImageGray8 out = img;
    for (auto& p : out.pixels) p = static_cast<std::uint8_t>(std::clamp(std::floor(p + noise(rng) + 0.5), 0.0, 255.0));
    return out;
}

// ---------------------------------------------------------------- container

namespace {
constexpr std::string_view kMagic = "PAD1";
}

DatasetContainer make_container(std::span<const ImageGray8> patches, std::span<const ManifestEntry> manifest) {
    if (patches.size() != manifest.size())
        throw ShapeError(std::to_string(patches.size()) + " patches but " + std::to_string(manifest.size()) +
                         " manifest entries");
    DatasetContainer c;
    if (!patches.empty()) {
        c.patch_w = patches.front().width;
        c.patch_h = patches.front().height;
    }
    c.payload.reserve(patches.size() * static_cast<std::size_t>(c.patch_w) * c.patch_h);
    for (const auto& p : patches) {
        if (p.width != c.patch_w || p.height != c.patch_h)
            throw ShapeError("patches must share one size; found " + std::to_string(p.width) + "x" +
                             std::to_string(p.height) + " among " + std::to_string(c.patch_w) + "x" +
                             std::to_string(c.patch_h));
        c.payload.insert(c.payload.end(), p.pixels.begin(), p.pixels.end());
    }
    for (const auto& m : manifest)
        if (m.source.find_first_of("\t\n") != std::string::npos)
            throw std::invalid_argument("manifest source names may not contain tabs or newlines: '" + m.source + "'");
    c.manifest.assign(manifest.begin(), manifest.end());
    return c;
}

std::vector<std::uint8_t> encode_container(const DatasetContainer& c) {
    const std::size_t patch_bytes = static_cast<std::size_t>(c.patch_h) * c.patch_w;
    if (c.payload.size() != c.count() * patch_bytes)
        throw ShapeError("container payload holds " + std::to_string(c.payload.size()) + " bytes, expected " +
                         std::to_string(c.count() * patch_bytes));
    std::string manifest;
    for (const auto& m : c.manifest) manifest += m.source + "\t" + std::string(to_string(m.tag)) + "\n";

    ByteWriter out;
    out.magic(kMagic);
    out.u32(kContainerVersion);
    out.u32(static_cast<std::uint32_t>(c.count()));
    out.u32(static_cast<std::uint32_t>(c.patch_h));
    out.u32(static_cast<std::uint32_t>(c.patch_w));
    out.raw(c.payload);
    out.u32(static_cast<std::uint32_t>(manifest.size()));
    out.raw(std::span(reinterpret_cast<const std::uint8_t*>(manifest.data()), manifest.size()));
    out.crc();
    return out.take();
}

DatasetContainer decode_container(std::span<const std::uint8_t> bytes) {
    const std::string what = "dataset container";
    check_magic(bytes, kMagic, what);
    ByteReader in(bytes, what);
    in.take(kMagic.size());
    const std::uint32_t version = in.u32();
    if (version != kContainerVersion)
        throw FormatError(FormatErrorKind::UnsupportedVersion, what + " version " + std::to_string(version));
    const std::uint32_t count = in.u32(), patch_h = in.u32(), patch_w = in.u32();
    if (patch_h > 65536 || patch_w > 65536 || (count > 0 && (patch_h == 0 || patch_w == 0)))
        throw FormatError(FormatErrorKind::Malformed, what + " declares patch size " + std::to_string(patch_h) + "x" +
                                                          std::to_string(patch_w));
    const auto px = in.take(std::size_t{count} * patch_h * patch_w);
    const std::uint32_t manifest_len = in.u32();
    const auto text = in.take(manifest_len);
    check_crc(bytes, in.position(), what);

    DatasetContainer c;
    c.patch_h = static_cast<int>(patch_h);
    c.patch_w = static_cast<int>(patch_w);
    c.payload.assign(px.begin(), px.end());
    std::string_view rest(reinterpret_cast<const char*>(text.data()), text.size());
    while (!rest.empty()) {
        const auto eol = rest.find('\n');
        if (eol == std::string_view::npos) throw FormatError(FormatErrorKind::Malformed, what + ": unterminated manifest line");
        const auto line = rest.substr(0, eol);
        const auto tab = line.rfind('\t');
        if (tab == std::string_view::npos) throw FormatError(FormatErrorKind::Malformed, what + ": manifest line without tag");
        c.manifest.push_back({std::string(line.substr(0, tab)), rotation_from_string(line.substr(tab + 1))});
        rest.remove_prefix(eol + 1);
    }
    if (c.manifest.size() != count)
        throw FormatError(FormatErrorKind::Malformed, what + " lists " + std::to_string(c.manifest.size()) +
                                                          " manifest entries for " + std::to_string(count) + " patches");
    return c;
}

void pack_dataset(std::span<const ImageGray8> patches, std::span<const ManifestEntry> manifest,
                  const std::filesystem::path& path) {
    write_file_atomic(path, encode_container(make_container(patches, manifest)));
}

DatasetContainer load_dataset(const std::filesystem::path& path) { return decode_container(read_file(path)); }

} // namespace dncnn
