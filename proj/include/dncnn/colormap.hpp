#pragma once

#include <array>
#include <cstdint>

#include "dncnn/image.hpp"

namespace dncnn {

struct Rgb {
    std::uint8_t r, g, b;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// "Hot" ramp, black -> red -> yellow -> white:
///   red   rises 0..255 over gray 0..95,
///   green rises 0..255 over gray 96..191,
///   blue  rises 0..255 over gray 192..255,
/// each channel round((v - start) * 255 / (end - start)) clamped to [0, 255].
const std::array<Rgb, 256>& hot_colormap();

ImageRgb8 apply_colormap(const ImageGray8& img, const std::array<Rgb, 256>& table = hot_colormap());

} // namespace dncnn
