#include "dncnn/colormap.hpp"

#include <algorithm>
#include <cmath>

namespace dncnn {

namespace {

std::uint8_t ramp(int v, int start, int end) {
    const double t = std::round((v - start) * 255.0 / (end - start));
    return static_cast<std::uint8_t>(std::clamp(t, 0.0, 255.0));
}

std::array<Rgb, 256> build_hot() {
    std::array<Rgb, 256> t{};
    for (int v = 0; v < 256; ++v) t[static_cast<std::size_t>(v)] = {ramp(v, 0, 95), ramp(v, 96, 191), ramp(v, 192, 255)};
    return t;
}

} // namespace

const std::array<Rgb, 256>& hot_colormap() {
    static const std::array<Rgb, 256> table = build_hot();
    return table;
}

ImageRgb8 apply_colormap(const ImageGray8& img, const std::array<Rgb, 256>& table) {
    ImageRgb8 out{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size() * 3)};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const Rgb c = table[img.pixels[i]];
        out.pixels[3 * i] = c.r;
        out.pixels[3 * i + 1] = c.g;
        out.pixels[3 * i + 2] = c.b;
    }
    return out;
}

} // namespace dncnn
