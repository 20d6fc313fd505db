#include "dncnn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "dncnn/binary_io.hpp"
#include "dncnn/error.hpp"

namespace dncnn {

ImageGray8::ImageGray8(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw ShapeError("image dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
    pixels.assign(static_cast<std::size_t>(w) * h, fill);
}

ImageGray8::ImageGray8(int w, int h, std::vector<std::uint8_t> px) : width(w), height(h), pixels(std::move(px)) {
    if (w < 1 || h < 1) throw ShapeError("image dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
    if (pixels.size() != static_cast<std::size_t>(w) * h)
        throw ShapeError("image " + std::to_string(w) + "x" + std::to_string(h) + " given " +
                         std::to_string(pixels.size()) + " pixels");
}

namespace {

// ---------------------------------------------------------------- PGM

bool is_pgm(std::span<const std::uint8_t> b) { return b.size() >= 2 && b[0] == 'P' && b[1] == '5'; }

bool is_png(std::span<const std::uint8_t> b) { return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0; }

ImageGray8 decode_pgm(std::span<const std::uint8_t> b, const std::string& name) {
    std::size_t pos = 2;
    auto next_field = [&]() -> long {
        for (;;) {
            while (pos < b.size() && std::isspace(b[pos])) ++pos;
            if (pos < b.size() && b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        if (pos >= b.size() || !std::isdigit(b[pos]))
            throw FormatError(FormatErrorKind::Malformed, name + ": bad PGM header");
        long v = 0;
        while (pos < b.size() && std::isdigit(b[pos])) {
            v = v * 10 + (b[pos++] - '0');
            if (v > 1'000'000) throw FormatError(FormatErrorKind::Malformed, name + ": PGM header value too large");
        }
        return v;
    };
    const long w = next_field(), h = next_field(), maxval = next_field();
    if (w < 1 || h < 1) throw FormatError(FormatErrorKind::Malformed, name + ": PGM has zero size");
    if (maxval > 255)
        throw FormatError(FormatErrorKind::Unsupported, name + ": 16-bit PGM (maxval " + std::to_string(maxval) +
                                                            ") is not supported, need 8-bit");
    if (maxval != 255)
        throw FormatError(FormatErrorKind::Unsupported, name + ": PGM maxval " + std::to_string(maxval) + ", need 255");
    if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(FormatErrorKind::Truncated, name + ": PGM header");
    ++pos;
    const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    if (b.size() - pos < n)
        throw FormatError(FormatErrorKind::Truncated, name + ": PGM holds " + std::to_string(b.size() - pos) +
                                                          " of " + std::to_string(n) + " pixel bytes");
    return ImageGray8(static_cast<int>(w), static_cast<int>(h),
                      std::vector<std::uint8_t>(b.begin() + static_cast<std::ptrdiff_t>(pos),
                                                b.begin() + static_cast<std::ptrdiff_t>(pos + n)));
}

std::vector<std::uint8_t> encode_pnm(const char* magic, int w, int h, std::span<const std::uint8_t> px) {
    const std::string header = std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), px.begin(), px.end());
    return out;
}

// ---------------------------------------------------------------- PNG

ImageGray8 decode_png(std::span<const std::uint8_t> bytes, const std::string& name) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError(FormatErrorKind::Malformed, name + ": " + image.message);
    if (image.format & PNG_FORMAT_FLAG_LINEAR) {
        png_image_free(&image);
        throw FormatError(FormatErrorKind::Unsupported, name + ": 16-bit PNG is not supported, need 8-bit");
    }
    const bool colour = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = colour ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
    std::vector<std::uint8_t> px(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        const bool truncated = msg.find("end of") != std::string::npos || msg.find("EOF") != std::string::npos;
        throw FormatError(truncated ? FormatErrorKind::Truncated : FormatErrorKind::Malformed, name + ": " + msg);
    }
    if (colour) return to_grayscale(px, w, h);
    return ImageGray8(w, h, std::move(px));
}

std::vector<std::uint8_t> encode_png(int w, int h, int channels, std::span<const std::uint8_t> px) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    png_alloc_size_t size = 0;
    if (!png_image_write_get_memory_size(image, size, 0, px.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + image.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr))
        throw IoError(std::string("PNG encoding failed: ") + image.message);
    out.resize(size);
    return out;
}

std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

} // namespace

ImageGray8 decode_image(std::span<const std::uint8_t> bytes, const std::string& name) {
    if (is_png(bytes)) return decode_png(bytes, name);
    if (is_pgm(bytes)) return decode_pgm(bytes, name);
    throw FormatError(FormatErrorKind::Unsupported, name + ": not a PNG or binary PGM (P5) file");
}

ImageGray8 load_image(const std::filesystem::path& path) { return decode_image(read_file(path), path.string()); }

void save_image(const ImageGray8& img, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return write_file_atomic(path, encode_png(img.width, img.height, 1, img.pixels));
    if (ext == ".pgm") return write_file_atomic(path, encode_pnm("P5", img.width, img.height, img.pixels));
    throw std::invalid_argument("cannot save grayscale image as '" + ext + "' (use .png or .pgm)");
}

void save_image(const ImageRgb8& img, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return write_file_atomic(path, encode_png(img.width, img.height, 3, img.pixels));
    if (ext == ".ppm") return write_file_atomic(path, encode_pnm("P6", img.width, img.height, img.pixels));
    throw std::invalid_argument("cannot save colour image as '" + ext + "' (use .png or .ppm)");
}

bool is_image_file(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    return ext == ".png" || ext == ".pgm";
}

ImageGray8 to_grayscale(std::span<const std::uint8_t> rgb, int width, int height) {
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (rgb.size() != 3 * n)
        throw ShapeError("to_grayscale: " + std::to_string(rgb.size()) + " bytes for " + std::to_string(n) + " pixels");
    ImageGray8 out(width, height);
    for (std::size_t i = 0; i < n; ++i) {
        // Integer weights: (299 R + 587 G + 114 B + 500) / 1000 rounds half up exactly.
        const unsigned v = 299u * rgb[3 * i] + 587u * rgb[3 * i + 1] + 114u * rgb[3 * i + 2];
        out.pixels[i] = static_cast<std::uint8_t>((v + 500u) / 1000u);
    }
    return out;
}

ImageGray8 resize_bilinear(const ImageGray8& img, int out_w, int out_h) {
    if (img.width < 2 || img.height < 2)
        throw ShapeError("resize_bilinear: source must be at least 2x2, got " + std::to_string(img.width) + "x" +
                         std::to_string(img.height));
    if (out_w < 1 || out_h < 1) throw ShapeError("resize_bilinear: output size must be >= 1");
    if (out_w == img.width && out_h == img.height) return img;

    auto axis = [](int dst, int src, std::vector<int>& lo, std::vector<double>& frac) {
        lo.resize(static_cast<std::size_t>(dst));
        frac.resize(static_cast<std::size_t>(dst));
        const double scale = static_cast<double>(src) / dst;
        for (int i = 0; i < dst; ++i) {
            const double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
            const int l = std::min(static_cast<int>(std::floor(s)), src - 2);
            lo[static_cast<std::size_t>(i)] = l;
            frac[static_cast<std::size_t>(i)] = s - l;
        }
    };
    std::vector<int> x0, y0;
    std::vector<double> fx, fy;
    axis(out_w, img.width, x0, fx);
    axis(out_h, img.height, y0, fy);

    ImageGray8 out(out_w, out_h);
    for (int y = 0; y < out_h; ++y) {
        const int r = y0[static_cast<std::size_t>(y)];
        const double wy = fy[static_cast<std::size_t>(y)];
        for (int x = 0; x < out_w; ++x) {
            const int c = x0[static_cast<std::size_t>(x)];
            const double wx = fx[static_cast<std::size_t>(x)];
            const double top = img.at(c, r) * (1 - wx) + img.at(c + 1, r) * wx;
            const double bottom = img.at(c, r + 1) * (1 - wx) + img.at(c + 1, r + 1) * wx;
            const double v = top * (1 - wy) + bottom * wy;
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
        }
    }
    return out;
}

ImageGray8 rotate(const ImageGray8& img, int quarter_turns) {
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return img;
    const int w = img.width, h = img.height;
    ImageGray8 out = q == 2 ? ImageGray8(w, h) : ImageGray8(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t v = img.at(x, y);
            switch (q) {
            case 1: out.at(y, w - 1 - x) = v; break;
            case 2: out.at(w - 1 - x, h - 1 - y) = v; break;
            default: out.at(h - 1 - y, x) = v; break;
            }
        }
    return out;
}

} // namespace dncnn
