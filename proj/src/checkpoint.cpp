#include "dncnn/checkpoint.hpp"

#include "dncnn/binary_io.hpp"

namespace dncnn {

namespace {

constexpr std::string_view kMagic = "DNC1";

void put(ByteWriter& out, const float* data, Index n) {
    for (Index i = 0; i < n; ++i) out.f32(data[i]);
}

void get(ByteReader& in, float* data, Index n) {
    for (Index i = 0; i < n; ++i) data[i] = in.f32();
}

std::size_t payload_floats(Index depth, Index width, Index in_channels) {
    const auto d = static_cast<std::size_t>(depth), w = static_cast<std::size_t>(width),
               c = static_cast<std::size_t>(in_channels);
    return (c * w * 9 + w) + (d - 2) * (w * w * 9 + w + 4 * w) + (w * c * 9 + c);
}

} // namespace

std::vector<std::uint8_t> encode_checkpoint(const DnCNN<float>& model, std::uint32_t epoch) {
    ByteWriter out;
    out.magic(kMagic);
    out.u32(kCheckpointVersion);
    out.u32(static_cast<std::uint32_t>(model.depth()));
    out.u32(static_cast<std::uint32_t>(model.width()));
    out.u32(static_cast<std::uint32_t>(model.in_channels()));
    out.u32(epoch);
    for (const auto& l : model.layers()) {
        put(out, l.conv.weights.data(), l.conv.weights.size());
        put(out, l.conv.bias.data(), l.conv.bias.size());
        if (l.bn) {
            put(out, l.bn->gamma.data(), l.bn->channels());
            put(out, l.bn->beta.data(), l.bn->channels());
            put(out, l.bn->running_mean.data(), l.bn->channels());
            put(out, l.bn->running_var.data(), l.bn->channels());
        }
    }
    out.crc();
    return out.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchitectureSpec& expect) {
    const std::string what = "checkpoint";
    check_magic(bytes, kMagic, what);
    ByteReader in(bytes, what);
    in.take(kMagic.size());
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw FormatError(FormatErrorKind::UnsupportedVersion, "checkpoint version " + std::to_string(version));
    const Index depth = in.u32(), width = in.u32(), in_channels = in.u32();
    const std::uint32_t epoch = in.u32();

    if (depth < 3 || width < 1 || in_channels < 1 || depth > 100000 || width > 65536 || in_channels > 65536)
        throw FormatError(FormatErrorKind::ArchitectureMismatch,
                          "checkpoint header declares depth " + std::to_string(depth) + ", width " +
                              std::to_string(width) + ", channels " + std::to_string(in_channels));
    auto mismatch = [](const char* field, Index want, Index got) {
        return FormatError(FormatErrorKind::ArchitectureMismatch, std::string("checkpoint ") + field + " is " +
                                                                      std::to_string(got) + ", expected " +
                                                                      std::to_string(want));
    };
    if (expect.depth && *expect.depth != depth) throw mismatch("depth", *expect.depth, depth);
    if (expect.width && *expect.width != width) throw mismatch("width", *expect.width, width);
    if (expect.in_channels && *expect.in_channels != in_channels)
        throw mismatch("in_channels", *expect.in_channels, in_channels);

    const auto body = in.take(payload_floats(depth, width, in_channels) * 4);
    check_crc(bytes, in.position(), what);

    ByteReader params(body, what);
    DnCNN<float> model = build_dncnn<float>(depth, width, in_channels, 0);
    for (auto& l : model.layers()) {
        get(params, l.conv.weights.data(), l.conv.weights.size());
        get(params, l.conv.bias.data(), l.conv.bias.size());
        if (l.bn) {
            get(params, l.bn->gamma.data(), l.bn->channels());
            get(params, l.bn->beta.data(), l.bn->channels());
            get(params, l.bn->running_mean.data(), l.bn->channels());
            get(params, l.bn->running_var.data(), l.bn->channels());
            if ((l.bn->running_var.array() < 0).any() || !l.bn->running_var.allFinite())
                throw FormatError(FormatErrorKind::Malformed, "checkpoint holds an invalid running variance");
        }
    }
    return {std::move(model), epoch};
}

void save_checkpoint(const DnCNN<float>& model, std::uint32_t epoch, const std::filesystem::path& path) {
    write_file_atomic(path, encode_checkpoint(model, epoch));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchitectureSpec& expect) {
    return decode_checkpoint(read_file(path), expect);
}

} // namespace dncnn
