#include "dncnn/binary_io.hpp"

#include <zlib.h>

#include <fstream>
#include <algorithm>

namespace dncnn {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in chunks.
    constexpr std::size_t chunk = 1u << 30;
    for (std::size_t off = 0; off < bytes.size(); off += chunk) {
        const auto n = std::min(chunk, bytes.size() - off);
        crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    }
    return static_cast<std::uint32_t>(crc);
}

void check_magic(std::span<const std::uint8_t> bytes, std::string_view magic, const std::string& what) {
    if (bytes.size() < magic.size() ||
        !std::equal(magic.begin(), magic.end(), bytes.begin(), [](char a, std::uint8_t b) { return std::uint8_t(a) == b; }))
        throw FormatError(FormatErrorKind::BadMagic, what + " does not start with \"" + std::string(magic) + "\"");
}

void check_crc(std::span<const std::uint8_t> bytes, std::size_t end, const std::string& what) {
    if (bytes.size() < end + 4)
        throw FormatError(FormatErrorKind::Truncated, what + " ends at byte " + std::to_string(bytes.size()) +
                                                          ", needed " + std::to_string(end + 4));
    ByteReader tail(bytes.subspan(end, 4), what);
    const std::uint32_t stored = tail.u32();
    const std::uint32_t actual = crc32(bytes.first(end));
    if (stored != actual)
        throw FormatError(FormatErrorKind::BadChecksum, what + ": stored CRC " + std::to_string(stored) +
                                                            ", computed " + std::to_string(actual));
    if (bytes.size() != end + 4)
        throw FormatError(FormatErrorKind::Malformed,
                          what + " has " + std::to_string(bytes.size() - end - 4) + " trailing bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<std::uint8_t> bytes(size);
    in.seekg(0);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        throw IoError("cannot read " + path.string());
    return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".partial";
    try {
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot create " + tmp.string());
            out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
            out.flush();
            if (!out) throw IoError("write failed for " + tmp.string());
        }
        std::error_code ec;
        fs::rename(tmp, path, ec);
        if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    } catch (...) {
        std::error_code ignored;
        fs::remove(tmp, ignored);
        throw;
    }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace dncnn
