#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dncnn/error.hpp"

namespace dncnn {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Appends little-endian fields to a byte buffer.
class ByteWriter {
public:
    void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

    /// Appends the CRC-32 of everything written so far.
    void crc() { u32(crc32(bytes_)); }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; overruns raise FormatError(Truncated).
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    std::uint32_t u32() {
        auto b = take(4);
        return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > bytes_.size() - pos_)
            throw FormatError(FormatErrorKind::Truncated, what_ + " ends at byte " + std::to_string(bytes_.size()) +
                                                              ", needed " + std::to_string(pos_ + n));
        auto out = bytes_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    std::size_t position() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string what_;
};

// Framed files are read front to back: magic, header, the body the header
// declares, then a CRC-32 of everything before it. Running out of bytes on
// the way is Truncated; the CRC is checked before the body is interpreted.
void check_magic(std::span<const std::uint8_t> bytes, std::string_view magic, const std::string& what);
/// CRC-32 stored at bytes[end, end + 4) must match bytes[0, end) and close the file.
void check_crc(std::span<const std::uint8_t> bytes, std::size_t end, const std::string& what);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`; on failure
/// the temporary is removed and IoError is thrown.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Mixes a run seed with an item index (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

} // namespace dncnn
