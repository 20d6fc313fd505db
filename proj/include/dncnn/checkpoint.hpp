#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dncnn/model.hpp"

namespace dncnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    DnCNN<float> model;
    std::uint32_t epoch = 0;
};

/// Expected architecture when loading; unset fields are not checked.
struct ArchitectureSpec {
    std::optional<Index> depth;
    std::optional<Index> width;
    std::optional<Index> in_channels;
};

// "DNC1", then u32 version, depth, width, in_channels, epoch, then every layer
// in stack order as raw f32 (weights, bias, and gamma, beta, running_mean,
// running_var where present), then CRC-32 of all preceding bytes. All values
// little-endian.
std::vector<std::uint8_t> encode_checkpoint(const DnCNN<float>& model, std::uint32_t epoch);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const ArchitectureSpec& expect = {});

void save_checkpoint(const DnCNN<float>& model, std::uint32_t epoch, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchitectureSpec& expect = {});

} // namespace dncnn
