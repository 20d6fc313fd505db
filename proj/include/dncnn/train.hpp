#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dncnn/optim.hpp"
#include "dncnn/tensor.hpp"

namespace dncnn {

struct TrainConfig {
    std::filesystem::path dataset;
    std::filesystem::path out_dir;
    int epochs = 10;
    int batch_size = 16;
    double sigma = 25.0;  // 8-bit units
    OptimizerConfig optimizer;
    std::optional<int> lr_decay_epoch;
    int checkpoint_interval = 5;
    std::uint64_t seed = 0;
    Index depth = 20;
    Index width = 64;

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double mean_loss = 0;
    double seconds = 0;
};

struct RunManifest {
    TrainConfig config;
    int patch_h = 0;
    int patch_w = 0;
    std::size_t patch_count = 0;
    double initial_batch_loss = 0;  // first minibatch, before any update
    std::vector<EpochRecord> epochs;
    std::vector<std::string> checkpoints;

    std::string to_json() const;
};

inline constexpr const char* kManifestName = "manifest.json";

std::string checkpoint_filename(int epoch);

/// Every `interval`-th epoch plus the final one.
std::vector<int> checkpoint_epochs(int epochs, int interval);

/// Minibatch training on (clean patch, clean patch + fresh AWGN) pairs.
/// Writes checkpoints and the manifest into config.out_dir. The dataset is
/// fully validated before anything is written.
RunManifest train(TrainConfig config, std::ostream& log);

} // namespace dncnn
