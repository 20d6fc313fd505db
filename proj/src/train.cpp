#include "dncnn/train.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <random>

#include "dncnn/binary_io.hpp"
#include "dncnn/checkpoint.hpp"
#include "dncnn/dataset.hpp"
#include "dncnn/model.hpp"

namespace dncnn {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (checkpoint_interval < 1) throw std::invalid_argument("checkpoint interval must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(sigma >= 0)) throw std::invalid_argument("sigma must be >= 0");
    if (depth < 3) throw std::invalid_argument("depth must be >= 3");
    if (width < 1) throw std::invalid_argument("width must be >= 1");
    if (lr_decay_epoch && *lr_decay_epoch < 1) throw std::invalid_argument("lr decay epoch must be >= 1");
    if (dataset.empty()) throw std::invalid_argument("no dataset given");
    if (out_dir.empty()) throw std::invalid_argument("no output directory given");
    Optimizer<float> probe(optimizer);  // validates the optimizer settings
}

std::string RunManifest::to_json() const {
    using nlohmann::json;
    json cfg = {
        {"dataset", config.dataset.string()},
        {"out_dir", config.out_dir.string()},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"sigma", config.sigma},
        {"optimizer", to_string(config.optimizer.kind)},
        {"lr", config.optimizer.lr},
        {"momentum", config.optimizer.momentum},
        {"beta2", config.optimizer.beta2},
        {"eps", config.optimizer.eps},
        {"max_grad_norm", config.optimizer.max_grad_norm ? json(*config.optimizer.max_grad_norm) : json(nullptr)},
        {"lr_decay_epoch", config.lr_decay_epoch ? json(*config.lr_decay_epoch) : json(nullptr)},
        {"checkpoint_interval", config.checkpoint_interval},
        {"seed", config.seed},
        {"depth", config.depth},
        {"width", config.width},
    };
    json ep = json::array();
    for (const auto& e : epochs) ep.push_back({{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"seconds", e.seconds}});
    json j = {{"config", cfg},
              {"patch_h", patch_h},
              {"patch_w", patch_w},
              {"patch_count", patch_count},
              {"initial_batch_loss", initial_batch_loss},
              {"epochs", ep},
              {"checkpoints", checkpoints}};
    return j.dump(2) + "\n";
}

std::string checkpoint_filename(int epoch) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "checkpoint_epoch_%04d.dnc", epoch);
    return buf;
}

std::vector<int> checkpoint_epochs(int epochs, int interval) {
    std::vector<int> out;
    for (int e = interval; e <= epochs; e += interval) out.push_back(e);
    if (out.empty() || out.back() != epochs) out.push_back(epochs);
    return out;
}

namespace {

// Seed streams: model init, per-epoch shuffles, per-epoch per-patch noise.
constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;
constexpr std::uint64_t kNoiseStream = 0x4e4f495345ULL;

void write_text_atomic(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace

RunManifest train(TrainConfig config, std::ostream& log) {
    config.validate();
    config.dataset = fs::absolute(config.dataset);
    config.out_dir = fs::absolute(config.out_dir);

    const DatasetContainer data = load_dataset(config.dataset);
    if (data.count() == 0) throw FormatError(FormatErrorKind::Malformed, "dataset container holds no patches");

    RunManifest manifest{config, data.patch_h, data.patch_w, data.count(), 0, {}, {}};
    std::error_code ec;
    fs::create_directories(config.out_dir, ec);
    if (ec) throw IoError("cannot create " + config.out_dir.string() + ": " + ec.message());

    DnCNN<float> model = build_dncnn<float>(config.depth, config.width, 1, config.seed);
    Optimizer<float> optimizer(config.optimizer);
    const LrSchedule schedule{config.optimizer.lr, config.lr_decay_epoch};
    const auto save_at = checkpoint_epochs(config.epochs, config.checkpoint_interval);

    const Index ph = data.patch_h, pw = data.patch_w;
    const std::size_t patch_px = static_cast<std::size_t>(ph * pw);
    const auto sigma = static_cast<float>(config.sigma / 255.0);
    std::vector<std::size_t> order(data.count());

    log << "training depth " << config.depth << ", width " << config.width << " on " << data.count() << " patches of "
        << ph << "x" << pw << " (" << model.trainable_parameter_count() << " parameters)\n";

    bool first_batch = true;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        optimizer.set_learning_rate(schedule.at(epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 shuffle_rng(derive_seed(config.seed ^ kShuffleStream, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        const std::uint64_t noise_seed = derive_seed(config.seed ^ kNoiseStream, static_cast<std::uint64_t>(epoch));

        double loss_sum = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t bs = std::min(order.size() - b0, static_cast<std::size_t>(config.batch_size));
            Tensor4<float> clean(Shape4{static_cast<Index>(bs), 1, ph, pw});
            Tensor4<float> noisy(clean.shape());
            for (std::size_t k = 0; k < bs; ++k) {
                const std::size_t idx = order[b0 + k];
                const auto px = data.patch(idx);
                float* c = clean.data() + k * patch_px;
                float* y = noisy.data() + k * patch_px;
                for (std::size_t i = 0; i < patch_px; ++i) y[i] = c[i] = px[i] / 255.0f;
                if (sigma > 0) {
                    std::mt19937_64 rng(derive_seed(noise_seed, idx));
                    std::normal_distribution<float> noise(0.0f, sigma);
                    for (std::size_t i = 0; i < patch_px; ++i) y[i] += noise(rng);
                }
            }
            auto fwd = forward(model, noisy, Mode::Train);
            auto loss = residual_mse_loss(fwd.prediction.residual, noisy, clean);
            if (first_batch) {
                manifest.initial_batch_loss = loss.report.value;
                first_batch = false;
            }
            loss_sum += loss.report.value * static_cast<double>(bs);
            const auto grads = backward(model, *fwd.cache, loss.grad);
            auto pairs = pair_gradients(model, grads);
            optimizer.step(pairs);
        }

        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const double mean = loss_sum / static_cast<double>(order.size());
        manifest.epochs.push_back({epoch, mean, seconds});
        char line[128];
        std::snprintf(line, sizeof line, "epoch %d/%d  loss %.6f  %.1fs", epoch, config.epochs, mean, seconds);
        log << line;

        if (std::find(save_at.begin(), save_at.end(), epoch) != save_at.end()) {
            const std::string name = checkpoint_filename(epoch);
            save_checkpoint(model, static_cast<std::uint32_t>(epoch), config.out_dir / name);
            manifest.checkpoints.push_back(name);
            write_text_atomic(config.out_dir / kManifestName, manifest.to_json());
            log << "  -> " << name;
        }
        log << "\n" << std::flush;
    }
    return manifest;
}

} // namespace dncnn
