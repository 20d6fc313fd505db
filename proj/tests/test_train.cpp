#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "dncnn/binary_io.hpp"
#include "dncnn/checkpoint.hpp"
#include "dncnn/dataset.hpp"
#include "dncnn/train.hpp"
#include "support/synthetic.hpp"

using namespace dncnn;
namespace fs = std::filesystem;

namespace {

void write_dataset(const fs::path& path, int images, int patch) {
    std::vector<ImageGray8> patches;
    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < images; ++i)
        for (auto& p : extract_patches(synth::scene(32, 32, static_cast<std::uint64_t>(i)), patch, patch)) {
            patches.push_back(std::move(p));
            manifest.push_back({"s" + std::to_string(i) + ".png", Rotation::R0});
        }
    pack_dataset(patches, manifest, path);
}

TrainConfig small_config(const fs::path& data, const fs::path& out) {
    TrainConfig c;
    c.dataset = data;
    c.out_dir = out;
    c.epochs = 3;
    c.batch_size = 4;
    c.checkpoint_interval = 2;
    c.depth = 4;
    c.width = 6;
    c.seed = 11;
    return c;
}

} // namespace

TEST_CASE("checkpoint epochs") {
    CHECK(checkpoint_epochs(10, 5) == std::vector<int>{5, 10});
    CHECK(checkpoint_epochs(7, 3) == std::vector<int>{3, 6, 7});
    CHECK(checkpoint_epochs(3, 5) == std::vector<int>{3});
    CHECK(checkpoint_epochs(4, 1) == std::vector<int>{1, 2, 3, 4});
    for (int e = 1; e <= 12; ++e)
        for (int i = 1; i <= 12; ++i) {
            const std::size_t expected = e % i == 0 ? static_cast<std::size_t>(e / i) : static_cast<std::size_t>(e / i + 1);
            CHECK(checkpoint_epochs(e, i).size() == expected);
        }
    CHECK(checkpoint_filename(5) == "checkpoint_epoch_0005.dnc");
}

TEST_CASE("config validation") {
    TrainConfig c = small_config("d.pad", "out");
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config("d.pad", "out");
    c.checkpoint_interval = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config("d.pad", "out");
    c.optimizer.lr = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config("d.pad", "out");
    c.depth = 2;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("train: checkpoints, manifest, determinism") {
    synth::TempDir dir("train");
    write_dataset(dir / "d.pad", 3, 16);

    std::ostringstream log;
    const auto m1 = train(small_config(dir / "d.pad", dir / "a"), log);
    CHECK(m1.patch_count == 12);
    CHECK(m1.patch_h == 16);
    REQUIRE(m1.epochs.size() == 3);
    CHECK(m1.checkpoints == std::vector<std::string>{"checkpoint_epoch_0002.dnc", "checkpoint_epoch_0003.dnc"});
    CHECK(fs::exists(dir / "a" / "checkpoint_epoch_0002.dnc"));
    CHECK(fs::exists(dir / "a" / "checkpoint_epoch_0003.dnc"));
    CHECK(!fs::exists(dir / "a" / "checkpoint_epoch_0001.dnc"));
    CHECK(log.str().find("epoch 3/3") != std::string::npos);

    const auto bytes = read_file(dir / "a" / kManifestName);
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    CHECK(j["epochs"].size() == 3);
    CHECK(j["checkpoints"].size() == 2);
    CHECK(j["config"]["seed"] == 11);
    CHECK(j["config"]["optimizer"] == "adam");
    CHECK(fs::path(j["config"]["dataset"].get<std::string>()).is_absolute());
    CHECK(j["epochs"][0]["mean_loss"].get<double>() == m1.epochs[0].mean_loss);

    const auto ck = load_checkpoint(dir / "a" / "checkpoint_epoch_0003.dnc");
    CHECK(ck.epoch == 3);
    CHECK(ck.model.depth() == 4);

    std::ostringstream quiet;
    const auto m2 = train(small_config(dir / "d.pad", dir / "b"), quiet);
    for (std::size_t e = 0; e < 3; ++e) CHECK(m2.epochs[e].mean_loss == m1.epochs[e].mean_loss);
    CHECK(m2.initial_batch_loss == m1.initial_batch_loss);
    for (const char* name : {"checkpoint_epoch_0002.dnc", "checkpoint_epoch_0003.dnc"})
        CHECK(read_file(dir / "a" / name) == read_file(dir / "b" / name));

    // A shorter run reproduces the same epoch-2 state.
    auto shorter = small_config(dir / "d.pad", dir / "c");
    shorter.epochs = 2;
    train(shorter, quiet);
    CHECK(read_file(dir / "c" / "checkpoint_epoch_0002.dnc") == read_file(dir / "a" / "checkpoint_epoch_0002.dnc"));

    auto other_seed = small_config(dir / "d.pad", dir / "d");
    other_seed.seed = 12;
    CHECK(train(other_seed, quiet).epochs[0].mean_loss != m1.epochs[0].mean_loss);
}

TEST_CASE("train: loss falls and sgd path runs") {
    synth::TempDir dir("train_loss");
    write_dataset(dir / "d.pad", 4, 16);
    auto c = small_config(dir / "d.pad", dir / "out");
    c.epochs = 4;
    std::ostringstream log;
    const auto m = train(c, log);
    CHECK(m.epochs.front().mean_loss < m.initial_batch_loss);
    CHECK(m.epochs.back().mean_loss < m.epochs.front().mean_loss);

    c.out_dir = dir / "sgd";
    c.optimizer.kind = OptimizerKind::SgdMomentum;
    c.optimizer.lr = 1e-4;
    c.optimizer.max_grad_norm = 10.0;
    c.lr_decay_epoch = 3;
    const auto s = train(c, log);
    CHECK(s.epochs.size() == 4);
    for (const auto& e : s.epochs) CHECK(std::isfinite(e.mean_loss));
}

TEST_CASE("train: bad container aborts before anything is written") {
    synth::TempDir dir("train_bad");
    write_dataset(dir / "d.pad", 1, 16);
    auto bytes = read_file(dir / "d.pad");
    bytes[bytes.size() / 2] ^= 0x40;
    write_file_atomic(dir / "bad.pad", bytes);
    std::ostringstream log;
    CHECK_THROWS_AS(train(small_config(dir / "bad.pad", dir / "out"), log), FormatError);
    CHECK(!fs::exists(dir / "out"));
    CHECK_THROWS_AS(train(small_config(dir / "none.pad", dir / "out"), log), IoError);
    CHECK(!fs::exists(dir / "out"));
}

TEST_CASE("train: write failure leaves no partial files") {
    synth::TempDir dir("train_io");
    write_dataset(dir / "d.pad", 1, 16);
    fs::create_directories(dir / "out" / "checkpoint_epoch_0002.dnc" / "blocker");
    std::ostringstream log;
    CHECK_THROWS_AS(train(small_config(dir / "d.pad", dir / "out"), log), IoError);
    for (const auto& e : fs::directory_iterator(dir / "out")) CHECK(e.path().extension() != ".partial");
}
