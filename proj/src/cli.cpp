#include "dncnn/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "dncnn/binary_io.hpp"
#include "dncnn/checkpoint.hpp"
#include "dncnn/colormap.hpp"
#include "dncnn/dataset.hpp"
#include "dncnn/gradcheck.hpp"
#include "dncnn/metrics.hpp"
#include "dncnn/model.hpp"
#include "dncnn/train.hpp"

namespace dncnn {

namespace fs = std::filesystem;

namespace {

/// Image files directly inside `dir` (or `dir` itself if it is a file), sorted by name.
std::vector<fs::path> list_images(const fs::path& dir) {
    if (fs::is_regular_file(dir)) return {dir};
    if (!fs::is_directory(dir)) throw IoError("no such file or directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
    write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------- prepare-data

struct PrepareOptions {
    fs::path input;
    fs::path out;
    int size = 64;
    int stride = 32;
    int resize = 256;
};

int cmd_prepare_data(const PrepareOptions& o) {
    const auto files = list_images(o.input);
    if (files.empty()) throw IoError("no PNG or PGM images found in " + o.input.string());

    std::vector<SourceImage> sources;
    std::vector<std::string> failures;
    for (const auto& f : files) {
        try {
            sources.push_back({f.filename().string(), resize_bilinear(load_image(f), o.resize, o.resize)});
        } catch (const Error& e) {
            failures.push_back(e.what());
        }
    }
    if (!failures.empty()) {
        std::string msg = std::to_string(failures.size()) + " unreadable image(s):";
        for (const auto& f : failures) msg += "\n  " + f;
        throw IoError(msg);
    }

    const auto augmented = augment_dataset(sources);
    std::cout << sources.size() << " images in, " << augmented.size() << " augmented images\n";

    std::vector<ImageGray8> patches;
    std::vector<ManifestEntry> manifest;
    for (const auto& a : augmented)
        for (auto& p : extract_patches(a.image, o.size, o.stride)) {
            patches.push_back(std::move(p));
            manifest.push_back({a.source, a.tag});
        }
    if (!o.out.parent_path().empty()) ensure_dir(o.out.parent_path());
    pack_dataset(patches, manifest, o.out);
    std::cout << patches.size() << " patches out (" << o.size << "x" << o.size << ", stride " << o.stride << ") -> "
              << o.out.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- add-noise

struct NoiseOptions {
    fs::path input;
    fs::path out;
    double sigma = 25.0;
    std::uint64_t seed = 0;
};

int cmd_add_noise(const NoiseOptions& o) {
    if (!(o.sigma >= 0)) throw std::invalid_argument("--sigma must be >= 0");
    const auto files = list_images(o.input);
    if (files.empty()) throw IoError("no PNG or PGM images found in " + o.input.string());
    std::vector<ImageGray8> images;
    for (const auto& f : files) images.push_back(load_image(f));
    ensure_dir(o.out);
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto noisy = add_noise(images[i], {o.sigma, derive_seed(o.seed, i)});
        save_image(noisy, o.out / files[i].filename());
        std::cout << files[i].filename().string() << "  psnr " << format_db(psnr(noisy, images[i])) << " dB\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- denoise

struct DenoiseOptions {
    fs::path checkpoint;
    fs::path input;
    fs::path out;
    std::optional<Index> depth;
    std::optional<Index> width;
};

int cmd_denoise(const DenoiseOptions& o) {
    const Checkpoint ckpt = load_checkpoint(o.checkpoint, {o.depth, o.width, std::nullopt});
    if (ckpt.model.in_channels() != 1)
        throw FormatError(FormatErrorKind::ArchitectureMismatch,
                          "checkpoint expects " + std::to_string(ckpt.model.in_channels()) + " channels, images have 1");
    const auto files = list_images(o.input);
    if (files.empty()) throw IoError("no PNG or PGM images found in " + o.input.string());
    std::vector<ImageGray8> images;
    for (const auto& f : files) images.push_back(load_image(f));

    ensure_dir(o.out);
    std::string timings = "filename,seconds\n";
    char line[160];
    for (std::size_t i = 0; i < files.size(); ++i) {
        const auto input = image_to_tensor(images[i]);
        const auto start = std::chrono::steady_clock::now();
        const auto prediction = infer(ckpt.model, input);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        save_image(tensor_to_image(prediction.denoised), o.out / files[i].filename());
        std::snprintf(line, sizeof line, "%s,%.6f\n", files[i].filename().string().c_str(), seconds);
        timings += line;
        std::snprintf(line, sizeof line, "%s  %dx%d  %.3fs\n", files[i].filename().string().c_str(), images[i].width,
                      images[i].height, seconds);
        std::cout << line;
    }
    write_text(o.out / "timings.csv", timings);
    return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateOptions {
    fs::path clean;
    fs::path noisy;
    fs::path denoised;
    fs::path out;
    fs::path timings;
};

std::map<std::string, fs::path> by_name(const fs::path& dir) {
    std::map<std::string, fs::path> m;
    for (const auto& f : list_images(dir)) m[f.filename().string()] = f;
    return m;
}

std::map<std::string, double> read_timings(const fs::path& path) {
    std::map<std::string, double> t;
    const auto bytes = read_file(path);
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.rfind(',');
        if (comma == std::string::npos) continue;
        try {
            t[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw FormatError(FormatErrorKind::Malformed, path.string() + ": bad timing line '" + line + "'");
        }
    }
    return t;
}

int cmd_evaluate(const EvaluateOptions& o) {
    const auto clean = by_name(o.clean), noisy = by_name(o.noisy), denoised = by_name(o.denoised);
    std::set<std::string> names;
    for (const auto* m : {&clean, &noisy, &denoised})
        for (const auto& [name, _] : *m) names.insert(name);
    std::vector<std::string> unpaired;
    for (const auto& n : names)
        if (!clean.count(n) || !noisy.count(n) || !denoised.count(n)) unpaired.push_back(n);
    if (!unpaired.empty()) {
        std::string msg = "files not present in all three directories:";
        for (const auto& n : unpaired) msg += " " + n;
        throw IoError(msg);
    }
    if (names.empty()) throw IoError("no images to evaluate in " + o.clean.string());
    const auto timings = o.timings.empty() ? std::map<std::string, double>{} : read_timings(o.timings);

    std::vector<EvaluationRecord> records;
    for (const auto& n : names) {
        const auto it = timings.find(n);
        records.push_back({n, evaluate_pair(load_image(clean.at(n)), load_image(noisy.at(n)), load_image(denoised.at(n)),
                                            it == timings.end() ? 0.0 : it->second)});
    }
    if (!o.out.parent_path().empty()) ensure_dir(o.out.parent_path());
    write_text(o.out, records_csv(records));
    std::cout << summary_table(records);
    return kExitOk;
}

// ---------------------------------------------------------------- train

// CLI11 only reads config files attached to the root app, so the train
// subcommand applies its own: every key names a long option, and a value is
// used only when that option was not given on the command line.
void apply_config_file(CLI::App& cmd, const std::string& path) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_file(path);
    } catch (const CLI::FileError& e) {
        throw IoError(e.what());
    }
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;
        if (!item.parents.empty()) throw std::invalid_argument(path + ": sections are not supported ('" + item.fullname() + "')");
        CLI::Option* op = cmd.get_option_no_throw("--" + item.name);
        if (op == nullptr || item.name == "config")
            throw std::invalid_argument(path + ": unknown key '" + item.name + "'");
        if (op->count() > 0) continue;
        op->add_result(item.inputs);
        try {
            op->run_callback();
        } catch (const CLI::Error& e) {
            throw std::invalid_argument(path + ": " + item.name + ": " + e.what());
        }
    }
}

// ---------------------------------------------------------------- colormap

int cmd_colormap(const fs::path& input, const fs::path& out) {
    save_image(apply_colormap(load_image(input)), out);
    return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckOptions {
    Index depth = 4;
    Index width = 4;
    std::uint64_t seed = 0;
    double tolerance = 1e-3;
    Index size = 8;
    Index batch = 2;
};

int cmd_gradcheck(const GradcheckOptions& o) {
    if (!(o.tolerance > 0)) throw std::invalid_argument("--tolerance must be positive");
    if (o.size < 3 || o.batch < 1) throw std::invalid_argument("--size must be >= 3 and --batch >= 1");
    bool ok = true;
    const double kernel_tol = std::min(kKernelTolerance, o.tolerance);
    char line[160];
    for (const auto& k : {check_conv_kernel(o.seed, kernel_tol), check_relu_kernel(o.seed, kernel_tol),
                          check_batchnorm_kernel(o.seed, kernel_tol)}) {
        std::snprintf(line, sizeof line, "kernel %-10s checked %4ld  max rel err %.3e  %s\n", k.name.c_str(),
                      static_cast<long>(k.checked), k.max_rel_error, k.passed ? "PASS" : "FAIL");
        std::cout << line;
        ok = ok && k.passed;
    }
    const auto model = build_dncnn<double>(o.depth, o.width, 1, o.seed);
    const auto probe = make_probe(o.batch, 1, o.size, o.size, derive_seed(o.seed, 1));
    GradCheckOptions opts;
    opts.seed = o.seed;
    opts.tolerance = o.tolerance;
    const auto report = grad_check(model, probe, opts);
    std::cout << "model depth " << o.depth << ", width " << o.width << ", input " << o.batch << "x1x" << o.size << "x"
              << o.size << "\n"
              << report.text();
    ok = ok && report.passed;
    return ok ? kExitOk : kExitCheckFailed;
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"DnCNN residual denoiser: data preparation, training, inference and evaluation"};
    app.require_subcommand(1);

    PrepareOptions prep;
    auto* prepare = app.add_subcommand("prepare-data", "grayscale, resize, rotate x4, cut patches, pack");
    prepare->add_option("--input", prep.input, "directory of PNG/PGM images")->required();
    prepare->add_option("--out", prep.out, "output container file")->required();
    prepare->add_option("--size", prep.size, "patch size")->check(CLI::PositiveNumber);
    prepare->add_option("--stride", prep.stride, "patch stride")->check(CLI::PositiveNumber);
    prepare->add_option("--resize", prep.resize, "side length images are resized to")->check(CLI::Range(2, 1 << 15));

    TrainConfig cfg;
    std::string optimizer_name = "adam";
    std::optional<int> decay_epoch;
    std::optional<double> max_grad_norm;
    auto* train_cmd = app.add_subcommand("train", "train a model on a packed container");
    std::string train_config;
    train_cmd->add_option("--config", train_config, "key = value configuration file; flags take precedence")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--data", cfg.dataset, "dataset container")->required();
    train_cmd->add_option("--out", cfg.out_dir, "output directory for checkpoints and manifest")->required();
    train_cmd->add_option("--epochs", cfg.epochs)->check(CLI::PositiveNumber);
    train_cmd->add_option("--batch-size", cfg.batch_size)->check(CLI::PositiveNumber);
    train_cmd->add_option("--sigma", cfg.sigma, "noise standard deviation in 8-bit units")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--optimizer", optimizer_name)->check(CLI::IsMember({"adam", "sgd"}));
    train_cmd->add_option("--lr", cfg.optimizer.lr)->check(CLI::PositiveNumber);
    train_cmd->add_option("--momentum", cfg.optimizer.momentum, "SGD momentum or Adam beta1");
    train_cmd->add_option("--lr-decay-epoch", decay_epoch, "multiply the learning rate by 0.1 from this epoch on");
    train_cmd->add_option("--max-grad-norm", max_grad_norm, "clip the global gradient norm");
    train_cmd->add_option("--checkpoint-interval", cfg.checkpoint_interval)->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", cfg.seed);
    train_cmd->add_option("--depth", cfg.depth)->check(CLI::Range(3, 1000));
    train_cmd->add_option("--width", cfg.width)->check(CLI::Range(1, 4096));

    NoiseOptions noise;
    auto* noise_cmd = app.add_subcommand("add-noise", "add seeded white Gaussian noise");
    noise_cmd->add_option("--input", noise.input, "image file or directory")->required();
    noise_cmd->add_option("--out", noise.out, "output directory")->required();
    noise_cmd->add_option("--sigma", noise.sigma)->check(CLI::NonNegativeNumber);
    noise_cmd->add_option("--seed", noise.seed);

    DenoiseOptions den;
    auto* denoise_cmd = app.add_subcommand("denoise", "denoise images with a checkpoint");
    denoise_cmd->add_option("--checkpoint", den.checkpoint)->required();
    denoise_cmd->add_option("--input", den.input, "image file or directory")->required();
    denoise_cmd->add_option("--out", den.out, "output directory")->required();
    denoise_cmd->add_option("--depth", den.depth, "expected depth");
    denoise_cmd->add_option("--width", den.width, "expected width");

    EvaluateOptions ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM of noisy and denoised images against clean ones");
    eval_cmd->add_option("--clean", ev.clean)->required();
    eval_cmd->add_option("--noisy", ev.noisy)->required();
    eval_cmd->add_option("--denoised", ev.denoised)->required();
    eval_cmd->add_option("--out", ev.out, "records file (CSV)")->required();
    eval_cmd->add_option("--timings", ev.timings, "timings.csv written by denoise");

    fs::path cm_in, cm_out;
    auto* cm_cmd = app.add_subcommand("colormap", "render a grayscale image with the hot colormap");
    cm_cmd->add_option("--input", cm_in)->required();
    cm_cmd->add_option("--out", cm_out, ".png or .ppm")->required();

    GradcheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the backward passes");
    gc_cmd->add_option("--depth", gc.depth)->check(CLI::Range(3, 64));
    gc_cmd->add_option("--width", gc.width)->check(CLI::Range(1, 64));
    gc_cmd->add_option("--seed", gc.seed);
    gc_cmd->add_option("--tolerance", gc.tolerance);
    gc_cmd->add_option("--size", gc.size, "probe image side");
    gc_cmd->add_option("--batch", gc.batch, "probe batch size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*prepare) return cmd_prepare_data(prep);
        if (*train_cmd) {
            if (!train_config.empty()) apply_config_file(*train_cmd, train_config);
            cfg.optimizer.kind = optimizer_kind_from_string(optimizer_name);
            cfg.lr_decay_epoch = decay_epoch;
            cfg.optimizer.max_grad_norm = max_grad_norm;
            train(cfg, std::cout);
            return kExitOk;
        }
        if (*noise_cmd) return cmd_add_noise(noise);
        if (*denoise_cmd) return cmd_denoise(den);
        if (*eval_cmd) return cmd_evaluate(ev);
        if (*cm_cmd) return cmd_colormap(cm_in, cm_out);
        if (*gc_cmd) return cmd_gradcheck(gc);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace dncnn
