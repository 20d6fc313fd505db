#include "dncnn/metrics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dncnn/error.hpp"

namespace dncnn {

namespace {

void require_same_size(const ImageGray8& a, const ImageGray8& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) +
                         ")");
}

using ArrayXXd = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ArrayXXd to_array(const ImageGray8& img) {
    ArrayXXd a(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) a(y, x) = img.at(x, y);
    return a;
}

// Separable 'valid' correlation with a symmetric 1-D kernel.
ArrayXXd filter_valid(const ArrayXXd& in, const Eigen::ArrayXd& k) {
    const Eigen::Index n = k.size();
    ArrayXXd rows(in.rows(), in.cols() - n + 1);
    for (Eigen::Index x = 0; x < rows.cols(); ++x) {
        rows.col(x).setZero();
        for (Eigen::Index t = 0; t < n; ++t) rows.col(x) += k[t] * in.col(x + t);
    }
    ArrayXXd out(in.rows() - n + 1, rows.cols());
    for (Eigen::Index y = 0; y < out.rows(); ++y) {
        out.row(y).setZero();
        for (Eigen::Index t = 0; t < n; ++t) out.row(y) += k[t] * rows.row(y + t);
    }
    return out;
}

Eigen::ArrayXd gaussian_window(int size, double sd) {
    Eigen::ArrayXd k(size);
    const double c = (size - 1) / 2.0;
    for (int i = 0; i < size; ++i) k[i] = std::exp(-((i - c) * (i - c)) / (2 * sd * sd));
    return k / k.sum();
}

} // namespace

double psnr(const ImageGray8& a, const ImageGray8& b) {
    require_same_size(a, b, "psnr");
    double sse = 0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = double(a.pixels[i]) - double(b.pixels[i]);
        sse += d * d;
    }
    if (sse == 0) return kPsnrMax;
    const double mse = sse / static_cast<double>(a.pixels.size());
    return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double ssim(const ImageGray8& a, const ImageGray8& b) {
    constexpr int window = 11;
    require_same_size(a, b, "ssim");
    if (a.width < window || a.height < window)
        throw ShapeError("ssim: images must be at least 11x11, got " + std::to_string(a.width) + "x" +
                         std::to_string(a.height));
    constexpr double c1 = (0.01 * 255) * (0.01 * 255);
    constexpr double c2 = (0.03 * 255) * (0.03 * 255);
    const auto k = gaussian_window(window, 1.5);
    const ArrayXXd x = to_array(a), y = to_array(b);

    const ArrayXXd mx = filter_valid(x, k), my = filter_valid(y, k);
    const ArrayXXd sxx = filter_valid(x * x, k) - mx * mx;
    const ArrayXXd syy = filter_valid(y * y, k) - my * my;
    const ArrayXXd sxy = filter_valid(x * y, k) - mx * my;
    const ArrayXXd map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    return map.mean();
}

ImageGray8 median_filter(const ImageGray8& img, int k) {
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("median window must be odd, got " + std::to_string(k));
    if (k > img.width || k > img.height)
        throw std::invalid_argument("median window " + std::to_string(k) + " exceeds image size");
    const int r = k / 2;
    ImageGray8 out(img.width, img.height);
    std::vector<std::uint8_t> window(static_cast<std::size_t>(k) * k);
    const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            std::size_t i = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx)
                    window[i++] = img.at(std::clamp(x + dx, 0, img.width - 1), std::clamp(y + dy, 0, img.height - 1));
            std::nth_element(window.begin(), mid, window.end());
            out.at(x, y) = *mid;
        }
    return out;
}

double psnr_gain(double noisy_db, double denoised_db) {
    if (std::isinf(noisy_db) && std::isinf(denoised_db)) return 0;
    return denoised_db - noisy_db;
}

PairReport evaluate_pair(const ImageGray8& clean, const ImageGray8& noisy, const ImageGray8& denoised,
                         double elapsed_seconds) {
    PairReport r;
    r.noisy = {psnr(noisy, clean), ssim(noisy, clean), 0};
    r.denoised = {psnr(denoised, clean), ssim(denoised, clean), elapsed_seconds};
    r.psnr_gain = psnr_gain(r.noisy.psnr_db, r.denoised.psnr_db);
    return r;
}

std::string format_db(double db) {
    if (std::isinf(db)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", db);
    return buf;
}

std::string records_csv(const std::vector<EvaluationRecord>& records) {
    std::string out = "filename,psnr_noisy,psnr_denoised,ssim_noisy,ssim_denoised,elapsed_seconds\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, ",%s,%s,%.6f,%.6f,%.6f\n", format_db(r.report.noisy.psnr_db).c_str(),
                      format_db(r.report.denoised.psnr_db).c_str(), r.report.noisy.ssim, r.report.denoised.ssim,
                      r.report.denoised.elapsed);
        out += r.filename + buf;
    }
    return out;
}

std::string summary_table(const std::vector<EvaluationRecord>& records) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %16s %16s %10s %10s %10s\n", "image", "after add noise", "after denoising",
                  "ssim noisy", "ssim", "gain (dB)");
    out += buf;
    double pn = 0, pd = 0, sn = 0, sd = 0;
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%-24s %16s %16s %10.4f %10.4f %10s\n", r.filename.c_str(),
                      format_db(r.report.noisy.psnr_db).c_str(), format_db(r.report.denoised.psnr_db).c_str(),
                      r.report.noisy.ssim, r.report.denoised.ssim, format_db(r.report.psnr_gain).c_str());
        out += buf;
        pn += r.report.noisy.psnr_db;
        pd += r.report.denoised.psnr_db;
        sn += r.report.noisy.ssim;
        sd += r.report.denoised.ssim;
    }
    if (!records.empty()) {
        const double n = static_cast<double>(records.size());
        std::snprintf(buf, sizeof buf, "%-24s %16s %16s %10.4f %10.4f %10s\n", "mean", format_db(pn / n).c_str(),
                      format_db(pd / n).c_str(), sn / n, sd / n, format_db(psnr_gain(pn / n, pd / n)).c_str());
        out += buf;
    }
    return out;
}

} // namespace dncnn
