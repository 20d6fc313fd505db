#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "dncnn/image.hpp"

namespace dncnn {

/// PSNR of identical images; printed as "inf".
inline constexpr double kPsnrMax = std::numeric_limits<double>::infinity();

/// 10 log10(255^2 / MSE) in dB, kPsnrMax when the images are identical.
double psnr(const ImageGray8& a, const ImageGray8& b);

/// Mean SSIM over all valid 11x11 Gaussian windows (sd 1.5),
/// C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2.
double ssim(const ImageGray8& a, const ImageGray8& b);

/// k x k median with replicated borders; k must be odd.
ImageGray8 median_filter(const ImageGray8& img, int k = 3);

struct QualityReport {
    double psnr_db = 0;
    double ssim = 0;
    double elapsed = 0;  // seconds
};

struct PairReport {
    QualityReport noisy;     // noisy vs clean
    QualityReport denoised;  // denoised vs clean
    double psnr_gain = 0;    // denoised - noisy
};

PairReport evaluate_pair(const ImageGray8& clean, const ImageGray8& noisy, const ImageGray8& denoised,
                         double elapsed_seconds = 0);

/// psnr_denoised - psnr_noisy, with kPsnrMax - kPsnrMax taken as 0.
double psnr_gain(double noisy_db, double denoised_db);

struct EvaluationRecord {
    std::string filename;
    PairReport report;
};

/// Header: filename,psnr_noisy,psnr_denoised,ssim_noisy,ssim_denoised,elapsed_seconds
std::string records_csv(const std::vector<EvaluationRecord>& records);

/// Per-image rows plus a mean row, laid out like a results table.
std::string summary_table(const std::vector<EvaluationRecord>& records);

std::string format_db(double db);

} // namespace dncnn
