#pragma once

#include <optional>
#include <string>
#include <vector>

#include "srnet/parallel.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Windowed SSIM parameters: 11x11 Gaussian (sigma 1.5) normalized to sum 1,
/// stabilizers C1 = (k1*L)^2, C2 = (k2*L)^2, valid-region windowing, mean
/// over channels.
struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Mean SSIM over all valid window positions, channels, and batch items.
template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {},
            const ExecOpts& opts = {});

/// SSIM plus its analytic gradient with respect to x.
template <typename T>
double ssim_with_grad(const Tensor<T>& x, const Tensor<T>& y, Tensor<T>& grad_x,
                      const SsimConfig& cfg = {}, const ExecOpts& opts = {});

/// Training objective: loss = -ssim(b_hat, b), gradient w.r.t. b_hat.
template <typename T>
double negative_ssim_loss(const Tensor<T>& b_hat, const Tensor<T>& b, Tensor<T>& grad_b_hat,
                          const SsimConfig& cfg = {}, const ExecOpts& opts = {});

/// BT.601 full-range luminance of a 3-channel image: Y = .299R + .587G + .114B.
template <typename T>
Tensor<T> rgb_to_luma(const Tensor<T>& img);

inline constexpr double kPsnrCapDb = 99.0;

/// 10*log10(peak^2 / MSE), capped at 99 dB (the identical-image sentinel).
template <typename T>
double psnr(const Tensor<T>& x, const Tensor<T>& y, double peak = 1.0);

/// Per-image luminance metrics plus aggregate means. The *_in columns carry
/// the untouched rainy input when the evaluation has one to compare against.
struct MetricRow {
    std::string id;
    double psnr_y = 0.0;
    double ssim_y = 0.0;
    std::optional<double> psnr_y_in;
    std::optional<double> ssim_y_in;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    double mean_psnr_y() const;
    double mean_ssim_y() const;
    double mean_psnr_y_in() const;
    double mean_ssim_y_in() const;

    std::string table() const;  // line-oriented text table
    std::string json() const;   // keys: psnr_y, ssim_y, n_images (+input means)
};

}  // namespace srnet
