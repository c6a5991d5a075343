#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "srnet/metrics.hpp"
#include "srnet/model.hpp"
#include "srnet/patch.hpp"
#include "srnet/rain_synth.hpp"

namespace srnet {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// First/second moment slots mirroring a parameter store.
template <typename T>
struct OptimState {
    std::vector<Tensor<T>> m, v;
    int64_t step = 0;

    static OptimState init_like(const ParameterStore<T>& params);
};

/// Standard bias-corrected Adam update from the gradients currently held in
/// the store's gradient slots.
template <typename T>
void adam_step(ParameterStore<T>& params, OptimState<T>& state, double lr,
               const AdamConfig& cfg = {});

/// Step decay: lr is divided by 1/factor after each milestone epoch.
struct Schedule {
    double base_lr = 1e-3;
    std::vector<int64_t> milestones = {30, 50, 80};
    double factor = 0.2;
    int64_t total_epochs = 100;
};

double lr_at(int64_t epoch, const Schedule& sched);

struct TrainHyper {
    int64_t epochs = 100;
    int64_t batch = 18;
    int64_t patch = 100;
    Schedule schedule;
    double holdout_frac = 0.1;
    int64_t eval_every = 0;  // 0: evaluate at schedule milestones and the final epoch
    int threads = 0;
};

/// The scale presets shipped with the trainer. `desk` finishes on a laptop
/// CPU in minutes; `paper` is the full-scale configuration (GPU-sized, run
/// it for a single epoch as a smoke test on CPU).
void apply_desk_preset(ModelConfig& cfg, TrainHyper& hyper);
void apply_paper_preset(ModelConfig& cfg, TrainHyper& hyper);

struct EpochStats {
    int64_t epoch = 0;
    double lr = 0.0;
    double mean_loss = 0.0;
    double wall_s = 0.0;
    std::optional<double> eval_psnr_y;
    std::optional<double> eval_ssim_y;
};

struct TrainReport {
    uint64_t seed = 0;
    std::string config;
    std::vector<EpochStats> epochs;
    int64_t best_epoch = -1;
    double best_psnr_y = 0.0;
    std::optional<double> holdout_input_psnr_y;  // rainy-vs-clean baseline
    std::optional<double> holdout_input_ssim_y;
    std::optional<double> final_psnr_y;
    std::optional<double> final_ssim_y;

    std::string log_text() const;      // one line per epoch
    std::string summary_json() const;  // machine-readable summary
};

/// Full training run. Writes the final checkpoint to `out_checkpoint`, the
/// best-by-holdout-PSNR one to "<out>.best", and the log/summary next to it.
/// A non-finite loss aborts after dumping the offending batch as PNGs.
TrainReport train(const PairedDataset& data, const ModelConfig& cfg, const TrainHyper& hyper,
                  uint64_t seed, const std::filesystem::path& out_checkpoint);

/// Pads to the model's alignment, runs the forward pass, crops back.
/// `background` is clamped to [0,1] (image space); `padded` keeps the raw
/// model outputs for layer dumps.
struct FullDerain {
    DerainOutput<float> padded;
    TensorF background;
    int64_t orig_h = 0, orig_w = 0;
};

FullDerain derain_image(const SrnetModel<float>& model, const TensorF& img,
                        const ExecOpts& opts = {});

/// Luminance PSNR/SSIM of the derained estimate (and of the untouched rainy
/// input) against clean, one row per selected pair.
MetricReport evaluate_pairs(const SrnetModel<float>& model, const PairedDataset& data,
                            const std::vector<size_t>& indices, const ExecOpts& opts = {});

}  // namespace srnet
