#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "srnet/rng.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Streak-field parameters. Density is streaks per megapixel; angle is
/// degrees from vertical; intensity is additive brightness in [0,1].
struct RainParams {
    double density = 1800.0;
    double length_mean = 16.0;
    double length_jitter = 5.0;
    double width = 1.2;
    double angle_mean_deg = 0.0;
    double angle_jitter_deg = 8.0;
    double intensity_mean = 0.35;
    double intensity_jitter = 0.08;
    double blur_sigma = 0.5;
};

enum class RainRegime { light, heavy, long_streaks, mixed };

RainRegime parse_regime(const std::string& name);  // light|heavy|long|mixed
std::string regime_name(RainRegime regime);

/// Draws the per-image parameter set for a regime (sub-regime choice for
/// mixed, plus a random per-image mean streak direction).
RainParams sample_regime_params(RainRegime regime, RngState& rng);

struct StreakLayer {
    TensorF layer;  // (1,3,H,W), nonnegative, channels identical
    int64_t streak_count = 0;
};

/// Anti-aliased line segments, Gaussian-blurred, replicated to 3 channels.
StreakLayer generate_streak_layer(int64_t h, int64_t w, const RainParams& params, RngState& rng);

/// Paired training sample: rainy = clip(clean + rain, 0, 1) with the rain
/// layer kept pre-clip, so wherever no clipping occurred rainy - clean = rain
/// exactly.
struct RainSample {
    TensorF rainy;
    TensorF clean;
    TensorF rain;
    RainParams params;
};

RainSample make_pair(const TensorF& clean, const RainParams& params, RngState& rng);

/// Writes a paired dataset:
///   <out>/rain/<id>.png, <out>/norain/<id>.png, <out>/manifest
/// Clean sources are the PNGs under clean_dir (sorted, cycled when n exceeds
/// them). Fully deterministic in (contents of clean_dir, n, regime, seed).
/// Returns the manifest path.
std::filesystem::path make_dataset(const std::filesystem::path& clean_dir,
                                   const std::filesystem::path& out_dir, int64_t n,
                                   RainRegime regime, uint64_t seed);

struct PairedDataset {
    std::vector<std::string> ids;
    std::vector<TensorF> rainy;
    std::vector<TensorF> clean;

    size_t size() const { return ids.size(); }
};

/// Loads every pair named by <dir>/manifest into memory, manifest order.
PairedDataset load_paired_dataset(const std::filesystem::path& dir);

/// Procedural clean scene (smooth gradients plus soft shapes); lets the desk
/// pipeline run end to end without any photo collection.
TensorF render_clean_background(int64_t h, int64_t w, RngState& rng);

}  // namespace srnet
