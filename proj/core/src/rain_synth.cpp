#include "srnet/rain_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "srnet/png_io.hpp"

namespace srnet {

RainRegime parse_regime(const std::string& name) {
    if (name == "light") return RainRegime::light;
    if (name == "heavy") return RainRegime::heavy;
    if (name == "long") return RainRegime::long_streaks;
    if (name == "mixed") return RainRegime::mixed;
    throw std::invalid_argument("unknown rain regime '" + name + "' (want light|heavy|long|mixed)");
}

std::string regime_name(RainRegime regime) {
    switch (regime) {
        case RainRegime::light: return "light";
        case RainRegime::heavy: return "heavy";
        case RainRegime::long_streaks: return "long";
        case RainRegime::mixed: return "mixed";
    }
    return "?";
}

RainParams sample_regime_params(RainRegime regime, RngState& rng) {
    if (regime == RainRegime::mixed) {
        const int64_t pick = rng.uniform_int(0, 2);
        regime = pick == 0 ? RainRegime::light
                           : (pick == 1 ? RainRegime::heavy : RainRegime::long_streaks);
    }
    RainParams p;
    switch (regime) {
        case RainRegime::light:
            p.density = 1200.0;
            p.length_mean = 12.0;
            p.length_jitter = 4.0;
            p.width = 1.0;
            p.intensity_mean = 0.28;
            p.intensity_jitter = 0.08;
            p.blur_sigma = 0.4;
            break;
        case RainRegime::heavy:
            p.density = 2600.0;
            p.length_mean = 18.0;
            p.length_jitter = 6.0;
            p.width = 1.4;
            p.intensity_mean = 0.45;
            p.intensity_jitter = 0.10;
            p.blur_sigma = 0.5;
            break;
        case RainRegime::long_streaks:
            p.density = 1000.0;
            p.length_mean = 34.0;
            p.length_jitter = 8.0;
            p.width = 1.2;
            p.intensity_mean = 0.35;
            p.intensity_jitter = 0.08;
            p.blur_sigma = 0.5;
            break;
        case RainRegime::mixed:
            break;  // unreachable
    }
    p.angle_mean_deg = rng.uniform() * 50.0 - 25.0;
    p.angle_jitter_deg = 6.0;
    return p;
}

namespace {

// Gaussian blur with a compact kernel (radius 2*sigma), zero padding; keeps
// the streak support tight so the layer stays sparse.
void blur_plane(std::vector<float>& plane, int64_t h, int64_t w, double sigma) {
    if (sigma <= 0.0) return;
    const int64_t radius = static_cast<int64_t>(std::ceil(2.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
    double total = 0.0;
    for (int64_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        kernel[static_cast<size_t>(i + radius)] = v;
        total += v;
    }
    for (double& v : kernel) v /= total;

    std::vector<float> tmp(plane.size());
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int64_t i = -radius; i <= radius; ++i) {
                const int64_t xx = x + i;
                if (xx < 0 || xx >= w) continue;
                acc += kernel[static_cast<size_t>(i + radius)] * plane[y * w + xx];
            }
            tmp[y * w + x] = static_cast<float>(acc);
        }
    }
    for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int64_t i = -radius; i <= radius; ++i) {
                const int64_t yy = y + i;
                if (yy < 0 || yy >= h) continue;
                acc += kernel[static_cast<size_t>(i + radius)] * tmp[yy * w + x];
            }
            plane[y * w + x] = static_cast<float>(acc);
        }
    }
}

}  // namespace

StreakLayer generate_streak_layer(int64_t h, int64_t w, const RainParams& params, RngState& rng) {
    if (h < 1 || w < 1) throw std::invalid_argument("generate_streak_layer: empty extent");

    const double expected = params.density * static_cast<double>(h * w) / 1.0e6;
    int64_t count = static_cast<int64_t>(std::floor(expected));
    if (rng.uniform() < expected - std::floor(expected)) ++count;

    std::vector<float> plane(static_cast<size_t>(h * w), 0.0f);
    for (int64_t i = 0; i < count; ++i) {
        const double cx = rng.uniform() * w;
        const double cy = rng.uniform() * h;
        const double len = std::max(2.0, params.length_mean + params.length_jitter * rng.normal());
        const double ang_deg = params.angle_mean_deg + params.angle_jitter_deg * rng.normal();
        const double ang = ang_deg * std::numbers::pi / 180.0;
        const double inten =
            std::clamp(params.intensity_mean + params.intensity_jitter * rng.normal(), 0.05, 1.0);

        // direction measured from vertical: angle 0 falls straight down
        const double dx = std::sin(ang), dy = std::cos(ang);
        const double x0 = cx - 0.5 * len * dx, y0 = cy - 0.5 * len * dy;
        const double x1 = cx + 0.5 * len * dx, y1 = cy + 0.5 * len * dy;
        const double half_w = params.width * 0.5 + 0.5;  // anti-aliasing apron

        const int64_t bx0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(x0, x1) - half_w)));
        const int64_t bx1 = std::min<int64_t>(w - 1, static_cast<int64_t>(std::ceil(std::max(x0, x1) + half_w)));
        const int64_t by0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(std::min(y0, y1) - half_w)));
        const int64_t by1 = std::min<int64_t>(h - 1, static_cast<int64_t>(std::ceil(std::max(y0, y1) + half_w)));

        const double seg_dx = x1 - x0, seg_dy = y1 - y0;
        const double seg_len2 = seg_dx * seg_dx + seg_dy * seg_dy;
        for (int64_t py = by0; py <= by1; ++py) {
            for (int64_t px = bx0; px <= bx1; ++px) {
                const double qx = px + 0.5, qy = py + 0.5;
                double t = seg_len2 > 0 ? ((qx - x0) * seg_dx + (qy - y0) * seg_dy) / seg_len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double ddx = qx - (x0 + t * seg_dx), ddy = qy - (y0 + t * seg_dy);
                const double dist = std::sqrt(ddx * ddx + ddy * ddy);
                const double coverage = std::clamp(params.width * 0.5 + 0.5 - dist, 0.0, 1.0);
                if (coverage > 0.0) {
                    plane[py * w + px] += static_cast<float>(inten * coverage);
                }
            }
        }
    }

    blur_plane(plane, h, w, params.blur_sigma);

    StreakLayer out;
    out.streak_count = count;
    out.layer = TensorF({1, 3, h, w});
    for (int64_t c = 0; c < 3; ++c) {
        float* dst = out.layer.plane(0, c);
        std::copy(plane.begin(), plane.end(), dst);
    }
    return out;
}

RainSample make_pair(const TensorF& clean, const RainParams& params, RngState& rng) {
    if (clean.shape.n != 1 || clean.shape.c != 3) {
        throw std::invalid_argument("make_pair: want a (1,3,H,W) clean image, got " +
                                    clean.shape.str());
    }
    RainSample s;
    s.clean = clean;
    s.params = params;
    s.rain = generate_streak_layer(clean.shape.h, clean.shape.w, params, rng).layer;
    s.rainy = TensorF(clean.shape);
    for (size_t i = 0; i < clean.data.size(); ++i) {
        s.rainy.data[i] = std::clamp(clean.data[i] + s.rain.data[i], 0.0f, 1.0f);
    }
    return s;
}

namespace {

std::vector<std::filesystem::path> sorted_pngs(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir)) {
        throw std::runtime_error("not a directory: " + dir.string());
    }
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::string pair_id(int64_t i) {
    std::ostringstream os;
    os.width(6);
    os.fill('0');
    os << i;
    return os.str();
}

}  // namespace

std::filesystem::path make_dataset(const std::filesystem::path& clean_dir,
                                   const std::filesystem::path& out_dir, int64_t n,
                                   RainRegime regime, uint64_t seed) {
    if (n < 0) throw std::invalid_argument("make_dataset: n must be >= 0");
    std::vector<std::filesystem::path> clean_files;
    if (n > 0) {
        clean_files = sorted_pngs(clean_dir);
        if (clean_files.empty()) {
            throw std::runtime_error("make_dataset: no .png files under " + clean_dir.string());
        }
    }

    std::filesystem::create_directories(out_dir / "rain");
    std::filesystem::create_directories(out_dir / "norain");
    const std::filesystem::path manifest_path = out_dir / "manifest";

    RngState root = RngState::from_seed(seed);
    std::ostringstream manifest;
    manifest << "# id seed regime density length_mean length_jitter width angle_mean_deg "
                "angle_jitter_deg intensity_mean intensity_jitter blur_sigma\n";
    for (int64_t i = 0; i < n; ++i) {
        RngState rng = root.split(static_cast<uint64_t>(i));
        const RainParams params = sample_regime_params(regime, rng);
        const TensorF clean = load_image(clean_files[static_cast<size_t>(i) % clean_files.size()]);
        const RainSample sample = make_pair(clean, params, rng);
        const std::string id = pair_id(i);
        save_image(sample.rainy, out_dir / "rain" / (id + ".png"));
        save_image(sample.clean, out_dir / "norain" / (id + ".png"));
        manifest << id << " " << rng.seed << " " << regime_name(regime) << " " << params.density
                 << " " << params.length_mean << " " << params.length_jitter << " " << params.width
                 << " " << params.angle_mean_deg << " " << params.angle_jitter_deg << " "
                 << params.intensity_mean << " " << params.intensity_jitter << " "
                 << params.blur_sigma << "\n";
    }
    std::ofstream mf(manifest_path, std::ios::trunc);
    if (!mf) throw std::runtime_error("make_dataset: cannot write manifest");
    mf << manifest.str();
    return manifest_path;
}

PairedDataset load_paired_dataset(const std::filesystem::path& dir) {
    std::ifstream mf(dir / "manifest");
    if (!mf) throw std::runtime_error("no manifest under " + dir.string());
    PairedDataset ds;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream is(line);
        std::string id;
        is >> id;
        if (id.empty()) continue;
        ds.ids.push_back(id);
        ds.rainy.push_back(load_image(dir / "rain" / (id + ".png")));
        ds.clean.push_back(load_image(dir / "norain" / (id + ".png")));
    }
    return ds;
}

TensorF render_clean_background(int64_t h, int64_t w, RngState& rng) {
    TensorF img({1, 3, h, w});

    // low-frequency base: a few random cosine gradients shared across
    // channels with per-channel phase offsets
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves;
    const int64_t n_waves = 3;
    for (int64_t i = 0; i < n_waves; ++i) {
        waves.push_back(Wave{rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0,
                             rng.uniform() * 2.0 * std::numbers::pi, 0.08 + 0.10 * rng.uniform()});
    }
    double chan_phase[3];
    for (double& p : chan_phase) p = rng.uniform() * 0.8;
    const double base = 0.25 + 0.3 * rng.uniform();

    for (int64_t c = 0; c < 3; ++c) {
        float* dst = img.plane(0, c);
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                double v = base + 0.1 * chan_phase[c];
                for (const Wave& wv : waves) {
                    v += wv.amp * std::cos(2.0 * std::numbers::pi *
                                               (wv.fx * x / static_cast<double>(w) +
                                                wv.fy * y / static_cast<double>(h)) +
                                           wv.phase + chan_phase[c]);
                }
                dst[y * w + x] = static_cast<float>(v);
            }
        }
    }

    // soft ellipses with their own colors, alpha-composited
    const int64_t n_blobs = 3 + rng.uniform_int(0, 3);
    for (int64_t i = 0; i < n_blobs; ++i) {
        const double cx = rng.uniform() * w, cy = rng.uniform() * h;
        const double rx = (0.08 + 0.22 * rng.uniform()) * w;
        const double ry = (0.08 + 0.22 * rng.uniform()) * h;
        const double edge = 2.0 + 4.0 * rng.uniform();
        double color[3];
        for (double& cc : color) cc = 0.1 + 0.7 * rng.uniform();
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                const double dx = (x - cx) / rx, dy = (y - cy) / ry;
                const double d = std::sqrt(dx * dx + dy * dy);
                const double alpha = 1.0 / (1.0 + std::exp(edge * (d - 1.0) * 8.0));
                if (alpha < 1e-3) continue;
                for (int64_t c = 0; c < 3; ++c) {
                    float& px = img.plane(0, c)[y * w + x];
                    px = static_cast<float>((1.0 - alpha) * px + alpha * color[c]);
                }
            }
        }
    }

    for (float& v : img.data) v = std::clamp(v, 0.05f, 0.85f);
    return img;
}

}  // namespace srnet
