#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "srnet/png_io.hpp"
#include "srnet/rain_synth.hpp"
#include "srnet/rng.hpp"

using namespace srnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("srnet_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("zero density gives an all-zero layer") {
    RngState rng = RngState::from_seed(1);
    RainParams p;
    p.density = 0.0;
    const StreakLayer layer = generate_streak_layer(64, 64, p, rng);
    CHECK(layer.streak_count == 0);
    CHECK(count_nonzero(layer.layer) == 0);
}

TEST_CASE("a single vertical streak rasterizes where expected") {
    RainParams p;
    p.density = 1.0e6 / (64.0 * 64.0);  // expectation: exactly one streak
    p.length_mean = 8.0;
    p.length_jitter = 0.0;
    p.width = 1.0;
    p.angle_mean_deg = 0.0;
    p.angle_jitter_deg = 0.0;
    p.intensity_jitter = 0.0;
    p.blur_sigma = 0.5;

    RngState rng = RngState::from_seed(3);
    const StreakLayer layer = generate_streak_layer(64, 64, p, rng);
    REQUIRE(layer.streak_count == 1);

    // support is a vertical band: height ~ length + blur apron, narrow width
    int64_t min_x = 64, max_x = -1, min_y = 64, max_y = -1;
    for (int64_t y = 0; y < 64; ++y) {
        for (int64_t x = 0; x < 64; ++x) {
            if (layer.layer.at(0, 0, y, x) > 0.0f) {
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
            }
        }
    }
    REQUIRE(max_y >= 0);
    const int64_t blur_r = 1;  // ceil(2 * 0.5)
    CHECK(max_y - min_y + 1 >= 8);
    CHECK(max_y - min_y + 1 <= 8 + 2 * (blur_r + 1));
    CHECK(max_x - min_x + 1 <= static_cast<int64_t>(1 + 2 * (blur_r + 1)));
}

TEST_CASE("streak count is unbiased across seeds") {
    RainParams p;  // defaults: density 1800 per megapixel
    const int64_t h = 96, w = 96;
    const double expected = p.density * h * w / 1.0e6;
    double total = 0.0;
    const int seeds = 150;
    for (int s = 0; s < seeds; ++s) {
        RngState rng = RngState::from_seed(1000 + static_cast<uint64_t>(s));
        total += static_cast<double>(generate_streak_layer(h, w, p, rng).streak_count);
    }
    const double mean = total / seeds;
    CHECK(std::abs(mean - expected) <= 0.15 * expected);
}

TEST_CASE("make_pair: additive where unclipped, zero rain under zero density") {
    RngState rng = RngState::from_seed(7);
    const TensorF clean = render_clean_background(64, 64, rng);

    RainParams zero;
    zero.density = 0.0;
    RngState r2 = RngState::from_seed(8);
    const RainSample none = make_pair(clean, zero, r2);
    CHECK(none.rainy.same_bits(clean));
    CHECK(count_nonzero(none.rain) == 0);

    RngState r3 = RngState::from_seed(9);
    const RainSample s = make_pair(clean, RainParams{}, r3);
    for (size_t i = 0; i < s.rainy.data.size(); ++i) {
        CHECK(s.rain.data[i] >= 0.0f);
        CHECK(s.rainy.data[i] >= 0.0f);
        CHECK(s.rainy.data[i] <= 1.0f);
        if (s.clean.data[i] + s.rain.data[i] <= 1.0f) {
            // unclipped: additivity holds to 0 ulp
            CHECK(s.rainy.data[i] == s.clean.data[i] + s.rain.data[i]);
        }
    }
}

TEST_CASE("rain stays sparse at the default and regime densities") {
    RngState crng = RngState::from_seed(11);
    const TensorF clean = render_clean_background(128, 128, crng);
    double worst_default = 0.0;
    for (int s = 0; s < 20; ++s) {
        RngState rng = RngState::from_seed(100 + static_cast<uint64_t>(s));
        const RainSample sample = make_pair(clean, RainParams{}, rng);
        const double frac = static_cast<double>(count_nonzero(sample.rain)) /
                            static_cast<double>(sample.rain.elems());
        worst_default = std::max(worst_default, frac);
    }
    CHECK(worst_default <= 0.20);

    for (RainRegime regime : {RainRegime::light, RainRegime::heavy, RainRegime::long_streaks}) {
        double worst = 0.0;
        for (int s = 0; s < 10; ++s) {
            RngState rng = RngState::from_seed(500 + static_cast<uint64_t>(s));
            const RainParams p = sample_regime_params(regime, rng);
            const RainSample sample = make_pair(clean, p, rng);
            const double frac = static_cast<double>(count_nonzero(sample.rain)) /
                                static_cast<double>(sample.rain.elems());
            worst = std::max(worst, frac);
        }
        INFO(regime_name(regime));
        CHECK(worst <= 0.25);
    }
}

TEST_CASE("mixed regime draws the three sub-regimes evenly") {
    std::map<double, int> by_density;  // density identifies the sub-regime
    RngState root = RngState::from_seed(13);
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        RngState rng = root.split(static_cast<uint64_t>(i));
        by_density[sample_regime_params(RainRegime::mixed, rng).density]++;
    }
    REQUIRE(by_density.size() == 3);
    for (const auto& [density, count] : by_density) {
        CHECK(std::abs(count / static_cast<double>(n) - 1.0 / 3.0) <= 0.10);
    }
}

TEST_CASE("datasets: empty is fine, same seed is byte-identical, manifest replays") {
    const fs::path clean_dir = temp_dir("clean");
    RngState rng = RngState::from_seed(17);
    for (int i = 0; i < 3; ++i) {
        RngState r = rng.split(static_cast<uint64_t>(i));
        save_image(render_clean_background(64, 48, r),
                   clean_dir / ("c" + std::to_string(i) + ".png"));
    }

    const fs::path empty_out = temp_dir("ds_empty");
    const fs::path manifest = make_dataset(clean_dir, empty_out, 0, RainRegime::mixed, 1);
    CHECK(fs::exists(manifest));
    const PairedDataset none = load_paired_dataset(empty_out);
    CHECK(none.size() == 0);

    const fs::path out_a = temp_dir("ds_a");
    const fs::path out_b = temp_dir("ds_b");
    make_dataset(clean_dir, out_a, 5, RainRegime::mixed, 42);
    make_dataset(clean_dir, out_b, 5, RainRegime::mixed, 42);
    CHECK(slurp(out_a / "manifest") == slurp(out_b / "manifest"));
    for (int i = 0; i < 5; ++i) {
        char id[8];
        std::snprintf(id, sizeof(id), "%06d", i);
        CHECK(slurp(out_a / "rain" / (std::string(id) + ".png")) ==
              slurp(out_b / "rain" / (std::string(id) + ".png")));
        CHECK(slurp(out_a / "norain" / (std::string(id) + ".png")) ==
              slurp(out_b / "norain" / (std::string(id) + ".png")));
    }

    // regenerate pair 2 from its manifest seed
    std::ifstream mf(out_a / "manifest");
    std::string line;
    uint64_t seed2 = 0;
    while (std::getline(mf, line)) {
        if (line.rfind("000002 ", 0) == 0) {
            std::istringstream is(line);
            std::string id, regime;
            is >> id >> seed2;
            break;
        }
    }
    REQUIRE(seed2 != 0);
    RngState replay{seed2, 0};
    const RainParams p = sample_regime_params(RainRegime::mixed, replay);
    const TensorF clean = load_image(clean_dir / "c2.png");
    const RainSample sample = make_pair(clean, p, replay);
    const PairedDataset ds = load_paired_dataset(out_a);
    // PNG quantization applies to both sides identically
    for (size_t i = 0; i < sample.rainy.data.size(); ++i) {
        CHECK(std::abs(sample.rainy.data[i] - ds.rainy[2].data[i]) <= 0.5f / 255.0f + 1e-6f);
    }

    const PairedDataset loaded = load_paired_dataset(out_a);
    CHECK(loaded.size() == 5);
    CHECK(loaded.ids[0] == "000000");
    CHECK(loaded.rainy[0].shape == TensorShape{1, 3, 64, 48});
}

TEST_CASE("clean-background renderer stays in range and varies by seed") {
    RngState a = RngState::from_seed(19), b = RngState::from_seed(20);
    const TensorF x = render_clean_background(48, 48, a);
    const TensorF y = render_clean_background(48, 48, b);
    for (float v : x.data) {
        CHECK(v >= 0.05f);
        CHECK(v <= 0.85f);
    }
    CHECK(!x.same_bits(y));
}

TEST_CASE("regime parsing round-trips") {
    for (const char* name : {"light", "heavy", "long", "mixed"}) {
        CHECK(regime_name(parse_regime(name)) == name);
    }
    CHECK_THROWS(parse_regime("torrential"));
}
