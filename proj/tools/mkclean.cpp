// Emits procedural clean backgrounds (smooth gradients + soft shapes) so the
// synth -> train -> eval pipeline can run without any photo collection.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "srnet/png_io.hpp"
#include "srnet/rain_synth.hpp"
#include "srnet/rng.hpp"

int main(int argc, char** argv) {
    CLI::App app{"procedural clean-background generator"};
    std::string out;
    int64_t n = 16, height = 128, width = 128;
    uint64_t seed = 0;
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--n", n, "number of images")->default_val(16);
    app.add_option("--height", height)->default_val(128);
    app.add_option("--width", width)->default_val(128);
    app.add_option("--seed", seed)->default_val(0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        std::filesystem::create_directories(out);
        srnet::RngState root = srnet::RngState::from_seed(seed);
        for (int64_t i = 0; i < n; ++i) {
            srnet::RngState rng = root.split(static_cast<uint64_t>(i));
            const srnet::TensorF img = srnet::render_clean_background(height, width, rng);
            char name[32];
            std::snprintf(name, sizeof(name), "clean_%04lld.png", static_cast<long long>(i));
            srnet::save_image(img, std::filesystem::path(out) / name);
        }
        std::cout << "wrote " << n << " images to " << out << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
