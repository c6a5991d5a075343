// End-to-end checks of the command-line surface: exit codes, determinism,
// and the synth -> train -> derain -> eval pipeline on a miniature budget.
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "srnet/checkpoint.hpp"
#include "srnet/png_io.hpp"
#include "srnet/rng.hpp"

using namespace srnet;
namespace fs = std::filesystem;

namespace {

const char* cli = SRNET_CLI_PATH;
const char* mkclean = SRNET_MKCLEAN_PATH;

int run(const std::string& cmd) {
    const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "srnet_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::vector<unsigned char>((std::istreambuf_iterator<char>(f)),
                                      std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run(std::string(cli)) == 2);                          // missing subcommand
    CHECK(run(std::string(cli) + " synth --out x --n 1") == 2);  // missing --clean
    CHECK(run(std::string(cli) + " synth --clean a --out b --n 1 --bogus 3") == 2);
    CHECK(run(std::string(cli) + " nonsense") == 2);
    CHECK(run(std::string(cli) + " --help") == 0);
}

TEST_CASE("missing files exit 1") {
    CHECK(run(std::string(cli) + " derain --model /nonexistent.srnw --input a.png --output b.png") ==
          1);
    CHECK(run(std::string(cli) + " inspect --model /nonexistent.srnw") == 1);
}

TEST_CASE("mini pipeline: mkclean -> synth -> train -> derain/eval/inspect") {
    const fs::path dir = work_dir();
    const fs::path clean = dir / "clean";
    const fs::path data = dir / "data";
    const fs::path model = dir / "model.srnw";

    REQUIRE(run(std::string(mkclean) + " --out " + clean.string() +
                " --n 3 --height 48 --width 48 --seed 5") == 0);
    CHECK(fs::exists(clean / "clean_0000.png"));

    // n = 0: success with an empty manifest
    const fs::path empty = dir / "empty_ds";
    REQUIRE(run(std::string(cli) + " synth --clean " + clean.string() + " --out " + empty.string() +
                " --n 0 --seed 1") == 0);
    CHECK(fs::exists(empty / "manifest"));

    REQUIRE(run(std::string(cli) + " synth --clean " + clean.string() + " --out " + data.string() +
                " --n 4 --regime mixed --seed 9") == 0);

    // identical flags reproduce identical bytes
    const fs::path data2 = dir / "data2";
    REQUIRE(run(std::string(cli) + " synth --clean " + clean.string() + " --out " + data2.string() +
                " --n 4 --regime mixed --seed 9") == 0);
    CHECK(slurp(data / "manifest") == slurp(data2 / "manifest"));
    CHECK(slurp(data / "rain" / "000002.png") == slurp(data2 / "rain" / "000002.png"));

    REQUIRE(run(std::string(cli) + " train --data " + data.string() + " --out " + model.string() +
                " --epochs 1 --batch 2 --patch 16 --width 3 --depth 1 --seed 3 --threads 1") == 0);
    CHECK(fs::exists(model));

    // epochs 0 writes the initialized parameters
    const fs::path init_model = dir / "init.srnw";
    REQUIRE(run(std::string(cli) + " train --data " + data.string() + " --out " +
                init_model.string() +
                " --epochs 0 --patch 16 --width 2 --depth 1 --seed 3 --threads 1") == 0);
    const CheckpointData init = load_checkpoint(init_model);
    SrnetModel<float> fresh(init.config, RngState::from_seed(3).split(1));
    for (size_t i = 0; i < init.params.size(); ++i) {
        CHECK(init.params.value(i).same_bits(fresh.params().value(i)));
    }

    const fs::path out_png = dir / "derained.png";
    const fs::path layers = dir / "layers";
    REQUIRE(run(std::string(cli) + " derain --model " + model.string() + " --input " +
                (data / "rain" / "000000.png").string() + " --output " + out_png.string() +
                " --dump-layers " + layers.string() + " --threads 1") == 0);

    // output extent equals input extent
    const TensorF in_img = load_image(data / "rain" / "000000.png");
    const TensorF out_img = load_image(out_png);
    CHECK(out_img.shape == in_img.shape);

    // layer dump: rain_total + per scale (rain + 3 feature maps)
    int n_files = 0;
    for (const auto& e : fs::directory_iterator(layers)) {
        (void)e;
        ++n_files;
    }
    const int n_scales = 3;
    CHECK(n_files == 1 + n_scales * (1 + 3));

    REQUIRE(run(std::string(cli) + " eval --model " + model.string() + " --data " + data.string() +
                " --json " + (dir / "eval.json").string() + " --threads 1") == 0);
    std::ifstream jf(dir / "eval.json");
    const std::string j((std::istreambuf_iterator<char>(jf)), std::istreambuf_iterator<char>());
    CHECK(j.find("\"psnr_y\"") != std::string::npos);
    CHECK(j.find("\"ssim_y\"") != std::string::npos);
    CHECK(j.find("\"n_images\"") != std::string::npos);

    CHECK(run(std::string(cli) + " inspect --model " + model.string()) == 0);

    // --ablation Bd configures a single maxunpool encoder-decoder branch
    const fs::path bd_model = dir / "bd.srnw";
    REQUIRE(run(std::string(cli) + " train --data " + data.string() + " --out " +
                bd_model.string() +
                " --epochs 0 --patch 16 --width 2 --depth 1 --ablation Bd --seed 3") == 0);
    const CheckpointData bd = load_checkpoint(bd_model);
    CHECK(bd.config.multi_scale == false);
    CHECK(bd.config.encoder_decoder == true);
    CHECK(bd.config.use_maxunpool == true);
    CHECK(bd.config.global_residual == true);
    CHECK(bd.config.n_scales() == 1);

    // Bc swaps the decoder to bilinear upsampling
    const fs::path bc_model = dir / "bc.srnw";
    REQUIRE(run(std::string(cli) + " train --data " + data.string() + " --out " +
                bc_model.string() +
                " --epochs 0 --patch 16 --width 2 --depth 1 --ablation Bc --seed 3") == 0);
    CHECK(load_checkpoint(bc_model).config.use_maxunpool == false);
}

TEST_CASE("gradcheck subcommand: clean exit, negative control trips") {
    CHECK(run(std::string(cli) + " gradcheck") == 0);
    CHECK(run(std::string(cli) + " gradcheck --negative-control") != 0);
}
