// Command-line front end: synth / train / derain / eval / gradcheck / inspect.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "srnet/checkpoint.hpp"
#include "srnet/gradcheck.hpp"
#include "srnet/metrics.hpp"
#include "srnet/model.hpp"
#include "srnet/patch.hpp"
#include "srnet/png_io.hpp"
#include "srnet/rain_synth.hpp"
#include "srnet/trainer.hpp"

namespace fs = std::filesystem;
using namespace srnet;

namespace {

struct SynthArgs {
    std::string clean, out;
    int64_t n = 0;
    std::string regime = "mixed";
    uint64_t seed = 0;
    int threads = 0;
};

int run_synth(const SynthArgs& a) {
    const fs::path manifest = make_dataset(a.clean, a.out, a.n, parse_regime(a.regime), a.seed);
    std::cout << "manifest: " << manifest.string() << "\n";
    std::cout << "pairs: " << a.n << "\n";
    return 0;
}

struct TrainArgs {
    std::string data, out;
    int64_t epochs = 100, batch = 18, patch = 100, width = 64, depth = 2;
    std::string dfs = "1,2,3";
    std::string ablation = "Bf";
    std::string preset;
    uint64_t seed = 0;
    int threads = 0;
};

std::vector<int64_t> parse_dfs(const std::string& s) {
    std::vector<int64_t> out;
    std::string cur;
    for (char ch : s + ",") {
        if (ch == ',') {
            if (!cur.empty()) out.push_back(std::stoll(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (out.empty()) throw CLI::ValidationError("--dfs", "expected a comma-separated list");
    return out;
}

int run_train(const TrainArgs& a, const CLI::App* cmd) {
    ModelConfig cfg = ModelConfig::ablation(a.ablation);
    TrainHyper hyper;

    if (a.preset == "desk") {
        apply_desk_preset(cfg, hyper);
    } else if (a.preset == "paper") {
        apply_paper_preset(cfg, hyper);
    } else if (!a.preset.empty()) {
        throw CLI::ValidationError("--preset", "want desk or paper");
    }

    // explicit flags win over the preset
    auto passed = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (passed("--epochs") || a.preset.empty()) hyper.epochs = a.epochs;
    if (passed("--batch") || a.preset.empty()) hyper.batch = a.batch;
    if (passed("--patch") || a.preset.empty()) hyper.patch = a.patch;
    if (passed("--width") || a.preset.empty()) cfg.width = a.width;
    if (passed("--depth") || a.preset.empty()) cfg.depth = a.depth;
    cfg.dilation_factors = parse_dfs(a.dfs);
    hyper.schedule.total_epochs = hyper.epochs;
    hyper.threads = a.threads;

    const PairedDataset data = load_paired_dataset(a.data);
    const TrainReport report = train(data, cfg, hyper, a.seed, a.out);

    std::cout << "checkpoint: " << a.out << "\n";
    std::cout << report.summary_json() << "\n";
    return 0;
}

struct DerainArgs {
    std::string model, input, output, dump_layers;
    uint64_t seed = 0;
    int threads = 0;
};

int run_derain(const DerainArgs& a) {
    const SrnetModel<float> model = load_model<float>(a.model);
    const ExecOpts opts{a.threads};
    const TensorF img = load_image(a.input);
    const FullDerain result = derain_image(model, img, opts);
    if (!a.output.empty()) {
        if (const fs::path parent = fs::path(a.output).parent_path(); !parent.empty()) {
            fs::create_directories(parent);
        }
        save_image(result.background, a.output);
        std::cout << "background: " << a.output << "\n";
    }

    if (!a.dump_layers.empty()) {
        const fs::path dir = a.dump_layers;
        fs::create_directories(dir);
        auto crop_rgb = [&](const TensorF& t) {
            TensorF c = crop_back(t, result.orig_h, result.orig_w);
            for (float& v : c.data) v = std::clamp(v, 0.0f, 1.0f);
            return c;
        };
        save_image(crop_rgb(result.padded.rain_total), dir / "rain_total.png");
        const auto& scales = result.padded.rain_scales;
        for (size_t s = 0; s < scales.size(); ++s) {
            save_image(crop_rgb(scales[s]), dir / ("rain_scale" + std::to_string(s) + ".png"));
            // three representative feature channels: largest mean |activation|
            const TensorF& m = result.padded.feature_maps[s];
            std::vector<std::pair<double, int64_t>> ranked;
            for (int64_t c = 0; c < m.shape.c; ++c) {
                double a_sum = 0.0;
                const float* p = m.plane(0, c);
                for (int64_t i = 0; i < m.shape.h * m.shape.w; ++i) a_sum += std::abs(p[i]);
                ranked.emplace_back(-a_sum, c);
            }
            std::sort(ranked.begin(), ranked.end());
            const size_t take = std::min<size_t>(3, ranked.size());
            for (size_t k = 0; k < take; ++k) {
                const int64_t c = ranked[k].second;
                TensorF plane({1, 1, m.shape.h, m.shape.w});
                std::copy_n(m.plane(0, c), m.shape.h * m.shape.w, plane.data.begin());
                plane = crop_back(plane, result.orig_h, result.orig_w);
                save_image_gray_normalized(plane, dir / ("feat_scale" + std::to_string(s) + "_" +
                                                         std::to_string(k) + ".png"));
            }
        }
        std::cout << "layers: " << dir.string() << "\n";
    }
    return 0;
}

struct EvalArgs {
    std::string model, data, json_out;
    uint64_t seed = 0;
    int threads = 0;
};

int run_eval(const EvalArgs& a) {
    const SrnetModel<float> model = load_model<float>(a.model);
    const PairedDataset data = load_paired_dataset(a.data);
    std::vector<size_t> all(data.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    const MetricReport report = evaluate_pairs(model, data, all, ExecOpts{a.threads});
    std::cout << report.table();
    if (!a.json_out.empty()) {
        std::ofstream f(a.json_out, std::ios::trunc);
        f << report.json();
        std::cout << "json: " << a.json_out << "\n";
    }
    return 0;
}

int run_gradcheck(bool negative_control) {
    GradcheckOptions opts;
    opts.corrupt_conv_backward = negative_control;
    const std::vector<KernelCheck> checks = run_gradcheck(opts);
    for (const auto& c : checks) {
        std::printf("%-28s max_rel_err %.3e  threshold %.0e  %s\n", c.name.c_str(), c.max_rel_err,
                    c.threshold, c.pass ? "PASS" : "FAIL");
    }
    return all_passed(checks) ? 0 : 1;
}

struct InspectArgs {
    std::string model;
    uint64_t seed = 0;
    int threads = 0;
};

int run_inspect(const InspectArgs& a) {
    const CheckpointData data = load_checkpoint(a.model);
    std::cout << "config: " << data.config.describe() << "\n";
    std::cout << "tensors: " << data.params.size() << "\n";
    for (size_t i = 0; i < data.params.size(); ++i) {
        std::cout << "  " << data.params.name(i) << " " << data.params.value(i).shape.str() << "\n";
    }
    std::cout << "learnable scalars: " << data.params.scalar_count() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structural residual deraining toolkit"};
    app.require_subcommand(1);

    SynthArgs sa;
    CLI::App* synth = app.add_subcommand("synth", "generate a paired rainy/clean dataset");
    synth->add_option("--clean", sa.clean, "directory of clean source PNGs")->required();
    synth->add_option("--out", sa.out, "output dataset directory")->required();
    synth->add_option("--n", sa.n, "number of pairs")->required();
    synth->add_option("--regime", sa.regime, "light|heavy|long|mixed")->default_val("mixed");
    synth->add_option("--seed", sa.seed, "RNG seed")->default_val(0);
    synth->add_option("--threads", sa.threads, "worker cap (0 = all cores)")->default_val(0);

    TrainArgs ta;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on a paired dataset");
    train_cmd->add_option("--data", ta.data, "dataset directory (synth layout)")->required();
    train_cmd->add_option("--out", ta.out, "checkpoint output path")->required();
    train_cmd->add_option("--epochs", ta.epochs)->default_val(100);
    train_cmd->add_option("--batch", ta.batch)->default_val(18);
    train_cmd->add_option("--patch", ta.patch)->default_val(100);
    train_cmd->add_option("--width", ta.width, "feature channels N")->default_val(64);
    train_cmd->add_option("--depth", ta.depth, "pool stages per branch T")->default_val(2);
    train_cmd->add_option("--dfs", ta.dfs, "dilation factors")->default_val("1,2,3");
    train_cmd->add_option("--ablation", ta.ablation, "Ba|Bb|Bc|Bd|Be|Bf")->default_val("Bf");
    train_cmd->add_option("--preset", ta.preset, "desk|paper scale preset");
    train_cmd->add_option("--seed", ta.seed)->default_val(0);
    train_cmd->add_option("--threads", ta.threads)->default_val(0);

    DerainArgs da;
    CLI::App* derain = app.add_subcommand("derain", "remove rain from one image");
    derain->add_option("--model", da.model, "checkpoint file")->required();
    derain->add_option("--input", da.input, "rainy input PNG")->required();
    derain->add_option("--output", da.output, "derained output PNG")->required();
    derain->add_option("--dump-layers", da.dump_layers, "directory for rain layers/feature maps");
    derain->add_option("--seed", da.seed)->default_val(0);
    derain->add_option("--threads", da.threads)->default_val(0);

    EvalArgs ea;
    CLI::App* eval_cmd = app.add_subcommand("eval", "luminance PSNR/SSIM over a paired dataset");
    eval_cmd->add_option("--model", ea.model)->required();
    eval_cmd->add_option("--data", ea.data)->required();
    eval_cmd->add_option("--json", ea.json_out, "also write the report as JSON");
    eval_cmd->add_option("--seed", ea.seed)->default_val(0);
    eval_cmd->add_option("--threads", ea.threads)->default_val(0);

    std::string gc_config = "tiny";
    bool gc_negative = false;
    uint64_t gc_seed = 0;
    int gc_threads = 0;
    CLI::App* gradcheck_cmd =
        app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
    gradcheck_cmd->add_option("--config", gc_config, "check configuration")->default_val("tiny");
    gradcheck_cmd->add_flag("--negative-control", gc_negative,
                            "corrupt one gradient to prove the harness catches it");
    gradcheck_cmd->add_option("--seed", gc_seed)->default_val(0);
    gradcheck_cmd->add_option("--threads", gc_threads)->default_val(0);

    InspectArgs ia;
    CLI::App* inspect = app.add_subcommand("inspect", "print checkpoint config and tensor table");
    inspect->add_option("--model", ia.model)->required();
    inspect->add_option("--seed", ia.seed)->default_val(0);
    inspect->add_option("--threads", ia.threads)->default_val(0);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) return run_synth(sa);
        if (train_cmd->parsed()) return run_train(ta, train_cmd);
        if (derain->parsed()) return run_derain(da);
        if (eval_cmd->parsed()) return run_eval(ea);
        if (gradcheck_cmd->parsed()) {
            if (gc_config != "tiny") {
                std::cerr << "unknown gradcheck config '" << gc_config << "'\n";
                return 2;
            }
            return run_gradcheck(gc_negative);
        }
        if (inspect->parsed()) return run_inspect(ia);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
