#include "srnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "srnet/checkpoint.hpp"
#include "srnet/png_io.hpp"

namespace srnet {

template <typename T>
OptimState<T> OptimState<T>::init_like(const ParameterStore<T>& params) {
    OptimState<T> s;
    for (size_t i = 0; i < params.size(); ++i) {
        s.m.push_back(Tensor<T>::zeros(params.value(i).shape));
        s.v.push_back(Tensor<T>::zeros(params.value(i).shape));
    }
    return s;
}

template <typename T>
void adam_step(ParameterStore<T>& params, OptimState<T>& state, double lr, const AdamConfig& cfg) {
    if (state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: state does not mirror the parameter store");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& theta = params.value(i);
        const Tensor<T>& g = params.grad(i);
        Tensor<T>& m = state.m[i];
        Tensor<T>& v = state.v[i];
        if (g.shape != theta.shape) throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (size_t j = 0; j < theta.data.size(); ++j) {
            const double gj = static_cast<double>(g.data[j]);
            const double mj = cfg.beta1 * static_cast<double>(m.data[j]) + (1.0 - cfg.beta1) * gj;
            const double vj =
                cfg.beta2 * static_cast<double>(v.data[j]) + (1.0 - cfg.beta2) * gj * gj;
            m.data[j] = static_cast<T>(mj);
            v.data[j] = static_cast<T>(vj);
            const double m_hat = mj / bc1;
            const double v_hat = vj / bc2;
            theta.data[j] =
                static_cast<T>(static_cast<double>(theta.data[j]) -
                               lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
        }
    }
}

double lr_at(int64_t epoch, const Schedule& sched) {
    double lr = sched.base_lr;
    for (int64_t m : sched.milestones) {
        if (epoch >= m) lr *= sched.factor;
    }
    return lr;
}

void apply_desk_preset(ModelConfig& cfg, TrainHyper& hyper) {
    cfg.width = 8;
    cfg.depth = 1;
    hyper.epochs = 30;
    hyper.batch = 4;
    hyper.patch = 48;
    hyper.eval_every = 5;
    hyper.schedule.total_epochs = 30;
}

void apply_paper_preset(ModelConfig& cfg, TrainHyper& hyper) {
    cfg.width = 64;
    cfg.depth = 2;
    hyper.epochs = 100;
    hyper.batch = 18;
    hyper.patch = 100;
    hyper.eval_every = 0;
    hyper.schedule = Schedule{};
}

FullDerain derain_image(const SrnetModel<float>& model, const TensorF& img, const ExecOpts& opts) {
    FullDerain r;
    Padded<float> padded = pad_to_multiple(img, model.config().alignment());
    r.orig_h = padded.orig_h;
    r.orig_w = padded.orig_w;
    r.padded = model.forward(padded.img, nullptr, opts);
    TensorF bg = crop_back(r.padded.background, r.orig_h, r.orig_w);
    for (float& v : bg.data) v = std::clamp(v, 0.0f, 1.0f);
    r.background = std::move(bg);
    return r;
}

MetricReport evaluate_pairs(const SrnetModel<float>& model, const PairedDataset& data,
                            const std::vector<size_t>& indices, const ExecOpts& opts) {
    MetricReport report;
    for (size_t idx : indices) {
        const TensorF& rainy = data.rainy.at(idx);
        const TensorF& clean = data.clean.at(idx);
        const TensorF derained = derain_image(model, rainy, opts).background;

        const TensorF y_clean = rgb_to_luma(clean);
        const TensorF y_out = rgb_to_luma(derained);
        const TensorF y_in = rgb_to_luma(rainy);

        MetricRow row;
        row.id = data.ids.at(idx);
        row.psnr_y = psnr(y_out, y_clean);
        row.ssim_y = ssim(y_out, y_clean, SsimConfig{}, opts);
        row.psnr_y_in = psnr(y_in, y_clean);
        row.ssim_y_in = ssim(y_in, y_clean, SsimConfig{}, opts);
        report.rows.push_back(std::move(row));
    }
    return report;
}

namespace {

std::string epoch_log_line(const EpochStats& e) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << e.epoch << " " << e.lr << " " << e.mean_loss << " ";
    if (e.eval_psnr_y) {
        os << *e.eval_psnr_y << " " << *e.eval_ssim_y;
    } else {
        os << "- -";
    }
    os << " " << e.wall_s << "\n";
    return os.str();
}

// Stacks per-sample crops into one batch tensor.
TensorF stack_batch(const std::vector<TensorF>& items) {
    const TensorShape s0 = items.front().shape;
    TensorF out({static_cast<int64_t>(items.size()), s0.c, s0.h, s0.w});
    const int64_t per = s0.c * s0.h * s0.w;
    for (size_t i = 0; i < items.size(); ++i) {
        std::copy(items[i].data.begin(), items[i].data.end(), out.data.begin() + i * per);
    }
    return out;
}

void dump_diverged_batch(const std::filesystem::path& out_checkpoint,
                         const std::vector<std::string>& ids, const TensorF& rainy,
                         const TensorF& clean) {
    const std::filesystem::path dir = out_checkpoint.string() + ".diverged";
    std::filesystem::create_directories(dir);
    for (int64_t i = 0; i < rainy.shape.n; ++i) {
        TensorF r({1, 3, rainy.shape.h, rainy.shape.w});
        TensorF c({1, 3, clean.shape.h, clean.shape.w});
        const int64_t per = 3 * rainy.shape.h * rainy.shape.w;
        std::copy_n(rainy.data.begin() + i * per, per, r.data.begin());
        std::copy_n(clean.data.begin() + i * per, per, c.data.begin());
        save_image(r, dir / (ids[static_cast<size_t>(i)] + "_rainy.png"));
        save_image(c, dir / (ids[static_cast<size_t>(i)] + "_clean.png"));
    }
}

}  // namespace

TrainReport train(const PairedDataset& data, const ModelConfig& cfg, const TrainHyper& hyper,
                  uint64_t seed, const std::filesystem::path& out_checkpoint) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
    if (hyper.batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (hyper.patch % cfg.alignment() != 0) {
        throw std::invalid_argument("train: patch " + std::to_string(hyper.patch) +
                                    " not divisible by the model alignment " +
                                    std::to_string(cfg.alignment()));
    }
    const ExecOpts opts{hyper.threads};
    if (const auto parent = out_checkpoint.parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
    }

    RngState root = RngState::from_seed(seed);
    SrnetModel<float> model(cfg, root.split(1));
    OptimState<float> optim = OptimState<float>::init_like(model.params());

    // deterministic holdout split
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    RngState split_rng = root.split(2);
    for (size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[static_cast<size_t>(split_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
    }
    size_t n_holdout = static_cast<size_t>(std::llround(hyper.holdout_frac * static_cast<double>(data.size())));
    if (data.size() >= 2 && hyper.holdout_frac > 0.0) n_holdout = std::max<size_t>(n_holdout, 1);
    n_holdout = std::min(n_holdout, data.size() - 1);
    std::vector<size_t> holdout(order.begin(), order.begin() + static_cast<int64_t>(n_holdout));
    std::vector<size_t> train_set(order.begin() + static_cast<int64_t>(n_holdout), order.end());

    TrainReport report;
    report.seed = seed;
    report.config = cfg.describe();

    if (!holdout.empty()) {
        const MetricReport base = evaluate_pairs(model, data, holdout, opts);
        report.holdout_input_psnr_y = base.mean_psnr_y_in();
        report.holdout_input_ssim_y = base.mean_ssim_y_in();
    }

    std::ofstream log(out_checkpoint.string() + ".log", std::ios::trunc);
    log << "# epoch lr loss psnr_y ssim_y wall_s\n" << std::flush;

    const PatchSampler sampler{hyper.patch, cfg.alignment()};
    auto is_milestone = [&](int64_t e) {
        for (int64_t m : hyper.schedule.milestones) {
            if (e + 1 == m) return true;
        }
        return false;
    };

    for (int64_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = lr_at(epoch, hyper.schedule);

        // epoch order is a pure function of (seed, epoch)
        RngState erng = root.split(0x100 + static_cast<uint64_t>(epoch));
        std::vector<size_t> idxs = train_set;
        for (size_t i = idxs.size(); i > 1; --i) {
            std::swap(idxs[i - 1], idxs[static_cast<size_t>(erng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
        }

        double loss_sum = 0.0;
        int64_t steps = 0;
        for (size_t at = 0; at < idxs.size(); at += static_cast<size_t>(hyper.batch)) {
            const size_t take = std::min(static_cast<size_t>(hyper.batch), idxs.size() - at);
            std::vector<TensorF> rain_crops, clean_crops;
            std::vector<std::string> batch_ids;
            for (size_t i = 0; i < take; ++i) {
                const size_t idx = idxs[at + i];
                auto [rc, cc] = sample_patch_pair(data.rainy[idx], data.clean[idx], sampler, erng);
                rain_crops.push_back(std::move(rc));
                clean_crops.push_back(std::move(cc));
                batch_ids.push_back(data.ids[idx]);
            }
            const TensorF rainy = stack_batch(rain_crops);
            const TensorF clean = stack_batch(clean_crops);

            ForwardTrace<float> trace;
            DerainOutput<float> out = model.forward(rainy, &trace, opts);

            TensorF grad_b;
            const double loss = negative_ssim_loss(out.background, clean, grad_b, SsimConfig{}, opts);
            if (!std::isfinite(loss)) {
                dump_diverged_batch(out_checkpoint, batch_ids, rainy, clean);
                std::string joined;
                for (const auto& id : batch_ids) joined += " " + id;
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch ids" + joined +
                                         " (dumped next to the checkpoint)");
            }
            loss_sum += loss;
            ++steps;

            model.params().zero_grads();
            model.backward(grad_b, trace, opts);
            adam_step(model.params(), optim, lr);
        }

        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.mean_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;

        const bool want_eval =
            !holdout.empty() && (epoch + 1 == hyper.epochs ||
                                 (hyper.eval_every > 0 ? (epoch + 1) % hyper.eval_every == 0
                                                       : is_milestone(epoch)));
        if (want_eval) {
            const MetricReport ev = evaluate_pairs(model, data, holdout, opts);
            es.eval_psnr_y = ev.mean_psnr_y();
            es.eval_ssim_y = ev.mean_ssim_y();
            if (*es.eval_psnr_y > report.best_psnr_y || report.best_epoch < 0) {
                report.best_psnr_y = *es.eval_psnr_y;
                report.best_epoch = epoch;
                save_checkpoint(out_checkpoint.string() + ".best", cfg, model.params());
            }
            report.final_psnr_y = es.eval_psnr_y;
            report.final_ssim_y = es.eval_ssim_y;
        }
        es.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log << epoch_log_line(es) << std::flush;
        report.epochs.push_back(es);
    }

    save_checkpoint(out_checkpoint, cfg, model.params());
    if (report.best_epoch < 0 && hyper.epochs > 0) {
        // no eval ever ran; final doubles as best
        std::filesystem::copy_file(out_checkpoint, out_checkpoint.string() + ".best",
                                   std::filesystem::copy_options::overwrite_existing);
    }

    std::ofstream js(out_checkpoint.string() + ".json", std::ios::trunc);
    js << report.summary_json();
    return report;
}

std::string TrainReport::log_text() const {
    std::ostringstream os;
    os << "# epoch lr loss psnr_y ssim_y wall_s\n";
    for (const auto& e : epochs) os << epoch_log_line(e);
    return os.str();
}

std::string TrainReport::summary_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["config"] = config;
    j["n_epochs"] = epochs.size();
    if (!epochs.empty()) {
        j["first_loss"] = epochs.front().mean_loss;
        j["final_loss"] = epochs.back().mean_loss;
    }
    if (best_epoch >= 0) {
        j["best_epoch"] = best_epoch;
        j["best_psnr_y"] = best_psnr_y;
    }
    if (holdout_input_psnr_y) j["holdout_input_psnr_y"] = *holdout_input_psnr_y;
    if (holdout_input_ssim_y) j["holdout_input_ssim_y"] = *holdout_input_ssim_y;
    if (final_psnr_y) j["final_psnr_y"] = *final_psnr_y;
    if (final_ssim_y) j["final_ssim_y"] = *final_ssim_y;
    double total = 0.0;
    for (const auto& e : epochs) total += e.wall_s;
    j["wall_s"] = total;
    return j.dump(2);
}

template struct OptimState<float>;
template struct OptimState<double>;
template void adam_step(ParameterStore<float>&, OptimState<float>&, double, const AdamConfig&);
template void adam_step(ParameterStore<double>&, OptimState<double>&, double, const AdamConfig&);

}  // namespace srnet
