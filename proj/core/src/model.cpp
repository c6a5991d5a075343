#include "srnet/model.hpp"

#include <sstream>
#include <stdexcept>

#include "srnet/upsample.hpp"

namespace srnet {

void ModelConfig::validate() const {
    if (width < 1) throw std::invalid_argument("model: width must be >= 1");
    if (depth < 1) throw std::invalid_argument("model: depth must be >= 1");
    if (dilation_factors.empty()) throw std::invalid_argument("model: no dilation factors");
    for (int64_t df : dilation_factors) {
        if (df < 1 || df > 3) {
            throw std::invalid_argument("model: dilation factor " + std::to_string(df) +
                                        " outside {1,2,3}");
        }
    }
}

ModelConfig ModelConfig::ablation(const std::string& variant) {
    ModelConfig cfg;
    if (variant == "Ba") {
        cfg.multi_scale = false;
        cfg.encoder_decoder = false;
        cfg.global_residual = false;
    } else if (variant == "Bb") {
        cfg.multi_scale = false;
        cfg.encoder_decoder = false;
    } else if (variant == "Bc") {
        cfg.multi_scale = false;
        cfg.use_maxunpool = false;
    } else if (variant == "Bd") {
        cfg.multi_scale = false;
    } else if (variant == "Be") {
        cfg.weight_sharing = true;
    } else if (variant == "Bf") {
        // default
    } else {
        throw std::invalid_argument("unknown ablation variant '" + variant +
                                    "' (want Ba|Bb|Bc|Bd|Be|Bf)");
    }
    return cfg;
}

std::string ModelConfig::describe() const {
    std::ostringstream os;
    os << "N=" << width << " T=" << depth << " dfs=";
    for (size_t i = 0; i < dilation_factors.size(); ++i) {
        os << (i ? "," : "") << dilation_factors[i];
    }
    os << " multi_scale=" << multi_scale << " encoder_decoder=" << encoder_decoder
       << " maxunpool=" << use_maxunpool << " global_residual=" << global_residual
       << " local_skips=" << local_skips << " weight_sharing=" << weight_sharing;
    return os.str();
}

template <typename T>
size_t ParameterStore<T>::add(std::string name, Tensor<T> value) {
    if (by_name_.count(name)) throw std::invalid_argument("duplicate parameter name " + name);
    Entry e;
    e.grad = Tensor<T>::zeros(value.shape);
    e.value = std::move(value);
    e.name = std::move(name);
    entries_.push_back(std::move(e));
    by_name_[entries_.back().name] = entries_.size() - 1;
    return entries_.size() - 1;
}

template <typename T>
int64_t ParameterStore<T>::scalar_count() const {
    int64_t n = 0;
    for (const auto& e : entries_) n += e.value.elems();
    return n;
}

template <typename T>
size_t ParameterStore<T>::index_of(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw std::invalid_argument("no parameter named " + name);
    return it->second;
}

template <typename T>
void ParameterStore<T>::zero_grads() {
    for (auto& e : entries_) fill_(e.grad, T(0));
}

namespace {

struct ParamDesc {
    std::string name;
    TensorShape shape;
    int64_t fan_in;  // 0 for biases
};

// Single source of truth for the parameter set: name, shape, and init fan-in
// of every learnable tensor, in construction order.
void for_each_param(const ModelConfig& cfg, const std::function<void(const ParamDesc&)>& fn) {
    cfg.validate();
    const int64_t n = cfg.width;
    auto conv = [&](const std::string& prefix, int64_t ic, int64_t oc, int64_t k) {
        fn(ParamDesc{prefix + ".w", TensorShape{oc, ic, k, k}, ic * k * k});
        fn(ParamDesc{prefix + ".b", TensorShape{1, oc, 1, 1}, 0});
    };
    auto resblock = [&](const std::string& prefix, int64_t ch) {
        conv(prefix + ".c1", ch, ch, 3);
        conv(prefix + ".c2", ch, ch, 3);
    };

    conv("stem.conv", 3, n, 3);
    resblock("stem.rb1", n);
    resblock("stem.rb2", n);

    const int64_t scales = cfg.n_scales();
    const int64_t param_sets = cfg.weight_sharing ? 1 : scales;
    for (int64_t s = 0; s < param_sets; ++s) {
        const std::string bp = cfg.weight_sharing ? "branch_shared" : "branch" + std::to_string(s);
        for (int64_t t = 0; t < cfg.depth; ++t) resblock(bp + ".enc" + std::to_string(t + 1), n);
        for (int64_t t = 0; t < cfg.depth; ++t) resblock(bp + ".dec" + std::to_string(t + 1), n);
        conv(bp + ".fuse1", n, n, 1);
        conv(bp + ".fuse3", n, n, 3);
        conv(bp + ".head", n, 3, 3);
    }
}

}  // namespace

template <typename T>
SrnetModel<T>::SrnetModel(const ModelConfig& cfg, RngState rng) : cfg_(cfg) {
    for_each_param(cfg_, [&](const ParamDesc& d) {
        if (d.fan_in > 0) {
            store_.add(d.name, kaiming_init<T>(d.shape, d.fan_in, rng));
        } else {
            store_.add(d.name, Tensor<T>::zeros(d.shape));
        }
    });
    bind_layers();
}

template <typename T>
SrnetModel<T>::SrnetModel(const ModelConfig& cfg, ParameterStore<T> store)
    : cfg_(cfg), store_(std::move(store)) {
    size_t expected = 0;
    for_each_param(cfg_, [&](const ParamDesc& d) {
        if (!store_.has(d.name)) {
            throw std::runtime_error("parameter set does not match config: missing " + d.name);
        }
        if (store_.value(store_.index_of(d.name)).shape != d.shape) {
            throw std::runtime_error("parameter " + d.name + " shaped " +
                                     store_.value(store_.index_of(d.name)).shape.str() +
                                     ", config wants " + d.shape.str());
        }
        ++expected;
    });
    if (expected != store_.size()) {
        throw std::runtime_error("parameter set does not match config: extra tensors present");
    }
    bind_layers();
}

template <typename T>
void SrnetModel<T>::bind_layers() {
    const int64_t n = cfg_.width;
    auto conv_ref = [&](const std::string& prefix, int64_t ic, int64_t oc, int64_t k, int64_t df) {
        return ConvRef{ConvSpec::same(ic, oc, k, df), store_.index_of(prefix + ".w"),
                       store_.index_of(prefix + ".b")};
    };
    auto rb_ref = [&](const std::string& prefix, int64_t df) {
        return RbRef{conv_ref(prefix + ".c1", n, n, 3, df), conv_ref(prefix + ".c2", n, n, 3, df)};
    };

    stem_conv_ = conv_ref("stem.conv", 3, n, 3, 1);
    stem_rb1_ = rb_ref("stem.rb1", 1);
    stem_rb2_ = rb_ref("stem.rb2", 1);

    branches_.clear();
    for (int64_t s = 0; s < cfg_.n_scales(); ++s) {
        const std::string bp =
            cfg_.weight_sharing ? "branch_shared" : "branch" + std::to_string(s);
        const int64_t df = cfg_.dilation_factors[static_cast<size_t>(s)];
        BranchRefs br;
        br.df = df;
        for (int64_t t = 0; t < cfg_.depth; ++t) {
            br.enc.push_back(rb_ref(bp + ".enc" + std::to_string(t + 1), df));
        }
        for (int64_t t = 0; t < cfg_.depth; ++t) {
            br.dec.push_back(rb_ref(bp + ".dec" + std::to_string(t + 1), df));
        }
        br.fuse1 = conv_ref(bp + ".fuse1", n, n, 1, 1);
        br.fuse3 = conv_ref(bp + ".fuse3", n, n, 3, df);
        br.head = conv_ref(bp + ".head", n, 3, 3, 1);
        branches_.push_back(std::move(br));
    }
}

template <typename T>
int64_t SrnetModel<T>::param_count(const ModelConfig& cfg) {
    int64_t total = 0;
    for_each_param(cfg, [&](const ParamDesc& d) { total += d.shape.elems(); });
    return total;
}

template <typename T>
std::vector<std::string> SrnetModel<T>::param_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for_each_param(cfg, [&](const ParamDesc& d) { names.push_back(d.name); });
    return names;
}

template <typename T>
void SrnetModel<T>::check_input(const Tensor<T>& input) const {
    if (input.shape.c != 3) {
        throw std::invalid_argument("model: want a 3-channel image batch, got " +
                                    input.shape.str());
    }
    const int64_t align = cfg_.alignment();
    if (input.shape.h % align != 0 || input.shape.w % align != 0) {
        throw std::invalid_argument("model: spatial extents of " + input.shape.str() +
                                    " must divide " + std::to_string(align) +
                                    " (pad the input first)");
    }
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> SrnetModel<T>::branch_forward(int64_t scale, const Tensor<T>& o1,
                                                              const Tensor<T>& o2,
                                                              BranchTrace<T>* trace,
                                                              const ExecOpts& opts) const {
    const BranchRefs& br = branches_.at(static_cast<size_t>(scale));
    auto run_rb = [&](const RbRef& rb, const Tensor<T>& x, ResblockTape<T>* tape) {
        return resblock_forward(x, store_.value(rb.c1.w), store_.value(rb.c1.b),
                                store_.value(rb.c2.w), store_.value(rb.c2.b), rb.c1.spec, tape,
                                opts);
    };

    if (trace) {
        trace->enc_blocks.resize(br.enc.size());
        trace->dec_blocks.resize(br.dec.size());
        trace->pools.clear();
        trace->upsample_in.clear();
    }
    std::vector<PoolIndices> local_pools;  // switches for untraced unpooling
    std::vector<PoolIndices>& pools = trace ? trace->pools : local_pools;

    Tensor<T> x = o2;
    std::vector<Tensor<T>> skip_sources;  // pre-pool activations, stage order
    if (cfg_.encoder_decoder) {
        for (size_t t = 0; t < br.enc.size(); ++t) {
            Tensor<T> e = run_rb(br.enc[t], x, trace ? &trace->enc_blocks[t] : nullptr);
            MaxPoolResult<T> p = maxpool2_forward(e, opts);
            if (cfg_.local_skips) skip_sources.push_back(std::move(e));
            pools.push_back(std::move(p.indices));
            x = std::move(p.output);
        }
        for (size_t t = 0; t < br.dec.size(); ++t) {
            Tensor<T> d = run_rb(br.dec[t], x, trace ? &trace->dec_blocks[t] : nullptr);
            const size_t enc_stage = br.enc.size() - 1 - t;  // innermost pool first
            Tensor<T> up;
            if (cfg_.use_maxunpool) {
                up = maxunpool2_forward(d, pools[enc_stage], pools[enc_stage].in_shape, opts);
            } else {
                up = bilinear_upsample2(d, opts);
            }
            if (trace) {
                trace->upsample_in.push_back(d.shape);
                trace->unpooled.push_back(up);
            }
            x = cfg_.local_skips ? add(up, skip_sources[enc_stage]) : std::move(up);
        }
    } else {
        // Plain resblock chain (no pooling): encoder then decoder blocks.
        for (size_t t = 0; t < br.enc.size(); ++t) {
            x = run_rb(br.enc[t], x, trace ? &trace->enc_blocks[t] : nullptr);
        }
        for (size_t t = 0; t < br.dec.size(); ++t) {
            x = run_rb(br.dec[t], x, trace ? &trace->dec_blocks[t] : nullptr);
        }
    }

    Tensor<T> f1 = conv2d_forward(x, store_.value(br.fuse1.w), store_.value(br.fuse1.b),
                                  br.fuse1.spec, trace ? &trace->fuse1 : nullptr, opts);
    Tensor<T> fr = relu(f1);
    Tensor<T> f3 = conv2d_forward(fr, store_.value(br.fuse3.w), store_.value(br.fuse3.b),
                                  br.fuse3.spec, trace ? &trace->fuse3 : nullptr, opts);
    if (trace) trace->fuse_relu = std::move(fr);

    Tensor<T> m = cfg_.global_residual ? add(f3, o1) : std::move(f3);
    Tensor<T> rain = conv2d_forward(m, store_.value(br.head.w), store_.value(br.head.b),
                                    br.head.spec, trace ? &trace->head : nullptr, opts);
    return {std::move(m), std::move(rain)};
}

template <typename T>
DerainOutput<T> SrnetModel<T>::forward(const Tensor<T>& input, ForwardTrace<T>* trace,
                                       const ExecOpts& opts) const {
    check_input(input);
    ForwardTrace<T>* tr = trace;
    ConvTape<T>* stem_tape = tr ? &tr->stem_conv : nullptr;
    Tensor<T> o1 = conv2d_forward(input, store_.value(stem_conv_.w), store_.value(stem_conv_.b),
                                  stem_conv_.spec, stem_tape, opts);
    Tensor<T> r1 = resblock_forward(o1, store_.value(stem_rb1_.c1.w), store_.value(stem_rb1_.c1.b),
                                    store_.value(stem_rb1_.c2.w), store_.value(stem_rb1_.c2.b),
                                    stem_rb1_.c1.spec, tr ? &tr->stem_rb1 : nullptr, opts);
    Tensor<T> o2 = resblock_forward(r1, store_.value(stem_rb2_.c1.w), store_.value(stem_rb2_.c1.b),
                                    store_.value(stem_rb2_.c2.w), store_.value(stem_rb2_.c2.b),
                                    stem_rb2_.c1.spec, tr ? &tr->stem_rb2 : nullptr, opts);

    DerainOutput<T> out;
    if (tr) tr->branches.resize(static_cast<size_t>(cfg_.n_scales()));
    for (int64_t s = 0; s < cfg_.n_scales(); ++s) {
        auto [m, rain] = branch_forward(s, o1, o2, tr ? &tr->branches[static_cast<size_t>(s)] : nullptr, opts);
        out.feature_maps.push_back(std::move(m));
        out.rain_scales.push_back(std::move(rain));
    }

    out.rain_total = out.rain_scales.front();
    for (size_t s = 1; s < out.rain_scales.size(); ++s) add_(out.rain_total, out.rain_scales[s]);
    out.background = sub(input, out.rain_total);

    if (tr) {
        tr->shallow1 = std::move(o1);
        tr->shallow2 = std::move(o2);
        tr->consumed = false;
    }
    return out;
}

template <typename T>
Tensor<T> SrnetModel<T>::branch_backward(int64_t scale, const Tensor<T>& grad_rain,
                                         BranchTrace<T>& trace, Tensor<T>& grad_o1,
                                         const ExecOpts& opts) {
    const BranchRefs& br = branches_.at(static_cast<size_t>(scale));
    auto rb_back = [&](const RbRef& rb, const Tensor<T>& g, ResblockTape<T>& tape) {
        ResblockGrads<T> gr = resblock_backward(g, store_.value(rb.c1.w), store_.value(rb.c2.w),
                                                tape, rb.c1.spec, opts);
        add_(store_.grad(rb.c1.w), gr.w1);
        add_(store_.grad(rb.c1.b), gr.b1);
        add_(store_.grad(rb.c2.w), gr.w2);
        add_(store_.grad(rb.c2.b), gr.b2);
        return std::move(gr.input);
    };
    auto conv_back = [&](const ConvRef& cr, const Tensor<T>& g, ConvTape<T>& tape) {
        ConvGrads<T> gc = conv2d_backward(g, store_.value(cr.w), tape, cr.spec, opts);
        add_(store_.grad(cr.w), gc.weights);
        add_(store_.grad(cr.b), gc.bias);
        return std::move(gc.input);
    };

    Tensor<T> g_m = conv_back(br.head, grad_rain, trace.head);
    if (cfg_.global_residual) add_(grad_o1, g_m);

    Tensor<T> g_fr = conv_back(br.fuse3, g_m, trace.fuse3);
    for (size_t i = 0; i < g_fr.data.size(); ++i) {
        if (!(trace.fuse_relu.data[i] > T(0))) g_fr.data[i] = T(0);
    }
    Tensor<T> g_x = conv_back(br.fuse1, g_fr, trace.fuse1);

    if (cfg_.encoder_decoder) {
        std::vector<Tensor<T>> skip_grads(br.enc.size());
        for (size_t t = br.dec.size(); t-- > 0;) {
            const size_t enc_stage = br.enc.size() - 1 - t;
            if (cfg_.local_skips) skip_grads[enc_stage] = g_x;  // add node splits the gradient
            Tensor<T> g_up;
            if (cfg_.use_maxunpool) {
                g_up = maxunpool2_backward(g_x, trace.pools[enc_stage], opts);
            } else {
                g_up = bilinear_upsample2_backward(g_x, trace.upsample_in[t], opts);
            }
            g_x = rb_back(br.dec[t], g_up, trace.dec_blocks[t]);
        }
        for (size_t t = br.enc.size(); t-- > 0;) {
            Tensor<T> g_e = maxpool2_backward(g_x, trace.pools[t], opts);
            if (cfg_.local_skips) add_(g_e, skip_grads[t]);
            g_x = rb_back(br.enc[t], g_e, trace.enc_blocks[t]);
        }
    } else {
        for (size_t t = br.dec.size(); t-- > 0;) g_x = rb_back(br.dec[t], g_x, trace.dec_blocks[t]);
        for (size_t t = br.enc.size(); t-- > 0;) g_x = rb_back(br.enc[t], g_x, trace.enc_blocks[t]);
    }
    return g_x;
}

template <typename T>
void SrnetModel<T>::backward(const Tensor<T>& grad_background, ForwardTrace<T>& trace,
                             const ExecOpts& opts) {
    if (trace.consumed) throw std::runtime_error("model backward: trace already consumed");
    if (trace.branches.size() != static_cast<size_t>(cfg_.n_scales())) {
        throw std::runtime_error("model backward: trace does not match config");
    }
    trace.consumed = true;

    // B~ = O - R~, so dL/dR_scale = -dL/dB for every scale.
    Tensor<T> grad_rain = scale(grad_background, T(-1));

    Tensor<T> grad_o1 = Tensor<T>::zeros(trace.shallow1.shape);
    Tensor<T> grad_o2 = Tensor<T>::zeros(trace.shallow2.shape);
    // Branches accumulate into shared parameter slots in fixed reverse order.
    for (int64_t s = cfg_.n_scales(); s-- > 0;) {
        Tensor<T> g = branch_backward(s, grad_rain, trace.branches[static_cast<size_t>(s)],
                                      grad_o1, opts);
        add_(grad_o2, g);
    }

    auto rb_back = [&](const RbRef& rb, const Tensor<T>& g, ResblockTape<T>& tape) {
        ResblockGrads<T> gr = resblock_backward(g, store_.value(rb.c1.w), store_.value(rb.c2.w),
                                                tape, rb.c1.spec, opts);
        add_(store_.grad(rb.c1.w), gr.w1);
        add_(store_.grad(rb.c1.b), gr.b1);
        add_(store_.grad(rb.c2.w), gr.w2);
        add_(store_.grad(rb.c2.b), gr.b2);
        return std::move(gr.input);
    };

    Tensor<T> g = rb_back(stem_rb2_, grad_o2, trace.stem_rb2);
    g = rb_back(stem_rb1_, g, trace.stem_rb1);
    add_(g, grad_o1);

    ConvGrads<T> gs = conv2d_backward(g, store_.value(stem_conv_.w), trace.stem_conv,
                                      stem_conv_.spec, opts);
    add_(store_.grad(stem_conv_.w), gs.weights);
    add_(store_.grad(stem_conv_.b), gs.bias);
}

#define SRNET_INSTANTIATE(T)          \
    template class ParameterStore<T>; \
    template struct DerainOutput<T>;  \
    template struct BranchTrace<T>;   \
    template struct ForwardTrace<T>;  \
    template class SrnetModel<T>;

SRNET_INSTANTIATE(float)
SRNET_INSTANTIATE(double)
#undef SRNET_INSTANTIATE

}  // namespace srnet
