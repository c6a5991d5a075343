#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "srnet/conv2d.hpp"
#include "srnet/pooling.hpp"
#include "srnet/resblock.hpp"
#include "srnet/rng.hpp"
#include "srnet/tensor.hpp"

namespace srnet {

/// Architecture hyperparameters. The toggles select the ablation variants:
///   Ba  plain resblock chain, no global residual
///   Bb  Ba + global residual
///   Bc  encoder-decoder with bilinear upsampling
///   Bd  encoder-decoder with max-unpooling (single scale)
///   Be  three dilated scales with one shared parameter set
///   Bf  three dilated scales, independent parameters (default)
struct ModelConfig {
    int64_t width = 64;  // feature channels N
    int64_t depth = 2;   // pool/unpool stages per branch T
    std::vector<int64_t> dilation_factors = {1, 2, 3};

    bool multi_scale = true;
    bool encoder_decoder = true;  // false: no pooling, resblocks only
    bool use_maxunpool = true;    // false: bilinear upsampling in the decoder
    bool global_residual = true;
    bool local_skips = true;
    bool weight_sharing = false;

    int64_t n_scales() const { return multi_scale ? static_cast<int64_t>(dilation_factors.size()) : 1; }
    /// Spatial extents must divide this (2^T through the pooling pyramid).
    int64_t alignment() const { return encoder_decoder ? (int64_t(1) << depth) : 1; }
    void validate() const;

    static ModelConfig ablation(const std::string& variant);  // "Ba".."Bf"
    std::string describe() const;
};

/// Ordered, named learnable tensors with matching gradient slots.
template <typename T>
class ParameterStore {
public:
    size_t add(std::string name, Tensor<T> value);
    size_t size() const { return entries_.size(); }
    int64_t scalar_count() const;

    const std::string& name(size_t i) const { return entries_[i].name; }
    Tensor<T>& value(size_t i) { return entries_[i].value; }
    const Tensor<T>& value(size_t i) const { return entries_[i].value; }
    Tensor<T>& grad(size_t i) { return entries_[i].grad; }
    const Tensor<T>& grad(size_t i) const { return entries_[i].grad; }

    bool has(const std::string& name) const { return by_name_.count(name) != 0; }
    size_t index_of(const std::string& name) const;
    void zero_grads();

private:
    struct Entry {
        std::string name;
        Tensor<T> value;
        Tensor<T> grad;
    };
    std::vector<Entry> entries_;
    std::map<std::string, size_t> by_name_;
};

/// Everything the forward pass produces: the derained estimate, the total
/// rain layer, and the per-scale rain layers / sparse feature maps.
/// background + rain_total reassembles the input exactly (background is
/// defined by subtraction and never post-processed here).
template <typename T>
struct DerainOutput {
    Tensor<T> background;                 // B~
    Tensor<T> rain_total;                 // R~ = sum of rain_scales
    std::vector<Tensor<T>> rain_scales;   // one per scale, image space
    std::vector<Tensor<T>> feature_maps;  // M per scale, (batch, N, H, W)
};

template <typename T>
struct BranchTrace {
    std::vector<ResblockTape<T>> enc_blocks;
    std::vector<PoolIndices> pools;            // per encoder stage
    std::vector<ResblockTape<T>> dec_blocks;
    std::vector<TensorShape> upsample_in;      // decoder pre-upsample shapes
    std::vector<Tensor<T>> unpooled;           // decoder post-upsample, pre-skip
    ConvTape<T> fuse1, fuse3, head;
    Tensor<T> fuse_relu;                       // ReLU mask between the fusion convs
};

template <typename T>
struct ForwardTrace {
    Tensor<T> shallow1;  // O_1: post stem conv
    Tensor<T> shallow2;  // O_2: post the two stem resblocks
    ConvTape<T> stem_conv;
    ResblockTape<T> stem_rb1, stem_rb2;
    std::vector<BranchTrace<T>> branches;
    bool consumed = false;
};

/// The structural residual deraining network: a stem (conv + two resblocks)
/// feeding parallel encoder-decoder branches whose dilation factors differ,
/// each emitting one scale's rain layer through its own head convolution.
/// The background estimate is input minus the summed rain layers.
template <typename T>
class SrnetModel {
public:
    /// Fresh Kaiming-initialized parameters, reproducible from the rng seed.
    SrnetModel(const ModelConfig& cfg, RngState rng);
    /// Adopts loaded parameters; throws if the name set does not match cfg.
    SrnetModel(const ModelConfig& cfg, ParameterStore<T> store);

    const ModelConfig& config() const { return cfg_; }
    ParameterStore<T>& params() { return store_; }
    const ParameterStore<T>& params() const { return store_; }

    DerainOutput<T> forward(const Tensor<T>& input, ForwardTrace<T>* trace = nullptr,
                            const ExecOpts& opts = {}) const;

    /// Accumulates dLoss/dParam into the store's gradient slots given
    /// dLoss/dBackground. Consumes the trace.
    void backward(const Tensor<T>& grad_background, ForwardTrace<T>& trace,
                  const ExecOpts& opts = {});

    /// One scale's subnetwork: (sparse feature map M, rain layer R_scale).
    std::pair<Tensor<T>, Tensor<T>> branch_forward(int64_t scale, const Tensor<T>& o1,
                                                   const Tensor<T>& o2,
                                                   BranchTrace<T>* trace = nullptr,
                                                   const ExecOpts& opts = {}) const;

    static int64_t param_count(const ModelConfig& cfg);
    static std::vector<std::string> param_names(const ModelConfig& cfg);

private:
    struct ConvRef {
        ConvSpec spec;
        size_t w = 0, b = 0;
    };
    struct RbRef {
        ConvRef c1, c2;
    };
    struct BranchRefs {
        std::vector<RbRef> enc, dec;
        ConvRef fuse1, fuse3, head;
        int64_t df = 1;
    };

    /// Reverse-mode pass of one branch. Returns grad wrt o2; adds the global
    /// residual contribution into grad_o1 when enabled.
    Tensor<T> branch_backward(int64_t scale, const Tensor<T>& grad_rain, BranchTrace<T>& trace,
                              Tensor<T>& grad_o1, const ExecOpts& opts);

    void bind_layers();
    void check_input(const Tensor<T>& input) const;

    ModelConfig cfg_;
    ParameterStore<T> store_;
    ConvRef stem_conv_;
    RbRef stem_rb1_, stem_rb2_;
    std::vector<BranchRefs> branches_;
};

}  // namespace srnet
