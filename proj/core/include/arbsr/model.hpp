#pragma once

#include <string>
#include <vector>

#include "arbsr/grid.hpp"
#include "arbsr/ops.hpp"
#include "arbsr/rng.hpp"
#include "arbsr/scale.hpp"

namespace arbsr {

/// Ablation variants, ordered as the harness reports them. Full keeps
/// every component; the others strip them back one by one.
enum class Variant {
    BicubicHead,   // plain backbone, tail at LR, bicubic to target size
    UpsampleOnly,  // scale-aware upsampling, no adaption blocks
    NoGuidance,    // adaption blocks without the guidance map (M == 1)
    Full,
};

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
    int blocks = 8;       // residual blocks in the backbone
    int channels = 32;    // feature width C
    int adapt_every = 2;  // insert an adaption block after every K blocks
    int experts = 4;      // experts per bank
    int kernel = 1;       // upsampler filter neighborhood; only 1 is supported
    int hidden = 64;      // controller / conditioning-trunk width
    Variant variant = Variant::Full;

    void validate() const;  // throws config_error
    int bottleneck() const { return channels / 8; }
};

// ---------------------------------------------------------------------------
// Layers. Each owns its Parameters, exposes forward / backward, and
// appends its parameters (in a fixed order) via collect(). backward
// overwrites activation gradients and accumulates parameter gradients.
// ---------------------------------------------------------------------------

struct ConvLayer {
    Parameter k, b;
    int pad = 1;
    int stride = 1;
    bool has_bias = true;

    ConvLayer() = default;
    ConvLayer(const std::string& name, int c_out, int c_in, int ksize, int pad,
              int stride = 1, bool bias = true);

    void init(Rng& rng);
    Tensor forward(const Tensor& x) const;
    void backward(const Tensor& x, const Tensor& grad_y, Tensor* grad_x);
    void collect(std::vector<Parameter*>& out);
};

struct FcLayer {
    Parameter w, b;  // w: 1x1xDoutxDin, b: 1x1x1xDout

    FcLayer() = default;
    FcLayer(const std::string& name, int d_out, int d_in);

    void init(Rng& rng);
    void init_zero();
    Tensor forward(const Tensor& rows) const;
    void backward(const Tensor& rows, const Tensor& grad_y, Tensor* grad_rows);
    void collect(std::vector<Parameter*>& out);
};

/// A bank of E same-shaped kernels and the two-layer controller that
/// routes among them from the (normalized) scale pair.
struct ExpertBank {
    std::vector<Parameter> experts;
    FcLayer fc1, fc2;

    ExpertBank() = default;
    ExpertBank(const std::string& name, int e, Shape4 expert_shape, int hidden);

    void init(Rng& rng);
    int count() const { return (int)experts.size(); }
    void collect(std::vector<Parameter*>& out);

    struct RouteCache {
        Tensor cond;    // 1x1x1x2
        Tensor h1;      // post-relu hidden row
        Tensor logits;  // 1x1x1xE
        std::vector<real> weights;
        Tensor filter;  // convex combination of experts
    };

    RouteCache route(const ScalePair& s) const;
    /// grad_filter is d(loss)/d(combined filter); flows into experts and
    /// the controller.
    void route_backward(const RouteCache& rc, const Tensor& grad_filter);
};

/// conv2d of F with the bank's routed filter (3x3, padding 1, no bias).
Tensor scale_aware_conv(const Tensor& f, const ScalePair& s, const ExpertBank& bank,
                        ExpertBank::RouteCache* rc = nullptr);

/// Encoder-decoder stack producing the one-channel guidance map:
/// strided conv down, conv, nearest x2 up, conv, conv to 1 channel,
/// sigmoid.
struct Hourglass {
    ConvLayer c0, c1, c2, c3;

    Hourglass() = default;
    Hourglass(const std::string& name, int c);

    void init(Rng& rng);
    void collect(std::vector<Parameter*>& out);

    struct Cache {
        Tensor a0, a1, up, cr, a2, a3, m;
    };

    Tensor forward(const Tensor& x, Cache* cache) const;
    /// Adds the input gradient into *grad_x (the caller is summing
    /// several paths into F).
    void backward(const Tensor& x, const Cache& cache, const Tensor& grad_m,
                  Tensor* grad_x);
};

/// F -> F + (scale-aware conv of F) * M, with M from the hourglass.
struct AdaptionBlock {
    ExpertBank bank;
    Hourglass hg;
    bool use_guidance = true;

    AdaptionBlock() = default;
    AdaptionBlock(const std::string& name, int c, int e, int hidden, bool guided);

    void init(Rng& rng);
    void collect(std::vector<Parameter*>& out);

    struct Cache {
        ExpertBank::RouteCache route;
        Tensor fa;  // adapted features
        Hourglass::Cache hg;
        Tensor m;   // guidance map (unused when use_guidance is false)
    };

    Tensor forward(const Tensor& x, const ScalePair& s, Cache* cache) const;
    void backward(const Tensor& x, const Cache& cache, const Tensor& grad_out,
                  Tensor* grad_x);
};

struct ResBlock {
    ConvLayer c1, c2;

    ResBlock() = default;
    ResBlock(const std::string& name, int c);

    void init(Rng& rng);
    void collect(std::vector<Parameter*>& out);

    struct Cache {
        Tensor r;  // post-relu inner activation
    };

    Tensor forward(const Tensor& x, Cache* cache) const;
    void backward(const Tensor& x, const Cache& cache, const Tensor& grad_out,
                  Tensor* grad_x);
};

/// Per-pixel learned resampling: project each output pixel into LR
/// space, predict an offset and a bottleneck/expansion filter pair from
/// the conditioning vector, bilinearly sample, and filter.
struct Upsampler {
    int c = 0, e = 0, hidden = 0;
    FcLayer fc1, fc2, fhead, ohead;
    std::vector<Parameter> kb;  // bottleneck experts, (C/8) x C x 1 x 1
    std::vector<Parameter> ke;  // expansion experts, C x (C/8) x 1 x 1

    Upsampler() = default;
    Upsampler(const std::string& name, int c, int e, int hidden);

    void init(Rng& rng);
    void collect(std::vector<Parameter*>& out);

    struct Cache {
        SamplingGrid grid;
        Tensor cond;             // P x1x1x4 conditioning rows, P = H_out*W_out
        Tensor h1, h2;           // trunk activations (h1 post-relu)
        Tensor flog;             // P x1x1x(2E) filter-head logits
        Tensor offs;             // P x1x1x2 offsets, post-tanh
        std::vector<real> wb, we;  // routing weights, P*E each
    };

    Tensor forward(const Tensor& f, const ScalePair& s, int h_out, int w_out,
                   Cache* cache) const;
    void backward(const Tensor& f, const Cache& cache, const Tensor& grad_out,
                  Tensor* grad_f);
};

// ---------------------------------------------------------------------------

/// The assembled network: head conv, residual backbone with adaption
/// blocks every K blocks, global residual, scale-aware upsampling, tail.
struct ArbNet {
    ModelConfig cfg;
    ConvLayer head, tail;
    std::vector<ResBlock> blocks;
    std::vector<AdaptionBlock> adapts;
    Upsampler up;

    // Stage sequence: indices into blocks/adapts in execution order.
    struct Stage {
        bool is_adapt = false;
        int index = 0;
    };
    std::vector<Stage> stages;

    explicit ArbNet(const ModelConfig& config = {});

    void init(unsigned long long seed);
    std::vector<Parameter*> parameters();
    std::int64_t parameter_count();

    struct Cache {
        ScalePair scale;
        int h_out = 0, w_out = 0;
        Tensor head_out;
        std::vector<Tensor> stage_out;  // one per stage
        std::vector<ResBlock::Cache> bcaches;
        std::vector<AdaptionBlock::Cache> acaches;
        Tensor pre_up;   // head_out + backbone output
        Upsampler::Cache upc;
        Tensor feats;    // upsampled features (HR) or unused for bicubic head
        Tensor lr_rgb;   // bicubic-head path: tail output at LR size
    };

    /// Target size derived from the scale: round(r * dim).
    Tensor forward(const Tensor& lr, const ScalePair& s, Cache* cache = nullptr,
                   std::vector<Tensor>* block_taps = nullptr,
                   std::vector<Tensor>* guidance = nullptr) const;
    /// Exact target size; the conditioning scale is the size ratio.
    Tensor forward_to(const Tensor& lr, int h_out, int w_out, Cache* cache = nullptr,
                      std::vector<Tensor>* block_taps = nullptr,
                      std::vector<Tensor>* guidance = nullptr) const;
    Tensor forward_impl(const Tensor& lr, const ScalePair& s, int h_out, int w_out,
                        Cache* cache, std::vector<Tensor>* block_taps,
                        std::vector<Tensor>* guidance) const;

    /// Needs the Cache from the matching forward. grad_lr may be null.
    void backward(const Tensor& lr, Cache& cache, const Tensor& grad_out,
                  Tensor* grad_lr = nullptr);
};

/// round(r * n) target-size rule shared by the CLI and the data pipe.
int scaled_size(int n, real r);

}  // namespace arbsr
