#include "arbsr/model.hpp"

#include <cmath>
#include <string>

#include "arbsr/resize.hpp"

namespace arbsr {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::BicubicHead: return "bicubic_head";
        case Variant::UpsampleOnly: return "upsample_only";
        case Variant::NoGuidance: return "no_guidance";
        case Variant::Full: return "full";
    }
    return "full";
}

Variant parse_variant(const std::string& name) {
    if (name == "bicubic_head") return Variant::BicubicHead;
    if (name == "upsample_only") return Variant::UpsampleOnly;
    if (name == "no_guidance") return Variant::NoGuidance;
    if (name == "full") return Variant::Full;
    throw config_error("unknown model variant '" + name + "'");
}

void ModelConfig::validate() const {
    if (blocks < 1) throw config_error("config: blocks must be >= 1");
    if (channels < 8 || channels % 8 != 0)
        throw config_error("config: channels must be a positive multiple of 8, got " +
                           std::to_string(channels));
    if (adapt_every < 1 || blocks % adapt_every != 0)
        throw config_error("config: adapt_every must divide blocks (" +
                           std::to_string(adapt_every) + " vs " + std::to_string(blocks) + ")");
    if (experts < 1) throw config_error("config: experts must be >= 1");
    if (kernel != 1)
        throw config_error("config: only a 1x1 upsampler neighborhood is supported");
    if (hidden < 1) throw config_error("config: hidden width must be >= 1");
}

namespace {

void kaiming_uniform(Tensor& t, int fan_in, Rng& rng) {
    const real bound = std::sqrt(real(6) / real(fan_in));
    for (real& v : t.data) v = (real)rng.uniform(-bound, bound);
}

std::vector<real> bias_vec(const Parameter& b) {
    return b.value.data;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvLayer
// ---------------------------------------------------------------------------

ConvLayer::ConvLayer(const std::string& name, int c_out, int c_in, int ksize, int pad_,
                     int stride_, bool bias)
    : k(name + ".k", Shape4{c_out, c_in, ksize, ksize}),
      pad(pad_),
      stride(stride_),
      has_bias(bias) {
    if (has_bias) b = Parameter(name + ".b", Shape4{1, 1, 1, c_out});
}

void ConvLayer::init(Rng& rng) {
    kaiming_uniform(k.value, k.value.shape.c * k.value.shape.h * k.value.shape.w, rng);
    if (has_bias) std::fill(b.value.data.begin(), b.value.data.end(), real(0));
}

Tensor ConvLayer::forward(const Tensor& x) const {
    const std::vector<real> bias = has_bias ? bias_vec(b) : std::vector<real>{};
    if (stride == 1) return conv2d(x, k.value, bias, pad);
    return conv2d_strided(x, k.value, bias, pad, stride);
}

void ConvLayer::backward(const Tensor& x, const Tensor& grad_y, Tensor* grad_x) {
    std::vector<real> gb(has_bias ? (std::size_t)k.value.shape.n : 0, real(0));
    std::vector<real>* gbp = has_bias ? &gb : nullptr;
    if (stride == 1) {
        conv2d_backward(x, k.value, grad_y, pad, grad_x, &k.grad, gbp);
    } else {
        conv2d_strided_backward(x, k.value, grad_y, pad, stride, grad_x, &k.grad, gbp);
    }
    if (has_bias)
        for (std::size_t i = 0; i < gb.size(); ++i) b.grad.data[i] += gb[i];
}

void ConvLayer::collect(std::vector<Parameter*>& out) {
    out.push_back(&k);
    if (has_bias) out.push_back(&b);
}

// ---------------------------------------------------------------------------
// FcLayer
// ---------------------------------------------------------------------------

FcLayer::FcLayer(const std::string& name, int d_out, int d_in)
    : w(name + ".w", Shape4{1, 1, d_out, d_in}), b(name + ".b", Shape4{1, 1, 1, d_out}) {}

void FcLayer::init(Rng& rng) {
    kaiming_uniform(w.value, w.value.shape.w, rng);
    std::fill(b.value.data.begin(), b.value.data.end(), real(0));
}

void FcLayer::init_zero() {
    std::fill(w.value.data.begin(), w.value.data.end(), real(0));
    std::fill(b.value.data.begin(), b.value.data.end(), real(0));
}

Tensor FcLayer::forward(const Tensor& rows) const {
    return fully_connected(rows, w.value, bias_vec(b));
}

void FcLayer::backward(const Tensor& rows, const Tensor& grad_y, Tensor* grad_rows) {
    std::vector<real> gb((std::size_t)w.value.shape.h, real(0));
    fully_connected_backward(rows, w.value, grad_y, grad_rows, &w.grad, &gb);
    for (std::size_t i = 0; i < gb.size(); ++i) b.grad.data[i] += gb[i];
}

void FcLayer::collect(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
}

// ---------------------------------------------------------------------------
// ExpertBank
// ---------------------------------------------------------------------------

ExpertBank::ExpertBank(const std::string& name, int e, Shape4 expert_shape, int hidden)
    : fc1(name + ".fc1", hidden, 2), fc2(name + ".fc2", e, hidden) {
    for (int i = 0; i < e; ++i)
        experts.emplace_back(name + ".expert" + std::to_string(i), expert_shape);
}

void ExpertBank::init(Rng& rng) {
    for (Parameter& ex : experts)
        kaiming_uniform(ex.value,
                        ex.value.shape.c * ex.value.shape.h * ex.value.shape.w, rng);
    fc1.init(rng);
    // Zero logit layer: routing starts uniform, so the bank behaves like
    // the plain average of its experts until training moves it.
    fc2.init_zero();
}

void ExpertBank::collect(std::vector<Parameter*>& out) {
    for (Parameter& ex : experts) out.push_back(&ex);
    fc1.collect(out);
    fc2.collect(out);
}

ExpertBank::RouteCache ExpertBank::route(const ScalePair& s) const {
    RouteCache rc;
    rc.cond = Tensor(Shape4{1, 1, 1, 2});
    rc.cond.data[0] = s.r_h / real(4);
    rc.cond.data[1] = s.r_v / real(4);
    rc.h1 = relu(fc1.forward(rc.cond));
    rc.logits = fc2.forward(rc.h1);
    rc.weights = softmax(rc.logits.data);
    rc.filter = Tensor(experts[0].value.shape);
    for (int i = 0; i < count(); ++i) {
        const real wgt = rc.weights[(std::size_t)i];
        const std::vector<real>& ev = experts[(std::size_t)i].value.data;
        for (std::size_t j = 0; j < ev.size(); ++j) rc.filter.data[j] += wgt * ev[j];
    }
    return rc;
}

void ExpertBank::route_backward(const RouteCache& rc, const Tensor& grad_filter) {
    check_same_shape(rc.filter, grad_filter, "route_backward");
    std::vector<real> grad_w((std::size_t)count(), real(0));
    for (int i = 0; i < count(); ++i) {
        Parameter& ex = experts[(std::size_t)i];
        const real wgt = rc.weights[(std::size_t)i];
        real dot = 0;
        for (std::size_t j = 0; j < ex.value.data.size(); ++j) {
            ex.grad.data[j] += wgt * grad_filter.data[j];
            dot += grad_filter.data[j] * ex.value.data[j];
        }
        grad_w[(std::size_t)i] = dot;
    }
    const std::vector<real> grad_logits = softmax_backward(rc.weights, grad_w);
    Tensor gl(Shape4{1, 1, 1, count()});
    gl.data = grad_logits;
    Tensor gh1(rc.h1.shape);
    fc2.backward(rc.h1, gl, &gh1);
    const Tensor gh1_pre = relu_backward(rc.h1, gh1);
    fc1.backward(rc.cond, gh1_pre, nullptr);
}

Tensor scale_aware_conv(const Tensor& f, const ScalePair& s, const ExpertBank& bank,
                        ExpertBank::RouteCache* rc) {
    ExpertBank::RouteCache local = bank.route(s);
    Tensor out = conv2d(f, local.filter, {}, 1);
    if (rc) *rc = std::move(local);
    return out;
}

// ---------------------------------------------------------------------------
// Hourglass
// ---------------------------------------------------------------------------

Hourglass::Hourglass(const std::string& name, int c)
    : c0(name + ".c0", c / 4, c, 3, 1, 2),
      c1(name + ".c1", c / 4, c / 4, 3, 1),
      c2(name + ".c2", c / 4, c / 4, 3, 1),
      c3(name + ".c3", 1, c / 4, 3, 1) {}

void Hourglass::init(Rng& rng) {
    c0.init(rng);
    c1.init(rng);
    c2.init(rng);
    c3.init(rng);
}

void Hourglass::collect(std::vector<Parameter*>& out) {
    c0.collect(out);
    c1.collect(out);
    c2.collect(out);
    c3.collect(out);
}

Tensor Hourglass::forward(const Tensor& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.a0 = c0.forward(x);
    c.a1 = c1.forward(c.a0);
    c.up = upsample_nearest2x(c.a1);
    // The stride-2 encode rounds odd sizes up, so the decoded map can
    // overshoot by one row/column.
    c.cr = crop_to(c.up, x.shape.h, x.shape.w);
    c.a2 = c2.forward(c.cr);
    c.a3 = c3.forward(c.a2);
    c.m = sigmoid(c.a3);
    return c.m;
}

void Hourglass::backward(const Tensor& x, const Cache& cache, const Tensor& grad_m,
                         Tensor* grad_x) {
    const Tensor ga3 = sigmoid_backward(cache.m, grad_m);
    Tensor ga2(cache.a2.shape);
    c3.backward(cache.a2, ga3, &ga2);
    Tensor gcr(cache.cr.shape);
    c2.backward(cache.cr, ga2, &gcr);
    const Tensor gup = crop_to_backward(cache.up, gcr);
    const Tensor ga1 = upsample_nearest2x_backward(cache.a1, gup);
    Tensor ga0(cache.a0.shape);
    c1.backward(cache.a0, ga1, &ga0);
    Tensor gx(x.shape);
    c0.backward(x, ga0, &gx);
    if (grad_x)
        for (std::size_t i = 0; i < gx.data.size(); ++i) grad_x->data[i] += gx.data[i];
}

// ---------------------------------------------------------------------------
// AdaptionBlock
// ---------------------------------------------------------------------------

AdaptionBlock::AdaptionBlock(const std::string& name, int c, int e, int hidden, bool guided)
    : bank(name + ".bank", e, Shape4{c, c, 3, 3}, hidden), use_guidance(guided) {
    if (use_guidance) hg = Hourglass(name + ".hg", c);
}

void AdaptionBlock::init(Rng& rng) {
    bank.init(rng);
    if (use_guidance) hg.init(rng);
}

void AdaptionBlock::collect(std::vector<Parameter*>& out) {
    bank.collect(out);
    if (use_guidance) hg.collect(out);
}

Tensor AdaptionBlock::forward(const Tensor& x, const ScalePair& s, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.route = bank.route(s);
    c.fa = conv2d(x, c.route.filter, {}, 1);
    if (!use_guidance) return add(x, c.fa);
    c.m = hg.forward(x, &c.hg);
    return add(x, mul(c.fa, c.m));
}

void AdaptionBlock::backward(const Tensor& x, const Cache& cache, const Tensor& grad_out,
                             Tensor* grad_x) {
    // Identity path.
    if (grad_x) grad_x->data = grad_out.data;

    Tensor gfa(cache.fa.shape);
    if (use_guidance) {
        Tensor gm(cache.m.shape);
        mul_backward(cache.fa, cache.m, grad_out, &gfa, &gm);
        hg.backward(x, cache.hg, gm, grad_x);
    } else {
        gfa.data = grad_out.data;
    }

    Tensor gfilter(cache.route.filter.shape);
    Tensor gx_conv(x.shape);
    conv2d_backward(x, cache.route.filter, gfa, 1, grad_x ? &gx_conv : nullptr,
                    &gfilter, nullptr);
    if (grad_x)
        for (std::size_t i = 0; i < gx_conv.data.size(); ++i)
            grad_x->data[i] += gx_conv.data[i];
    bank.route_backward(cache.route, gfilter);
}

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

ResBlock::ResBlock(const std::string& name, int c)
    : c1(name + ".c1", c, c, 3, 1), c2(name + ".c2", c, c, 3, 1) {}

void ResBlock::init(Rng& rng) {
    c1.init(rng);
    c2.init(rng);
}

void ResBlock::collect(std::vector<Parameter*>& out) {
    c1.collect(out);
    c2.collect(out);
}

Tensor ResBlock::forward(const Tensor& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.r = relu(c1.forward(x));
    return add(x, c2.forward(c.r));
}

void ResBlock::backward(const Tensor& x, const Cache& cache, const Tensor& grad_out,
                        Tensor* grad_x) {
    Tensor gr(cache.r.shape);
    c2.backward(cache.r, grad_out, &gr);
    const Tensor gr_pre = relu_backward(cache.r, gr);
    Tensor gx1(x.shape);
    c1.backward(x, gr_pre, &gx1);
    if (grad_x) {
        grad_x->data = grad_out.data;
        for (std::size_t i = 0; i < gx1.data.size(); ++i) grad_x->data[i] += gx1.data[i];
    }
}

// ---------------------------------------------------------------------------
// Upsampler construction (forward/backward live in upsampler.cpp)
// ---------------------------------------------------------------------------

Upsampler::Upsampler(const std::string& name, int c_, int e_, int hidden_)
    : c(c_),
      e(e_),
      hidden(hidden_),
      fc1(name + ".fc1", hidden_, 4),
      fc2(name + ".fc2", hidden_, hidden_),
      fhead(name + ".fhead", 2 * e_, hidden_),
      ohead(name + ".ohead", 2, hidden_) {
    const int cb = c / 8;
    for (int i = 0; i < e; ++i) {
        kb.emplace_back(name + ".kb" + std::to_string(i), Shape4{cb, c, 1, 1});
        ke.emplace_back(name + ".ke" + std::to_string(i), Shape4{c, cb, 1, 1});
    }
}

void Upsampler::init(Rng& rng) {
    for (Parameter& p : kb) kaiming_uniform(p.value, c, rng);
    for (Parameter& p : ke) kaiming_uniform(p.value, c / 8, rng);
    fc1.init(rng);
    fc2.init(rng);
    // Zeroed heads: uniform routing and zero offsets at initialization.
    fhead.init_zero();
    ohead.init_zero();
}

void Upsampler::collect(std::vector<Parameter*>& out) {
    fc1.collect(out);
    fc2.collect(out);
    fhead.collect(out);
    ohead.collect(out);
    for (Parameter& p : kb) out.push_back(&p);
    for (Parameter& p : ke) out.push_back(&p);
}

// ---------------------------------------------------------------------------
// ArbNet
// ---------------------------------------------------------------------------

ArbNet::ArbNet(const ModelConfig& config) : cfg(config) {
    cfg.validate();
    const int c = cfg.channels;
    head = ConvLayer("head", c, 3, 3, 1);
    tail = ConvLayer("tail", 3, c, 3, 1);
    const bool with_adapts =
        cfg.variant == Variant::Full || cfg.variant == Variant::NoGuidance;
    for (int i = 0; i < cfg.blocks; ++i) {
        blocks.emplace_back("block" + std::to_string(i), c);
        stages.push_back(Stage{false, i});
        if (with_adapts && (i + 1) % cfg.adapt_every == 0) {
            const int ai = (int)adapts.size();
            adapts.emplace_back("adapt" + std::to_string(ai), c, cfg.experts, cfg.hidden,
                                cfg.variant == Variant::Full);
            stages.push_back(Stage{true, ai});
        }
    }
    if (cfg.variant != Variant::BicubicHead)
        up = Upsampler("up", c, cfg.experts, cfg.hidden);
}

void ArbNet::init(unsigned long long seed) {
    Rng rng(seed);
    head.init(rng);
    for (Stage st : stages) {
        if (st.is_adapt) {
            adapts[(std::size_t)st.index].init(rng);
        } else {
            blocks[(std::size_t)st.index].init(rng);
        }
    }
    if (cfg.variant != Variant::BicubicHead) up.init(rng);
    tail.init(rng);
}

std::vector<Parameter*> ArbNet::parameters() {
    std::vector<Parameter*> out;
    head.collect(out);
    for (Stage st : stages) {
        if (st.is_adapt) {
            adapts[(std::size_t)st.index].collect(out);
        } else {
            blocks[(std::size_t)st.index].collect(out);
        }
    }
    if (cfg.variant != Variant::BicubicHead) up.collect(out);
    tail.collect(out);
    return out;
}

std::int64_t ArbNet::parameter_count() {
    std::int64_t n = 0;
    for (const Parameter* p : parameters()) n += p->value.size();
    return n;
}

int scaled_size(int n, real r) {
    return (int)std::lround((double)n * (double)r);
}

Tensor ArbNet::forward(const Tensor& lr, const ScalePair& s, Cache* cache,
                       std::vector<Tensor>* block_taps,
                       std::vector<Tensor>* guidance) const {
    return forward_impl(lr, s, scaled_size(lr.shape.h, s.r_v),
                        scaled_size(lr.shape.w, s.r_h), cache, block_taps, guidance);
}

Tensor ArbNet::forward_to(const Tensor& lr, int h_out, int w_out, Cache* cache,
                          std::vector<Tensor>* block_taps,
                          std::vector<Tensor>* guidance) const {
    const ScalePair s{real(w_out) / real(lr.shape.w), real(h_out) / real(lr.shape.h)};
    return forward_impl(lr, s, h_out, w_out, cache, block_taps, guidance);
}

Tensor ArbNet::forward_impl(const Tensor& lr, const ScalePair& s, int h_out, int w_out,
                            Cache* cache, std::vector<Tensor>* block_taps,
                            std::vector<Tensor>* guidance) const {
    if (lr.shape.c != 3)
        throw shape_error("forward: expected a 3-channel input, got " + lr.shape.str());
    Cache local;
    Cache& c = cache ? *cache : local;
    c.scale = s;
    c.h_out = h_out;
    c.w_out = w_out;
    c.bcaches.assign(blocks.size(), {});
    c.acaches.assign(adapts.size(), {});
    c.stage_out.clear();
    c.stage_out.reserve(stages.size());

    c.head_out = head.forward(lr);
    const Tensor* cur = &c.head_out;
    for (Stage st : stages) {
        Tensor out;
        if (st.is_adapt) {
            out = adapts[(std::size_t)st.index].forward(*cur, s,
                                                        &c.acaches[(std::size_t)st.index]);
            if (guidance && adapts[(std::size_t)st.index].use_guidance)
                guidance->push_back(c.acaches[(std::size_t)st.index].m);
        } else {
            out = blocks[(std::size_t)st.index].forward(*cur,
                                                        &c.bcaches[(std::size_t)st.index]);
            if (block_taps) block_taps->push_back(out);
        }
        c.stage_out.push_back(std::move(out));
        cur = &c.stage_out.back();
    }
    c.pre_up = add(c.head_out, *cur);

    if (cfg.variant == Variant::BicubicHead) {
        c.lr_rgb = tail.forward(c.pre_up);
        return bicubic_resize(c.lr_rgb, h_out, w_out);
    }
    c.feats = up.forward(c.pre_up, s, h_out, w_out, &c.upc);
    return tail.forward(c.feats);
}

void ArbNet::backward(const Tensor& lr, Cache& cache, const Tensor& grad_out,
                      Tensor* grad_lr) {
    Tensor g_pre_up(cache.pre_up.shape);
    if (cfg.variant == Variant::BicubicHead) {
        const Tensor g_lr_rgb = bicubic_resize_backward(cache.lr_rgb, grad_out);
        tail.backward(cache.pre_up, g_lr_rgb, &g_pre_up);
    } else {
        Tensor g_feats(cache.feats.shape);
        tail.backward(cache.feats, grad_out, &g_feats);
        up.backward(cache.pre_up, cache.upc, g_feats, &g_pre_up);
    }

    // Global residual: the gradient splits between the backbone tail and
    // the head skip.
    Tensor g_cur = g_pre_up;
    for (std::size_t si = stages.size(); si-- > 0;) {
        const Stage st = stages[si];
        const Tensor& input = si == 0 ? cache.head_out : cache.stage_out[si - 1];
        Tensor g_in(input.shape);
        if (st.is_adapt) {
            adapts[(std::size_t)st.index].backward(input,
                                                   cache.acaches[(std::size_t)st.index],
                                                   g_cur, &g_in);
        } else {
            blocks[(std::size_t)st.index].backward(input,
                                                   cache.bcaches[(std::size_t)st.index],
                                                   g_cur, &g_in);
        }
        g_cur = std::move(g_in);
    }
    for (std::size_t i = 0; i < g_cur.data.size(); ++i) g_cur.data[i] += g_pre_up.data[i];
    head.backward(lr, g_cur, grad_lr);
}

}  // namespace arbsr
