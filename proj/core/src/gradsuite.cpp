#include "arbsr/gradsuite.hpp"

#include <algorithm>
#include <cmath>

#include "arbsr/model.hpp"
#include "arbsr/ops.hpp"
#include "arbsr/resize.hpp"
#include "arbsr/rng.hpp"

namespace arbsr {

namespace {

void fill_uniform(Tensor& t, Rng& rng, real lo, real hi) {
    for (auto& v : t.data) v = real(rng.uniform(double(lo), double(hi)));
}

// Optional re-randomization for `gradcheck --seed`; 0 keeps the pinned
// per-case streams.
std::uint64_t g_seed_mix = 0;

Rng case_rng(std::uint64_t base) {
    return Rng(base ^ (g_seed_mix * 0x9e3779b97f4a7c15ull));
}

void zero_grads(const std::vector<Parameter*>& params) {
    for (Parameter* p : params)
        std::fill(p->grad.data.begin(), p->grad.data.end(), real(0));
}

// Fixed random projection with magnitudes bounded away from zero, so the
// scalar loss is sensitive to every output element.
Tensor make_projection(const Shape4& s, Rng& rng) {
    Tensor p(s);
    for (auto& v : p.data) {
        real m = rng.uniform(real(0.5), real(1.25));
        v = rng.uniform() < real(0.5) ? -m : m;
    }
    return p;
}

real project(const Tensor& t, const Tensor& proj) {
    double acc = 0;
    for (std::size_t i = 0; i < t.data.size(); ++i)
        acc += double(t.data[i]) * double(proj.data[i]);
    return real(acc);
}

// Randomize an FC layer in place (used where the standard zero-init would
// leave upstream parameters without gradient signal).
void randomize_fc(FcLayer& fc, Rng& rng, real wscale, real bscale) {
    fill_uniform(fc.w.value, rng, -wscale, wscale);
    fill_uniform(fc.b.value, rng, -bscale, bscale);
}

SuiteResult conv_case(const char* name, ConvEngine engine, int stride) {
    Rng rng = case_rng(901);
    Parameter in("input", Shape4{2, 3, 8, 8});
    Parameter k("kernel", Shape4{4, 3, 3, 3});
    Parameter b("bias", Shape4{1, 1, 1, 4});
    fill_uniform(in.value, rng, real(-1), real(1));
    fill_uniform(k.value, rng, real(-0.5), real(0.5));
    fill_uniform(b.value, rng, real(-0.2), real(0.2));
    std::vector<Parameter*> params{&in, &k, &b};

    auto run = [&]() {
        std::vector<real> bias(b.value.data.begin(), b.value.data.end());
        if (stride == 1) return conv2d(in.value, k.value, bias, 1, engine);
        return conv2d_strided(in.value, k.value, bias, 1, stride);
    };
    Tensor proj = make_projection(run().shape, rng);

    auto loss = [&]() { return project(run(), proj); };
    auto grads = [&]() {
        zero_grads(params);
        std::vector<real> gbias(4, 0);
        if (stride == 1) {
            conv2d_backward(in.value, k.value, proj, 1, &in.grad, &k.grad, &gbias, engine);
        } else {
            conv2d_strided_backward(in.value, k.value, proj, 1, stride, &in.grad, &k.grad,
                                    &gbias);
        }
        for (int oc = 0; oc < 4; ++oc) b.grad.data[std::size_t(oc)] += gbias[std::size_t(oc)];
    };
    return SuiteResult{name, grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult fc_case() {
    Rng rng = case_rng(902);
    Parameter in("input", Shape4{3, 1, 1, 5});
    Parameter w("weight", Shape4{1, 1, 7, 5});
    Parameter b("bias", Shape4{1, 1, 1, 7});
    fill_uniform(in.value, rng, real(-1), real(1));
    fill_uniform(w.value, rng, real(-0.6), real(0.6));
    fill_uniform(b.value, rng, real(-0.2), real(0.2));
    std::vector<Parameter*> params{&in, &w, &b};

    auto run = [&]() {
        std::vector<real> bias(b.value.data.begin(), b.value.data.end());
        return fully_connected(in.value, w.value, bias);
    };
    Tensor proj = make_projection(run().shape, rng);

    auto loss = [&]() { return project(run(), proj); };
    auto grads = [&]() {
        zero_grads(params);
        std::vector<real> gbias(7, 0);
        fully_connected_backward(in.value, w.value, proj, &in.grad, &w.grad, &gbias);
        for (int j = 0; j < 7; ++j) b.grad.data[std::size_t(j)] += gbias[std::size_t(j)];
    };
    return SuiteResult{"fully_connected", grad_check(params, loss, grads), real(1e-4)};
}

template <class Fwd, class Bwd>
SuiteResult unary_case(const char* name, unsigned long long seed, real lo, real hi, Fwd fwd,
                       Bwd bwd) {
    Rng rng = case_rng(seed);
    Parameter in("input", Shape4{2, 3, 6, 6});
    fill_uniform(in.value, rng, lo, hi);
    std::vector<Parameter*> params{&in};
    Tensor proj = make_projection(in.value.shape, rng);

    auto loss = [&]() { return project(fwd(in.value), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor y = fwd(in.value);
        Tensor gx = bwd(y, proj);
        for (std::size_t i = 0; i < gx.data.size(); ++i) in.grad.data[i] += gx.data[i];
    };
    return SuiteResult{name, grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult relu_case() {
    // Keep inputs away from the kink at zero: finite differences straddling
    // it would disagree with the one-sided analytic derivative.
    Rng rng = case_rng(905);
    Parameter in("input", Shape4{2, 3, 6, 6});
    for (auto& v : in.value.data) {
        real m = rng.uniform(real(0.2), real(1.0));
        v = rng.uniform() < real(0.5) ? -m : m;
    }
    std::vector<Parameter*> params{&in};
    Tensor proj = make_projection(in.value.shape, rng);

    auto loss = [&]() { return project(relu(in.value), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor y = relu(in.value);
        Tensor gx = relu_backward(y, proj);
        for (std::size_t i = 0; i < gx.data.size(); ++i) in.grad.data[i] += gx.data[i];
    };
    return SuiteResult{"relu", grad_check(params, loss, grads), real(1e-4)};
}

template <class Fwd, class Bwd>
SuiteResult binary_case(const char* name, unsigned long long seed, Shape4 shape_b, Fwd fwd,
                        Bwd bwd) {
    Rng rng = case_rng(seed);
    Parameter a("a", Shape4{2, 4, 5, 5});
    Parameter b("b", shape_b);
    fill_uniform(a.value, rng, real(-1), real(1));
    fill_uniform(b.value, rng, real(-1), real(1));
    std::vector<Parameter*> params{&a, &b};
    Tensor proj = make_projection(a.value.shape, rng);

    auto loss = [&]() { return project(fwd(a.value, b.value), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor ga(a.value.shape), gb(b.value.shape);
        bwd(a.value, b.value, proj, &ga, &gb);
        for (std::size_t i = 0; i < ga.data.size(); ++i) a.grad.data[i] += ga.data[i];
        for (std::size_t i = 0; i < gb.data.size(); ++i) b.grad.data[i] += gb.data[i];
    };
    return SuiteResult{name, grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult softmax_case() {
    Rng rng = case_rng(910);
    Parameter in("logits", Shape4{1, 1, 1, 6});
    fill_uniform(in.value, rng, real(-2), real(2));
    std::vector<Parameter*> params{&in};
    Tensor proj = make_projection(in.value.shape, rng);

    auto loss = [&]() {
        std::vector<real> y = softmax(in.value.data);
        double acc = 0;
        for (std::size_t i = 0; i < y.size(); ++i) acc += double(y[i]) * double(proj.data[i]);
        return real(acc);
    };
    auto grads = [&]() {
        zero_grads(params);
        std::vector<real> y = softmax(in.value.data);
        std::vector<real> gy(proj.data.begin(), proj.data.end());
        std::vector<real> gx = softmax_backward(y, gy);
        for (std::size_t i = 0; i < gx.size(); ++i) in.grad.data[i] += gx[i];
    };
    return SuiteResult{"softmax", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult l1_case() {
    // Targets sit at least 0.1 away from predictions so no finite-difference
    // step can cross the non-differentiable tie at pred == target.
    Rng rng = case_rng(911);
    Parameter pred("pred", Shape4{1, 2, 4, 4});
    fill_uniform(pred.value, rng, real(-1), real(1));
    std::vector<Parameter*> params{&pred};
    Tensor target(pred.value.shape);
    for (std::size_t i = 0; i < target.data.size(); ++i) {
        real gap = rng.uniform(real(0.1), real(0.5));
        target.data[i] = pred.value.data[i] + (rng.uniform() < real(0.5) ? -gap : gap);
    }

    auto loss = [&]() { return l1_loss(pred.value, target); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor g = l1_loss_backward(pred.value, target);
        for (std::size_t i = 0; i < g.data.size(); ++i) pred.grad.data[i] += g.data[i];
    };
    return SuiteResult{"l1_loss", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult bilinear_case() {
    // Sample point in the interior of a cell so neither coordinate sits on
    // the pixel grid, where the interpolant has kinks.
    Rng rng = case_rng(912);
    Parameter img("image", Shape4{1, 4, 6, 6});
    Parameter coord("coord", Shape4{1, 1, 1, 2});
    fill_uniform(img.value, rng, real(-1), real(1));
    coord.value.data[0] = real(2.3);
    coord.value.data[1] = real(1.7);
    std::vector<Parameter*> params{&img, &coord};
    Tensor proj = make_projection(Shape4{1, 1, 1, 3}, rng);

    auto loss = [&]() {
        real out[3];
        bilinear_sample(img.value, 0, coord.value.data[0], coord.value.data[1], 1, 4, out);
        double acc = 0;
        for (int i = 0; i < 3; ++i) acc += double(out[i]) * double(proj.data[std::size_t(i)]);
        return real(acc);
    };
    auto grads = [&]() {
        zero_grads(params);
        real gx = 0, gy = 0;
        bilinear_sample_backward(img.value, 0, coord.value.data[0], coord.value.data[1], 1, 4,
                                 proj.data.data(), &img.grad, &gx, &gy);
        coord.grad.data[0] += gx;
        coord.grad.data[1] += gy;
    };
    return SuiteResult{"bilinear_sample", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult pixel_shuffle_case() {
    Rng rng = case_rng(913);
    Parameter in("input", Shape4{1, 8, 3, 3});
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params{&in};
    Tensor proj = make_projection(Shape4{1, 2, 6, 6}, rng);

    auto loss = [&]() { return project(pixel_shuffle(in.value, 2), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor gx = pixel_unshuffle(proj, 2);  // shuffle is a permutation
        for (std::size_t i = 0; i < gx.data.size(); ++i) in.grad.data[i] += gx.data[i];
    };
    return SuiteResult{"pixel_shuffle", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult bicubic_case() {
    Rng rng = case_rng(914);
    Parameter in("input", Shape4{1, 3, 7, 5});
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params{&in};
    Tensor proj = make_projection(Shape4{1, 3, 11, 8}, rng);

    auto loss = [&]() { return project(bicubic_resize(in.value, 11, 8), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor gx = bicubic_resize_backward(in.value, proj);
        for (std::size_t i = 0; i < gx.data.size(); ++i) in.grad.data[i] += gx.data[i];
    };
    return SuiteResult{"bicubic_resize", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult route_case() {
    Rng rng = case_rng(915);
    ExpertBank bank("bank", 3, Shape4{4, 4, 3, 3}, 8);
    bank.init(rng);
    randomize_fc(bank.fc2, rng, real(0.4), real(0.1));
    ScalePair s{real(1.7), real(3.3)};
    std::vector<Parameter*> params;
    bank.collect(params);
    Tensor proj = make_projection(Shape4{4, 4, 3, 3}, rng);

    auto loss = [&]() { return project(bank.route(s).filter, proj); };
    auto grads = [&]() {
        zero_grads(params);
        ExpertBank::RouteCache rc = bank.route(s);
        bank.route_backward(rc, proj);
    };
    return SuiteResult{"route", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult scale_aware_conv_case() {
    Rng rng = case_rng(916);
    ExpertBank bank("bank", 2, Shape4{4, 4, 3, 3}, 8);
    bank.init(rng);
    randomize_fc(bank.fc2, rng, real(0.4), real(0.1));
    ScalePair s{real(2.4), real(1.3)};
    Parameter in("features", Shape4{1, 4, 6, 6});
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params;
    bank.collect(params);
    params.push_back(&in);
    Tensor proj = make_projection(in.value.shape, rng);

    auto loss = [&]() { return project(scale_aware_conv(in.value, s, bank), proj); };
    auto grads = [&]() {
        zero_grads(params);
        ExpertBank::RouteCache rc;
        scale_aware_conv(in.value, s, bank, &rc);
        Tensor gfilter(rc.filter.shape);
        conv2d_backward(in.value, rc.filter, proj, 1, &in.grad, &gfilter, nullptr);
        bank.route_backward(rc, gfilter);
    };
    return SuiteResult{"scale_aware_conv", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult hourglass_case() {
    Rng rng = case_rng(917);
    Hourglass hg("hg", 8);
    hg.init(rng);
    Parameter in("features", Shape4{1, 8, 5, 5});  // odd size exercises the crop
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params;
    hg.collect(params);
    params.push_back(&in);
    Tensor proj = make_projection(Shape4{1, 1, 5, 5}, rng);

    auto loss = [&]() {
        Hourglass::Cache c;
        return project(hg.forward(in.value, &c), proj);
    };
    auto grads = [&]() {
        zero_grads(params);
        Hourglass::Cache c;
        hg.forward(in.value, &c);
        hg.backward(in.value, c, proj, &in.grad);
    };
    return SuiteResult{"hourglass", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult adaption_block_case() {
    Rng rng = case_rng(918);
    AdaptionBlock block("adapt", 8, 2, 8, /*guided=*/true);
    block.init(rng);
    randomize_fc(block.bank.fc2, rng, real(0.4), real(0.1));
    ScalePair s{real(1.9), real(2.6)};
    Parameter in("features", Shape4{1, 8, 6, 6});
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params;
    block.collect(params);
    params.push_back(&in);
    Tensor proj = make_projection(in.value.shape, rng);

    auto loss = [&]() {
        AdaptionBlock::Cache c;
        return project(block.forward(in.value, s, &c), proj);
    };
    auto grads = [&]() {
        zero_grads(params);
        AdaptionBlock::Cache c;
        block.forward(in.value, s, &c);
        block.backward(in.value, c, proj, &in.grad);
    };
    return SuiteResult{"adaption_block", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult upsampler_case() {
    Rng rng = case_rng(919);
    Upsampler up("up", 8, 2, 8);
    up.init(rng);
    // The standard init zeroes both heads; give them small live weights.
    // Offset weights stay tiny so sampling points cannot cross pixel-grid
    // kinks under finite-difference perturbation.
    randomize_fc(up.fhead, rng, real(0.3), real(0.05));
    randomize_fc(up.ohead, rng, real(0.002), real(0.001));

    ScalePair s{real(1.6), real(1.2)};
    Parameter in("features", Shape4{1, 8, 5, 5});
    fill_uniform(in.value, rng, real(-1), real(1));
    std::vector<Parameter*> params;
    up.collect(params);
    params.push_back(&in);
    Tensor proj = make_projection(Shape4{1, 8, 6, 8}, rng);

    auto loss = [&]() {
        Upsampler::Cache c;
        return project(up.forward(in.value, s, 6, 8, &c), proj);
    };
    auto grads = [&]() {
        zero_grads(params);
        Upsampler::Cache c;
        up.forward(in.value, s, 6, 8, &c);
        up.backward(in.value, c, proj, &in.grad);
    };
    return SuiteResult{"scale_aware_upsample", grad_check(params, loss, grads), real(1e-4)};
}

SuiteResult full_network_case() {
    ModelConfig cfg;
    cfg.blocks = 2;
    cfg.channels = 8;
    cfg.adapt_every = 1;
    cfg.experts = 2;
    cfg.hidden = 8;
    ArbNet net(cfg);
    net.init(920 ^ (g_seed_mix * 0x9e3779b97f4a7c15ull));

    // Wake up the zero-initialized heads so every parameter carries signal.
    Rng rng = case_rng(921);
    for (auto& a : net.adapts) randomize_fc(a.bank.fc2, rng, real(0.3), real(0.05));
    randomize_fc(net.up.fhead, rng, real(0.3), real(0.05));
    randomize_fc(net.up.ohead, rng, real(0.002), real(0.001));

    Parameter in("input", Shape4{1, 3, 6, 6});
    fill_uniform(in.value, rng, real(0.05), real(0.95));
    ScalePair s{real(1.5), real(1.5)};
    std::vector<Parameter*> params = net.parameters();
    params.push_back(&in);
    Tensor proj = make_projection(Shape4{1, 3, 9, 9}, rng);

    auto loss = [&]() {
        ArbNet::Cache c;
        return project(net.forward(in.value, s, &c), proj);
    };
    auto grads = [&]() {
        zero_grads(params);
        ArbNet::Cache c;
        net.forward(in.value, s, &c);
        net.backward(in.value, c, proj, &in.grad);
    };
    return SuiteResult{"full_network", grad_check(params, loss, grads, real(1e-6), 12),
                       real(1e-3)};
}

}  // namespace

std::vector<SuiteResult> run_gradient_suite(unsigned long long seed_mix) {
    g_seed_mix = seed_mix;
    std::vector<SuiteResult> out;
    out.push_back(conv_case("conv2d_direct", ConvEngine::Direct, 1));
    out.push_back(conv_case("conv2d_im2col", ConvEngine::Im2col, 1));
    out.push_back(conv_case("conv2d_strided", ConvEngine::Direct, 2));
    out.push_back(fc_case());
    out.push_back(unary_case(
        "sigmoid", 903, real(-3), real(3), [](const Tensor& x) { return sigmoid(x); },
        [](const Tensor& y, const Tensor& gy) { return sigmoid_backward(y, gy); }));
    out.push_back(unary_case(
        "tanh", 904, real(-2), real(2), [](const Tensor& x) { return tanh_op(x); },
        [](const Tensor& y, const Tensor& gy) { return tanh_backward(y, gy); }));
    out.push_back(relu_case());
    out.push_back(binary_case(
        "add_broadcast", 906, Shape4{2, 1, 5, 5},
        [](const Tensor& a, const Tensor& b) { return add(a, b); },
        [](const Tensor& a, const Tensor& b, const Tensor& g, Tensor* ga, Tensor* gb) {
            add_backward(a, b, g, ga, gb);
        }));
    out.push_back(binary_case(
        "mul_broadcast", 907, Shape4{2, 1, 5, 5},
        [](const Tensor& a, const Tensor& b) { return mul(a, b); },
        [](const Tensor& a, const Tensor& b, const Tensor& g, Tensor* ga, Tensor* gb) {
            mul_backward(a, b, g, ga, gb);
        }));
    out.push_back(binary_case(
        "add_same_shape", 908, Shape4{2, 4, 5, 5},
        [](const Tensor& a, const Tensor& b) { return add(a, b); },
        [](const Tensor& a, const Tensor& b, const Tensor& g, Tensor* ga, Tensor* gb) {
            add_backward(a, b, g, ga, gb);
        }));
    out.push_back(binary_case(
        "mul_same_shape", 909, Shape4{2, 4, 5, 5},
        [](const Tensor& a, const Tensor& b) { return mul(a, b); },
        [](const Tensor& a, const Tensor& b, const Tensor& g, Tensor* ga, Tensor* gb) {
            mul_backward(a, b, g, ga, gb);
        }));
    out.push_back(softmax_case());
    out.push_back(l1_case());
    out.push_back(bilinear_case());
    out.push_back(pixel_shuffle_case());
    out.push_back(bicubic_case());
    out.push_back(route_case());
    out.push_back(scale_aware_conv_case());
    out.push_back(hourglass_case());
    out.push_back(adaption_block_case());
    out.push_back(upsampler_case());
    out.push_back(full_network_case());
    g_seed_mix = 0;
    return out;
}

GradReport corrupted_backward_demo() {
    Rng rng = case_rng(930);
    Parameter in("input", Shape4{1, 2, 5, 5});
    Parameter k("kernel", Shape4{3, 2, 3, 3});
    fill_uniform(in.value, rng, real(-1), real(1));
    fill_uniform(k.value, rng, real(-0.5), real(0.5));
    std::vector<Parameter*> params{&in, &k};
    Tensor proj = make_projection(Shape4{1, 3, 5, 5}, rng);

    auto loss = [&]() { return project(conv2d(in.value, k.value, {}, 1), proj); };
    auto grads = [&]() {
        zero_grads(params);
        Tensor gk(k.value.shape);
        conv2d_backward(in.value, k.value, proj, 1, &in.grad, &gk, nullptr);
        // Deliberate 1% corruption: the checker must notice.
        for (std::size_t i = 0; i < gk.data.size(); ++i)
            k.grad.data[i] += real(1.01) * gk.data[i];
    };
    return grad_check(params, loss, grads);
}

}  // namespace arbsr
