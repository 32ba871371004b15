#include <cmath>
#include <cstdio>
#include <vector>

#include "arbsr/model.hpp"
#include "arbsr/threading.hpp"

namespace arbsr {

// The conditioning rows, routing weights, and offsets depend only on the
// output pixel, never on the batch index, so the trunk runs once per
// raster and its results are shared across the batch.

namespace {

void build_cond(const SamplingGrid& g, Tensor& cond) {
    const int p = g.h_out * g.w_out;
    cond = Tensor(Shape4{p, 1, 1, 4});
    for (int y = 0; y < g.h_out; ++y)
        for (int x = 0; x < g.w_out; ++x) {
            real* row = cond.data.data() + (std::size_t)(y * g.w_out + x) * 4;
            row[0] = g.rx[(std::size_t)x];
            row[1] = g.ry[(std::size_t)y];
            row[2] = g.cond_rh;
            row[3] = g.cond_rv;
        }
}

/// filter = sum_e w[e] * bank[e], written into `out` (cb x cs entries).
void combine(const std::vector<Parameter>& bank, const real* w, int e, real* out,
             std::size_t len) {
    for (std::size_t j = 0; j < len; ++j) out[j] = 0;
    for (int i = 0; i < e; ++i) {
        const real wi = w[i];
        const real* src = bank[(std::size_t)i].value.data.data();
        for (std::size_t j = 0; j < len; ++j) out[j] += wi * src[j];
    }
}

}  // namespace

#ifdef ARBSR_TRAIN_TRACE
// One-shot cross-run comparison of the backward pixel loop. train() arms
// store mode (1) on its first run and compare mode (2) on its second; the
// first backward call consumes the mode. All buffers are static: heap
// traffic here would perturb the layout-sensitive behavior under study.
int g_up_trace_mode = 0;
namespace {
constexpr int kTPix = 8192, kTK = 16, kTE = 8;
real t_kbot[kTPix][kTK], t_kexp[kTPix][kTK];
real t_gwb[kTPix][kTE], t_gwe[kTPix][kTE];
real t_flog[kTPix][2 * kTE];
real t_sx[kTPix], t_sy[kTPix];
int t_pixels = 0;
int t_bad_pix = -1;
char t_bad_stream = 0;
}  // namespace
#endif

Tensor Upsampler::forward(const Tensor& f, const ScalePair& s, int h_out, int w_out,
                          Cache* cache) const {
    if (f.shape.c != c)
        throw shape_error("upsample: feature tensor has " + std::to_string(f.shape.c) +
                          " channels, layer expects " + std::to_string(c));
    Cache local;
    Cache& cc = cache ? *cache : local;
    cc.grid = build_grid(f.shape.h, f.shape.w, h_out, w_out, s);
    build_cond(cc.grid, cc.cond);
    cc.h1 = relu(fc1.forward(cc.cond));
    cc.h2 = fc2.forward(cc.h1);
    cc.flog = fhead.forward(cc.h2);
    cc.offs = tanh_op(ohead.forward(cc.h2));

    const int p = h_out * w_out;
    cc.wb.resize((std::size_t)p * e);
    cc.we.resize((std::size_t)p * e);
    std::vector<real> logits((std::size_t)e);
    for (int i = 0; i < p; ++i) {
        const real* row = cc.flog.data.data() + (std::size_t)i * 2 * e;
        logits.assign(row, row + e);
        const std::vector<real> wbi = softmax(logits);
        logits.assign(row + e, row + 2 * e);
        const std::vector<real> wei = softmax(logits);
        std::copy(wbi.begin(), wbi.end(), cc.wb.begin() + (std::size_t)i * e);
        std::copy(wei.begin(), wei.end(), cc.we.begin() + (std::size_t)i * e);
    }

    const int cb = c / 8;
    const int n = f.shape.n;
    Tensor out(Shape4{n, c, h_out, w_out});
    threads::max();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int y = 0; y < h_out; ++y) {
        std::vector<real> kbot((std::size_t)cb * c), kexp((std::size_t)c * cb);
        std::vector<real> v((std::size_t)c), vb((std::size_t)cb), vo((std::size_t)c);
        for (int x = 0; x < w_out; ++x) {
            const int pix = y * w_out + x;
            combine(kb, cc.wb.data() + (std::size_t)pix * e, e, kbot.data(), kbot.size());
            combine(ke, cc.we.data() + (std::size_t)pix * e, e, kexp.data(), kexp.size());
            const real sx = cc.grid.lx[(std::size_t)x] + cc.offs.data[(std::size_t)pix * 2];
            const real sy =
                cc.grid.ly[(std::size_t)y] + cc.offs.data[(std::size_t)pix * 2 + 1];
            for (int b = 0; b < n; ++b) {
                bilinear_sample(f, b, sx, sy, 0, c, v.data());
                for (int i = 0; i < cb; ++i) {
                    real acc = 0;
                    const real* krow = kbot.data() + (std::size_t)i * c;
                    for (int j = 0; j < c; ++j) acc += krow[j] * v[(std::size_t)j];
                    vb[(std::size_t)i] = acc;
                }
                for (int i = 0; i < c; ++i) {
                    real acc = 0;
                    const real* krow = kexp.data() + (std::size_t)i * cb;
                    for (int j = 0; j < cb; ++j) acc += krow[j] * vb[(std::size_t)j];
                    vo[(std::size_t)i] = acc;
                }
                for (int i = 0; i < c; ++i)
                    out.plane(b, i)[(std::size_t)y * w_out + x] = vo[(std::size_t)i];
            }
        }
    }
    return out;
}

void Upsampler::backward(const Tensor& f, const Cache& cache, const Tensor& grad_out,
                         Tensor* grad_f) {
    const int h_out = cache.grid.h_out;
    const int w_out = cache.grid.w_out;
    const Shape4 want{f.shape.n, c, h_out, w_out};
    if (!(grad_out.shape == want))
        throw shape_error("upsample backward: grad is " + grad_out.shape.str() +
                          ", expected " + want.str());
    if (grad_f) std::fill(grad_f->data.begin(), grad_f->data.end(), real(0));

    const int cb = c / 8;
    const int n = f.shape.n;
    const int p = h_out * w_out;
    Tensor g_flog(cache.flog.shape);
    Tensor g_opre(cache.offs.shape);

    std::vector<real> kbot((std::size_t)cb * c), kexp((std::size_t)c * cb);
    std::vector<real> g_kbot((std::size_t)cb * c), g_kexp((std::size_t)c * cb);
    std::vector<real> v((std::size_t)c), vb((std::size_t)cb);
    std::vector<real> g_vec((std::size_t)c), g_vb((std::size_t)cb), g_v((std::size_t)c);
    std::vector<real> g_wb((std::size_t)e), g_we((std::size_t)e);

    // Serial over pixels: expert gradients, trunk row gradients, and the
    // feature scatter all accumulate into shared buffers, and a fixed
    // visit order keeps the sums reproducible.
    for (int y = 0; y < h_out; ++y) {
        for (int x = 0; x < w_out; ++x) {
            const int pix = y * w_out + x;
            combine(kb, cache.wb.data() + (std::size_t)pix * e, e, kbot.data(), kbot.size());
            combine(ke, cache.we.data() + (std::size_t)pix * e, e, kexp.data(), kexp.size());
            const real sx =
                cache.grid.lx[(std::size_t)x] + cache.offs.data[(std::size_t)pix * 2];
            const real sy =
                cache.grid.ly[(std::size_t)y] + cache.offs.data[(std::size_t)pix * 2 + 1];
            std::fill(g_kbot.begin(), g_kbot.end(), real(0));
            std::fill(g_kexp.begin(), g_kexp.end(), real(0));
            real g_sx = 0, g_sy = 0;
            for (int b = 0; b < n; ++b) {
                bilinear_sample(f, b, sx, sy, 0, c, v.data());
                for (int i = 0; i < cb; ++i) {
                    real acc = 0;
                    const real* krow = kbot.data() + (std::size_t)i * c;
                    for (int j = 0; j < c; ++j) acc += krow[j] * v[(std::size_t)j];
                    vb[(std::size_t)i] = acc;
                }
                for (int i = 0; i < c; ++i)
                    g_vec[(std::size_t)i] = grad_out.plane(b, i)[(std::size_t)y * w_out + x];
                // Expansion: out = kexp * vb.
                for (int i = 0; i < cb; ++i) g_vb[(std::size_t)i] = 0;
                for (int i = 0; i < c; ++i) {
                    const real g = g_vec[(std::size_t)i];
                    const real* krow = kexp.data() + (std::size_t)i * cb;
                    real* grow = g_kexp.data() + (std::size_t)i * cb;
                    for (int j = 0; j < cb; ++j) {
                        grow[j] += g * vb[(std::size_t)j];
                        g_vb[(std::size_t)j] += g * krow[j];
                    }
                }
                // Bottleneck: vb = kbot * v.
                for (int j = 0; j < c; ++j) g_v[(std::size_t)j] = 0;
                for (int i = 0; i < cb; ++i) {
                    const real g = g_vb[(std::size_t)i];
                    const real* krow = kbot.data() + (std::size_t)i * c;
                    real* grow = g_kbot.data() + (std::size_t)i * c;
                    for (int j = 0; j < c; ++j) {
                        grow[j] += g * v[(std::size_t)j];
                        g_v[(std::size_t)j] += g * krow[j];
                    }
                }
                bilinear_sample_backward(f, b, sx, sy, 0, c, g_v.data(), grad_f, &g_sx,
                                         &g_sy);
            }
#ifdef ARBSR_TRAIN_TRACE
            if (g_up_trace_mode && pix < kTPix && g_kbot.size() <= kTK &&
                g_kexp.size() <= kTK) {
                if (g_up_trace_mode == 1) {
                    for (std::size_t j = 0; j < g_kbot.size(); ++j)
                        t_kbot[pix][j] = g_kbot[j];
                    for (std::size_t j = 0; j < g_kexp.size(); ++j)
                        t_kexp[pix][j] = g_kexp[j];
                    t_sx[pix] = sx;
                    t_sy[pix] = sy;
                    if (pix >= t_pixels) t_pixels = pix + 1;
                } else if (t_bad_pix < 0) {
                    for (std::size_t j = 0; j < g_kbot.size(); ++j)
                        if (t_kbot[pix][j] != g_kbot[j]) { t_bad_pix = pix; t_bad_stream = 'b'; }
                    for (std::size_t j = 0; j < g_kexp.size(); ++j)
                        if (t_kexp[pix][j] != g_kexp[j]) { t_bad_pix = pix; t_bad_stream = 'e'; }
                    if (t_bad_pix == pix) {
                        std::fprintf(stderr,
                                     "UPTRACE first mismatch stream=%c pix=%d (x=%d y=%d) "
                                     "sx a=%a b=%a sy a=%a b=%a\n",
                                     t_bad_stream, pix, x, y, (double)t_sx[pix], (double)sx,
                                     (double)t_sy[pix], (double)sy);
                        for (std::size_t j = 0; j < g_kbot.size(); ++j)
                            if (t_kbot[pix][j] != g_kbot[j])
                                std::fprintf(stderr, "UPTRACE   kbot[%zu] a=%a b=%a\n", j,
                                             (double)t_kbot[pix][j], (double)g_kbot[j]);
                        for (std::size_t j = 0; j < g_kexp.size(); ++j)
                            if (t_kexp[pix][j] != g_kexp[j])
                                std::fprintf(stderr, "UPTRACE   kexp[%zu] a=%a b=%a\n", j,
                                             (double)t_kexp[pix][j], (double)g_kexp[j]);
                    }
                }
            }
#endif
            // Combined-filter gradients flow to each expert (scaled by its
            // weight) and to the routing weights (inner product with it).
            for (int i = 0; i < e; ++i) {
                const real wbi = cache.wb[(std::size_t)pix * e + i];
                const real wei = cache.we[(std::size_t)pix * e + i];
                Parameter& pb = kb[(std::size_t)i];
                Parameter& pe = ke[(std::size_t)i];
                real dot_b = 0, dot_e = 0;
                for (std::size_t j = 0; j < g_kbot.size(); ++j) {
                    pb.grad.data[j] += wbi * g_kbot[j];
                    dot_b += g_kbot[j] * pb.value.data[j];
                }
                for (std::size_t j = 0; j < g_kexp.size(); ++j) {
                    pe.grad.data[j] += wei * g_kexp[j];
                    dot_e += g_kexp[j] * pe.value.data[j];
                }
                g_wb[(std::size_t)i] = dot_b;
                g_we[(std::size_t)i] = dot_e;
            }
#ifdef ARBSR_TRAIN_TRACE
            if (g_up_trace_mode && pix < kTPix && e <= kTE) {
                if (g_up_trace_mode == 1) {
                    for (int i = 0; i < e; ++i) {
                        t_gwb[pix][i] = g_wb[(std::size_t)i];
                        t_gwe[pix][i] = g_we[(std::size_t)i];
                    }
                } else if (t_bad_pix < 0) {
                    for (int i = 0; i < e; ++i)
                        if (t_gwb[pix][i] != g_wb[(std::size_t)i] ||
                            t_gwe[pix][i] != g_we[(std::size_t)i]) {
                            t_bad_pix = pix;
                            t_bad_stream = 'w';
                        }
                    if (t_bad_pix == pix) {
                        std::fprintf(stderr, "UPTRACE first mismatch stream=w pix=%d\n", pix);
                        for (int i = 0; i < e; ++i)
                            std::fprintf(stderr,
                                         "UPTRACE   gwb[%d] a=%a b=%a gwe[%d] a=%a b=%a\n", i,
                                         (double)t_gwb[pix][i], (double)g_wb[(std::size_t)i],
                                         i, (double)t_gwe[pix][i],
                                         (double)g_we[(std::size_t)i]);
                    }
                }
            }
#endif
            std::vector<real> row_wb(cache.wb.begin() + (std::size_t)pix * e,
                                     cache.wb.begin() + (std::size_t)(pix + 1) * e);
            std::vector<real> row_we(cache.we.begin() + (std::size_t)pix * e,
                                     cache.we.begin() + (std::size_t)(pix + 1) * e);
            const std::vector<real> gl_b = softmax_backward(row_wb, g_wb);
            const std::vector<real> gl_e = softmax_backward(row_we, g_we);
            real* gflog_row = g_flog.data.data() + (std::size_t)pix * 2 * e;
            for (int i = 0; i < e; ++i) {
                gflog_row[i] = gl_b[(std::size_t)i];
                gflog_row[e + i] = gl_e[(std::size_t)i];
            }
#ifdef ARBSR_TRAIN_TRACE
            if (g_up_trace_mode && pix < kTPix && 2 * e <= 2 * kTE) {
                if (g_up_trace_mode == 1) {
                    for (int i = 0; i < 2 * e; ++i) t_flog[pix][i] = gflog_row[i];
                } else if (t_bad_pix < 0) {
                    for (int i = 0; i < 2 * e; ++i)
                        if (t_flog[pix][i] != gflog_row[i]) {
                            t_bad_pix = pix;
                            t_bad_stream = 'f';
                        }
                    if (t_bad_pix == pix) {
                        std::fprintf(stderr, "UPTRACE first mismatch stream=f pix=%d\n", pix);
                        for (int i = 0; i < 2 * e; ++i)
                            std::fprintf(stderr, "UPTRACE   flog[%d] a=%a b=%a\n", i,
                                         (double)t_flog[pix][i], (double)gflog_row[i]);
                    }
                }
            }
#endif
            const real ox = cache.offs.data[(std::size_t)pix * 2];
            const real oy = cache.offs.data[(std::size_t)pix * 2 + 1];
            g_opre.data[(std::size_t)pix * 2] = g_sx * (real(1) - ox * ox);
            g_opre.data[(std::size_t)pix * 2 + 1] = g_sy * (real(1) - oy * oy);
        }
    }
    (void)p;

    // Trunk backward, batched over all rows at once.
#ifdef ARBSR_TRAIN_TRACE
    if (g_up_trace_mode == 2 && t_bad_pix < 0)
        std::fprintf(stderr, "UPTRACE no mismatch in %d captured pixels\n", t_pixels);
    if (g_up_trace_mode) g_up_trace_mode = 0;
#endif
    Tensor g_h2a(cache.h2.shape);
    fhead.backward(cache.h2, g_flog, &g_h2a);
    Tensor g_h2b(cache.h2.shape);
    ohead.backward(cache.h2, g_opre, &g_h2b);
    for (std::size_t i = 0; i < g_h2a.data.size(); ++i) g_h2a.data[i] += g_h2b.data[i];
    Tensor g_h1(cache.h1.shape);
    fc2.backward(cache.h1, g_h2a, &g_h1);
    const Tensor g_h1_pre = relu_backward(cache.h1, g_h1);
    fc1.backward(cache.cond, g_h1_pre, nullptr);
}

}  // namespace arbsr
