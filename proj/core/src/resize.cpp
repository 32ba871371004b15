#include "arbsr/resize.hpp"

#include <algorithm>
#include <cmath>

namespace arbsr {

namespace {

/// Catmull-Rom kernel, a = -0.5.
real cubic(real x) {
    x = std::abs(x);
    if (x <= 1) return ((real(1.5) * x - real(2.5)) * x) * x + real(1);
    if (x < 2) return ((real(-0.5) * x + real(2.5)) * x - real(4)) * x + real(2);
    return 0;
}

}  // namespace

CubicTaps cubic_taps(int in_size, int out_size) {
    if (in_size < 1 || out_size < 1) throw shape_error("cubic_taps: sizes must be positive");
    CubicTaps t;
    t.idx.resize((std::size_t)out_size * 4);
    t.weight.resize((std::size_t)out_size * 4);
    const real ratio = real(in_size) / real(out_size);
    for (int d = 0; d < out_size; ++d) {
        const real src = (real(d) + real(0.5)) * ratio - real(0.5);
        const int base = (int)std::floor(src);
        for (int i = 0; i < 4; ++i) {
            const int tap = base - 1 + i;
            t.idx[(std::size_t)d * 4 + i] = std::clamp(tap, 0, in_size - 1);
            t.weight[(std::size_t)d * 4 + i] = cubic(src - real(tap));
        }
        // Pin the partition of unity: the analytic weight sum is 1, so
        // folding the rounding slack into tap 0 changes nothing
        // mathematically but lets constants reproduce bit-exactly.
        real* w = t.weight.data() + (std::size_t)d * 4;
        w[0] = real(1) - w[1] - w[2] - w[3];
    }
    return t;
}

Tensor bicubic_resize(const Tensor& img, int h_out, int w_out) {
    const CubicTaps tx = cubic_taps(img.shape.w, w_out);
    const CubicTaps ty = cubic_taps(img.shape.h, h_out);
    const int n = img.shape.n, c = img.shape.c;
    const int h_in = img.shape.h, w_in = img.shape.w;

    Tensor tmp(Shape4{n, c, h_in, w_out});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const real* src = img.plane(b, ch);
            real* dst = tmp.plane(b, ch);
            for (int y = 0; y < h_in; ++y) {
                const real* row = src + (std::size_t)y * w_in;
                real* drow = dst + (std::size_t)y * w_out;
                for (int x = 0; x < w_out; ++x) {
                    const int* ti = tx.idx.data() + (std::size_t)x * 4;
                    const real* tw = tx.weight.data() + (std::size_t)x * 4;
                    // Differential form of the same weighted sum: exact on
                    // constant inputs because every difference vanishes.
                    const real v0 = row[ti[0]];
                    drow[x] = v0 + tw[1] * (row[ti[1]] - v0) + tw[2] * (row[ti[2]] - v0) +
                              tw[3] * (row[ti[3]] - v0);
                }
            }
        }

    Tensor out(Shape4{n, c, h_out, w_out});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const real* src = tmp.plane(b, ch);
            real* dst = out.plane(b, ch);
            for (int y = 0; y < h_out; ++y) {
                const int* ti = ty.idx.data() + (std::size_t)y * 4;
                const real* tw = ty.weight.data() + (std::size_t)y * 4;
                real* drow = dst + (std::size_t)y * w_out;
                const real* r0 = src + (std::size_t)ti[0] * w_out;
                const real* r1 = src + (std::size_t)ti[1] * w_out;
                const real* r2 = src + (std::size_t)ti[2] * w_out;
                const real* r3 = src + (std::size_t)ti[3] * w_out;
                for (int x = 0; x < w_out; ++x)
                    drow[x] = r0[x] + tw[1] * (r1[x] - r0[x]) + tw[2] * (r2[x] - r0[x]) +
                              tw[3] * (r3[x] - r0[x]);
            }
        }
    return out;
}

Tensor bicubic_resize_backward(const Tensor& input, const Tensor& grad_out) {
    if (grad_out.shape.n != input.shape.n || grad_out.shape.c != input.shape.c)
        throw shape_error("bicubic_resize_backward: batch/channel mismatch");
    const int h_out = grad_out.shape.h, w_out = grad_out.shape.w;
    const int h_in = input.shape.h, w_in = input.shape.w;
    const CubicTaps tx = cubic_taps(w_in, w_out);
    const CubicTaps ty = cubic_taps(h_in, h_out);
    const int n = input.shape.n, c = input.shape.c;

    // Transpose of the vertical pass, then of the horizontal pass —
    // mirroring the forward order exactly so the map is a true adjoint.
    Tensor gv(Shape4{n, c, h_in, w_out});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const real* g = grad_out.plane(b, ch);
            real* dst = gv.plane(b, ch);
            for (int y = 0; y < h_out; ++y) {
                const int* ti = ty.idx.data() + (std::size_t)y * 4;
                const real* tw = ty.weight.data() + (std::size_t)y * 4;
                const real* grow = g + (std::size_t)y * w_out;
                for (int i = 0; i < 4; ++i) {
                    real* drow = dst + (std::size_t)ti[i] * w_out;
                    const real w = tw[i];
                    for (int x = 0; x < w_out; ++x) drow[x] += w * grow[x];
                }
            }
        }

    Tensor gin(Shape4{n, c, h_in, w_in});
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const real* g = gv.plane(b, ch);
            real* dst = gin.plane(b, ch);
            for (int y = 0; y < h_in; ++y) {
                const real* grow = g + (std::size_t)y * w_out;
                real* drow = dst + (std::size_t)y * w_in;
                for (int x = 0; x < w_out; ++x) {
                    const int* ti = tx.idx.data() + (std::size_t)x * 4;
                    const real* tw = tx.weight.data() + (std::size_t)x * 4;
                    const real gval = grow[x];
                    for (int i = 0; i < 4; ++i) drow[ti[i]] += tw[i] * gval;
                }
            }
        }
    return gin;
}

}  // namespace arbsr
