#include "arbsr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace arbsr {

std::vector<real> softmax(const std::vector<real>& v) {
    if (v.empty()) throw shape_error("softmax: empty input");
    // Shift by the max so the exponentials cannot overflow.
    const real m = *std::max_element(v.begin(), v.end());
    std::vector<real> y(v.size());
    real sum = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        y[i] = std::exp(v[i] - m);
        sum += y[i];
    }
    for (real& e : y) e /= sum;
    return y;
}

std::vector<real> softmax_backward(const std::vector<real>& y,
                                   const std::vector<real>& grad_y) {
    if (y.size() != grad_y.size()) throw shape_error("softmax_backward: size mismatch");
    real dot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * grad_y[i];
    std::vector<real> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = y[i] * (grad_y[i] - dot);
    return g;
}

real l1_loss(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "l1_loss");
    // Serial double accumulation: reproducible and accurate enough for any
    // tensor we train on.
    double acc = 0;
    for (std::size_t i = 0; i < pred.data.size(); ++i)
        acc += std::abs((double)pred.data[i] - (double)target.data[i]);
    return (real)(acc / (double)pred.data.size());
}

Tensor l1_loss_backward(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "l1_loss_backward");
    Tensor g(pred.shape);
    const real inv_n = real(1) / (real)pred.data.size();
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const real d = pred.data[i] - target.data[i];
        // Exact ties take subgradient 0.
        g.data[i] = d > 0 ? inv_n : (d < 0 ? -inv_n : real(0));
    }
    return g;
}

Tensor upsample_nearest2x(const Tensor& x) {
    Tensor y(Shape4{x.shape.n, x.shape.c, x.shape.h * 2, x.shape.w * 2});
    const int h = x.shape.h, w = x.shape.w;
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            const real* src = x.plane(n, c);
            real* dst = y.plane(n, c);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const real v = src[(std::size_t)i * w + j];
                    real* d0 = dst + (std::size_t)(2 * i) * (2 * w) + 2 * j;
                    d0[0] = v;
                    d0[1] = v;
                    d0[2 * w] = v;
                    d0[2 * w + 1] = v;
                }
        }
    return y;
}

Tensor upsample_nearest2x_backward(const Tensor& x, const Tensor& grad_y) {
    const Shape4 want{x.shape.n, x.shape.c, x.shape.h * 2, x.shape.w * 2};
    if (!(grad_y.shape == want))
        throw shape_error("upsample_nearest2x_backward: grad is " + grad_y.shape.str() +
                          ", expected " + want.str());
    Tensor g(x.shape);
    const int h = x.shape.h, w = x.shape.w;
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            const real* src = grad_y.plane(n, c);
            real* dst = g.plane(n, c);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    const real* s0 = src + (std::size_t)(2 * i) * (2 * w) + 2 * j;
                    dst[(std::size_t)i * w + j] = s0[0] + s0[1] + s0[2 * w] + s0[2 * w + 1];
                }
        }
    return g;
}

Tensor crop_to(const Tensor& x, int h, int w) {
    if (h < 1 || w < 1 || h > x.shape.h || w > x.shape.w)
        throw shape_error("crop_to: window " + std::to_string(h) + "x" + std::to_string(w) +
                          " does not fit in " + x.shape.str());
    Tensor y(Shape4{x.shape.n, x.shape.c, h, w});
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            const real* src = x.plane(n, c);
            real* dst = y.plane(n, c);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j)
                    dst[(std::size_t)i * w + j] = src[(std::size_t)i * x.shape.w + j];
        }
    return y;
}

Tensor crop_to_backward(const Tensor& x, const Tensor& grad_y) {
    if (grad_y.shape.n != x.shape.n || grad_y.shape.c != x.shape.c ||
        grad_y.shape.h > x.shape.h || grad_y.shape.w > x.shape.w)
        throw shape_error("crop_to_backward: grad " + grad_y.shape.str() +
                          " does not fit in " + x.shape.str());
    Tensor g(x.shape);
    std::fill(g.data.begin(), g.data.end(), real(0));
    for (int n = 0; n < x.shape.n; ++n)
        for (int c = 0; c < x.shape.c; ++c) {
            const real* src = grad_y.plane(n, c);
            real* dst = g.plane(n, c);
            for (int i = 0; i < grad_y.shape.h; ++i)
                for (int j = 0; j < grad_y.shape.w; ++j)
                    dst[(std::size_t)i * x.shape.w + j] = src[(std::size_t)i * grad_y.shape.w + j];
        }
    return g;
}

}  // namespace arbsr
