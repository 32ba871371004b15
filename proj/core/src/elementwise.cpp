#include "arbsr/ops.hpp"

#include <cmath>
#include <string>

namespace arbsr {

namespace {

enum class Broadcast { None, ChannelMap };

/// `b` must either match `a` exactly or be an Nx1xHxW map broadcast over
/// the channel axis.
Broadcast binary_mode(const Tensor& a, const Tensor& b, const char* who) {
    if (a.shape == b.shape) return Broadcast::None;
    if (b.shape.n == a.shape.n && b.shape.c == 1 && b.shape.h == a.shape.h &&
        b.shape.w == a.shape.w)
        return Broadcast::ChannelMap;
    throw shape_error(std::string(who) + ": incompatible shapes " + a.shape.str() +
                      " and " + b.shape.str());
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
    Tensor y(x.shape);
    const std::size_t n = x.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        const real v = x.data[i];
        // Split by sign so the exp argument is always <= 0; the underflow
        // at the tails then lands exactly on 0 and 1.
        if (v >= 0) {
            y.data[i] = real(1) / (real(1) + std::exp(-v));
        } else {
            const real e = std::exp(v);
            y.data[i] = e / (real(1) + e);
        }
    }
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_y) {
    check_same_shape(y, grad_y, "sigmoid_backward");
    Tensor g(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        g.data[i] = grad_y.data[i] * y.data[i] * (real(1) - y.data[i]);
    return g;
}

Tensor relu(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = x.data[i] > 0 ? x.data[i] : real(0);
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& grad_y) {
    check_same_shape(y, grad_y, "relu_backward");
    Tensor g(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        g.data[i] = y.data[i] > 0 ? grad_y.data[i] : real(0);
    return g;
}

Tensor tanh_op(const Tensor& x) {
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::tanh(x.data[i]);
    return y;
}

Tensor tanh_backward(const Tensor& y, const Tensor& grad_y) {
    check_same_shape(y, grad_y, "tanh_backward");
    Tensor g(y.shape);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        g.data[i] = grad_y.data[i] * (real(1) - y.data[i] * y.data[i]);
    return g;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const Broadcast mode = binary_mode(a, b, "add");
    Tensor y(a.shape);
    if (mode == Broadcast::None) {
        for (std::size_t i = 0; i < a.data.size(); ++i) y.data[i] = a.data[i] + b.data[i];
        return y;
    }
    const std::size_t hw = (std::size_t)a.shape.h * a.shape.w;
    for (int n = 0; n < a.shape.n; ++n) {
        const real* map = b.plane(n, 0);
        for (int c = 0; c < a.shape.c; ++c) {
            const real* src = a.plane(n, c);
            real* dst = y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] + map[i];
        }
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Broadcast mode = binary_mode(a, b, "mul");
    Tensor y(a.shape);
    if (mode == Broadcast::None) {
        for (std::size_t i = 0; i < a.data.size(); ++i) y.data[i] = a.data[i] * b.data[i];
        return y;
    }
    const std::size_t hw = (std::size_t)a.shape.h * a.shape.w;
    for (int n = 0; n < a.shape.n; ++n) {
        const real* map = b.plane(n, 0);
        for (int c = 0; c < a.shape.c; ++c) {
            const real* src = a.plane(n, c);
            real* dst = y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * map[i];
        }
    }
    return y;
}

Tensor scale(const Tensor& a, real s) {
    Tensor y(a.shape);
    for (std::size_t i = 0; i < a.data.size(); ++i) y.data[i] = a.data[i] * s;
    return y;
}

void mul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_y,
                  Tensor* grad_a, Tensor* grad_b) {
    const Broadcast mode = binary_mode(a, b, "mul_backward");
    check_same_shape(a, grad_y, "mul_backward");
    if (grad_a && !(grad_a->shape == a.shape))
        throw shape_error("mul_backward: grad_a shape mismatch");
    if (grad_b && !(grad_b->shape == b.shape))
        throw shape_error("mul_backward: grad_b shape mismatch");

    if (mode == Broadcast::None) {
        if (grad_a)
            for (std::size_t i = 0; i < a.data.size(); ++i)
                grad_a->data[i] = grad_y.data[i] * b.data[i];
        if (grad_b)
            for (std::size_t i = 0; i < a.data.size(); ++i)
                grad_b->data[i] = grad_y.data[i] * a.data[i];
        return;
    }
    const std::size_t hw = (std::size_t)a.shape.h * a.shape.w;
    if (grad_a) {
        for (int n = 0; n < a.shape.n; ++n) {
            const real* map = b.plane(n, 0);
            for (int c = 0; c < a.shape.c; ++c) {
                const real* g = grad_y.plane(n, c);
                real* dst = grad_a->plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) dst[i] = g[i] * map[i];
            }
        }
    }
    if (grad_b) {
        for (int n = 0; n < a.shape.n; ++n) {
            real* dst = grad_b->plane(n, 0);
            for (std::size_t i = 0; i < hw; ++i) dst[i] = 0;
            // Channel sum runs in fixed c order so the reduction is
            // reproducible.
            for (int c = 0; c < a.shape.c; ++c) {
                const real* g = grad_y.plane(n, c);
                const real* src = a.plane(n, c);
                for (std::size_t i = 0; i < hw; ++i) dst[i] += g[i] * src[i];
            }
        }
    }
}

void add_backward(const Tensor& a, const Tensor& b, const Tensor& grad_y,
                  Tensor* grad_a, Tensor* grad_b) {
    const Broadcast mode = binary_mode(a, b, "add_backward");
    check_same_shape(a, grad_y, "add_backward");
    if (grad_a && !(grad_a->shape == a.shape))
        throw shape_error("add_backward: grad_a shape mismatch");
    if (grad_b && !(grad_b->shape == b.shape))
        throw shape_error("add_backward: grad_b shape mismatch");

    if (grad_a) grad_a->data = grad_y.data;
    if (!grad_b) return;
    if (mode == Broadcast::None) {
        grad_b->data = grad_y.data;
        return;
    }
    const std::size_t hw = (std::size_t)a.shape.h * a.shape.w;
    for (int n = 0; n < a.shape.n; ++n) {
        real* dst = grad_b->plane(n, 0);
        for (std::size_t i = 0; i < hw; ++i) dst[i] = 0;
        for (int c = 0; c < a.shape.c; ++c) {
            const real* g = grad_y.plane(n, c);
            for (std::size_t i = 0; i < hw; ++i) dst[i] += g[i];
        }
    }
}

}  // namespace arbsr
