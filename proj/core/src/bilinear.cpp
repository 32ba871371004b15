#include "arbsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace arbsr {

namespace {

struct Taps {
    int x0, x1, y0, y1;
    real fx, fy;
    bool clamped_x, clamped_y;
};

Taps make_taps(const Tensor& input, real x, real y) {
    const int w = input.shape.w;
    const int h = input.shape.h;
    Taps t;
    t.clamped_x = (x < 0 || x > real(w - 1));
    t.clamped_y = (y < 0 || y > real(h - 1));
    const real cx = std::clamp(x, real(0), real(w - 1));
    const real cy = std::clamp(y, real(0), real(h - 1));
    t.x0 = (int)std::floor(cx);
    t.y0 = (int)std::floor(cy);
    t.x0 = std::min(t.x0, w - 1);
    t.y0 = std::min(t.y0, h - 1);
    t.x1 = std::min(t.x0 + 1, w - 1);
    t.y1 = std::min(t.y0 + 1, h - 1);
    t.fx = cx - real(t.x0);
    t.fy = cy - real(t.y0);
    return t;
}

void check_range(const Tensor& input, int batch, int c0, int c1, const char* who) {
    if (batch < 0 || batch >= input.shape.n)
        throw shape_error(std::string(who) + ": batch index out of range");
    if (c0 < 0 || c1 > input.shape.c || c0 >= c1)
        throw shape_error(std::string(who) + ": bad channel range [" + std::to_string(c0) +
                          ", " + std::to_string(c1) + ") for " + input.shape.str());
}

}  // namespace

void bilinear_sample(const Tensor& input, int batch, real x, real y,
                     int c0, int c1, real* out) {
    check_range(input, batch, c0, c1, "bilinear_sample");
    const Taps t = make_taps(input, x, y);
    const int w = input.shape.w;
    for (int c = c0; c < c1; ++c) {
        const real* p = input.plane(batch, c);
        const real v00 = p[(std::size_t)t.y0 * w + t.x0];
        const real v01 = p[(std::size_t)t.y0 * w + t.x1];
        const real v10 = p[(std::size_t)t.y1 * w + t.x0];
        const real v11 = p[(std::size_t)t.y1 * w + t.x1];
        const real top = v00 + t.fx * (v01 - v00);
        const real bot = v10 + t.fx * (v11 - v10);
        out[c - c0] = top + t.fy * (bot - top);
    }
}

void bilinear_sample_backward(const Tensor& input, int batch, real x, real y,
                              int c0, int c1, const real* grad_out,
                              Tensor* grad_input, real* gx, real* gy) {
    check_range(input, batch, c0, c1, "bilinear_sample_backward");
    const Taps t = make_taps(input, x, y);
    const int w = input.shape.w;
    real acc_x = 0, acc_y = 0;
    for (int c = c0; c < c1; ++c) {
        const real g = grad_out[c - c0];
        const real* p = input.plane(batch, c);
        const real v00 = p[(std::size_t)t.y0 * w + t.x0];
        const real v01 = p[(std::size_t)t.y0 * w + t.x1];
        const real v10 = p[(std::size_t)t.y1 * w + t.x0];
        const real v11 = p[(std::size_t)t.y1 * w + t.x1];
        if (grad_input) {
            real* gp = grad_input->plane(batch, c);
            gp[(std::size_t)t.y0 * w + t.x0] += g * (real(1) - t.fx) * (real(1) - t.fy);
            gp[(std::size_t)t.y0 * w + t.x1] += g * t.fx * (real(1) - t.fy);
            gp[(std::size_t)t.y1 * w + t.x0] += g * (real(1) - t.fx) * t.fy;
            gp[(std::size_t)t.y1 * w + t.x1] += g * t.fx * t.fy;
        }
        acc_x += g * ((real(1) - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
        acc_y += g * ((real(1) - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
    }
    // Outside the image the clamp flattens the sample, so the coordinate
    // gradient dies there.
    if (gx) *gx += t.clamped_x ? real(0) : acc_x;
    if (gy) *gy += t.clamped_y ? real(0) : acc_y;
}

}  // namespace arbsr
