#include "arbsr/ops.hpp"

#include <string>

namespace arbsr {

Tensor pixel_shuffle(const Tensor& input, int r) {
    if (r < 1) throw shape_error("pixel_shuffle: factor must be >= 1");
    if (input.shape.c % (r * r) != 0)
        throw shape_error("pixel_shuffle: channels " + std::to_string(input.shape.c) +
                          " not divisible by " + std::to_string(r * r));
    const int n = input.shape.n;
    const int c_out = input.shape.c / (r * r);
    const int h = input.shape.h;
    const int w = input.shape.w;
    Tensor out(Shape4{n, c_out, h * r, w * r});
    for (int b = 0; b < n; ++b)
        for (int c = 0; c < c_out; ++c)
            for (int a = 0; a < r; ++a)
                for (int d = 0; d < r; ++d) {
                    const real* src = input.plane(b, c * r * r + a * r + d);
                    real* dst = out.plane(b, c);
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j)
                            dst[(std::size_t)(r * i + a) * (w * r) + (r * j + d)] =
                                src[(std::size_t)i * w + j];
                }
    return out;
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
    if (r < 1) throw shape_error("pixel_unshuffle: factor must be >= 1");
    if (input.shape.h % r != 0 || input.shape.w % r != 0)
        throw shape_error("pixel_unshuffle: spatial dims of " + input.shape.str() +
                          " not divisible by " + std::to_string(r));
    const int n = input.shape.n;
    const int c = input.shape.c;
    const int h = input.shape.h / r;
    const int w = input.shape.w / r;
    Tensor out(Shape4{n, c * r * r, h, w});
    for (int b = 0; b < n; ++b)
        for (int cc = 0; cc < c; ++cc)
            for (int a = 0; a < r; ++a)
                for (int d = 0; d < r; ++d) {
                    const real* src = input.plane(b, cc);
                    real* dst = out.plane(b, cc * r * r + a * r + d);
                    for (int i = 0; i < h; ++i)
                        for (int j = 0; j < w; ++j)
                            dst[(std::size_t)i * w + j] =
                                src[(std::size_t)(r * i + a) * (w * r) + (r * j + d)];
                }
    return out;
}

}  // namespace arbsr
