#pragma once

#include <vector>

#include "arbsr/tensor.hpp"

namespace arbsr {

/// Precomputed 4-tap row for one output coordinate along one axis.
/// Indices are edge-clamped into the input; weights sum to 1.
struct CubicTaps {
    std::vector<int> idx;      // 4 per output coordinate
    std::vector<real> weight;  // matching layout
};

/// Catmull-Rom (a = -0.5) taps with center-aligned mapping
/// src = (dst + 0.5) * in / out - 0.5.
CubicTaps cubic_taps(int in_size, int out_size);

/// Separable bicubic resampling of an NxCxHxW tensor to (h_out, w_out).
Tensor bicubic_resize(const Tensor& img, int h_out, int w_out);

/// Adjoint of bicubic_resize (exact transpose of the linear map); needed
/// when training the bicubic-head ablation variant.
Tensor bicubic_resize_backward(const Tensor& input, const Tensor& grad_out);

}  // namespace arbsr
