#pragma once

#include <vector>

#include "arbsr/tensor.hpp"

namespace arbsr {

// ---------------------------------------------------------------------------
// Convolution (cross-correlation), kernel layout C_out x C_in x k x k.
// Two execution paths: direct loops and an im2col/GEMM path. They must
// agree; the direct path is the reference for the fast one.
// ---------------------------------------------------------------------------

enum class ConvEngine { Auto, Direct, Im2col };

Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::vector<real>& bias,
              int padding, ConvEngine engine = ConvEngine::Auto);

/// grad_input (if non-null) is overwritten; grad_kernel / grad_bias
/// (if non-null) are accumulated into.
void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     int padding, Tensor* grad_input, Tensor* grad_kernel,
                     std::vector<real>* grad_bias, ConvEngine engine = ConvEngine::Auto);

/// Strided variant used by the hourglass encoder. Output dims follow
/// floor((H + 2p - k) / stride) + 1.
Tensor conv2d_strided(const Tensor& input, const Tensor& kernel,
                      const std::vector<real>& bias, int padding, int stride);

void conv2d_strided_backward(const Tensor& input, const Tensor& kernel,
                             const Tensor& grad_out, int padding, int stride,
                             Tensor* grad_input, Tensor* grad_kernel,
                             std::vector<real>* grad_bias);

// ---------------------------------------------------------------------------
// Fully connected: rows of `input` (shape B x 1 x 1 x d_in) are mapped by
// weight (1 x 1 x d_out x d_in) plus bias (length d_out).
// ---------------------------------------------------------------------------

Tensor fully_connected(const Tensor& input, const Tensor& weight,
                       const std::vector<real>& bias);

void fully_connected_backward(const Tensor& input, const Tensor& weight,
                              const Tensor& grad_out, Tensor* grad_input,
                              Tensor* grad_weight, std::vector<real>* grad_bias);

// ---------------------------------------------------------------------------
// Elementwise ops. Binary ops require identical shapes, or `b` may be an
// N x 1 x H x W map broadcast across channels (the guidance-map case).
// ---------------------------------------------------------------------------

Tensor sigmoid(const Tensor& x);
Tensor sigmoid_backward(const Tensor& y, const Tensor& grad_y);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& y, const Tensor& grad_y);

Tensor tanh_op(const Tensor& x);
Tensor tanh_backward(const Tensor& y, const Tensor& grad_y);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, real s);

/// Backward of add/mul when `b` was a 1-channel broadcast map: the map's
/// gradient sums the incoming gradient over channels.
void mul_backward(const Tensor& a, const Tensor& b, const Tensor& grad_y,
                  Tensor* grad_a, Tensor* grad_b);
void add_backward(const Tensor& a, const Tensor& b, const Tensor& grad_y,
                  Tensor* grad_a, Tensor* grad_b);

// ---------------------------------------------------------------------------
// Bilinear point sampling in continuous LR pixel space, edge-clamped.
// Gradients flow to the four source pixels and to the coordinates.
// ---------------------------------------------------------------------------

void bilinear_sample(const Tensor& input, int batch, real x, real y,
                     int c0, int c1, real* out);

/// Adds source-pixel gradients into grad_input (when non-null) and the
/// coordinate gradients into *gx / *gy.
void bilinear_sample_backward(const Tensor& input, int batch, real x, real y,
                              int c0, int c1, const real* grad_out,
                              Tensor* grad_input, real* gx, real* gy);

// ---------------------------------------------------------------------------

/// N x r^2 C x H x W -> N x C x rH x rW with
/// out(n, c, r*i + a, r*j + b) = in(n, c*r^2 + a*r + b, i, j).
Tensor pixel_shuffle(const Tensor& input, int r);
/// Exact inverse permutation of pixel_shuffle.
Tensor pixel_unshuffle(const Tensor& input, int r);

std::vector<real> softmax(const std::vector<real>& v);
std::vector<real> softmax_backward(const std::vector<real>& y,
                                   const std::vector<real>& grad_y);

/// Mean absolute error. Subgradient at exact ties is 0.
real l1_loss(const Tensor& pred, const Tensor& target);
Tensor l1_loss_backward(const Tensor& pred, const Tensor& target);

/// Nearest-neighbor 2x spatial upsample (hourglass decoder step).
Tensor upsample_nearest2x(const Tensor& x);
Tensor upsample_nearest2x_backward(const Tensor& x, const Tensor& grad_y);

/// Crop to the top-left h x w window (undoes the odd-size pad from a
/// stride-2 encode / 2x decode round trip).
Tensor crop_to(const Tensor& x, int h, int w);
Tensor crop_to_backward(const Tensor& x, const Tensor& grad_y);

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    real beta1 = real(0.9);
    real beta2 = real(0.999);
    real eps = real(1e-8);
};

/// Bias-corrected Adam step over `params`; gradients are cleared after
/// the update.
void adam_step(const std::vector<Parameter*>& params, real lr,
               const AdamConfig& cfg = {});

}  // namespace arbsr
