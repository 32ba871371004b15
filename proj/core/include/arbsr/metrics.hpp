#pragma once

#include "arbsr/image.hpp"
#include "arbsr/scale.hpp"
#include "arbsr/tensor.hpp"

namespace arbsr {

/// BT.601 luminance of an N x 3 x H x W tensor in [0,1]:
/// Y = 16 + 65.481 R + 128.553 G + 24.966 B, so Y lands in [16, 235].
/// Result is N x 1 x H x W on the 0..255 physical scale.
Tensor to_luminance(const Tensor& rgb);
Tensor to_luminance(const ImageBuffer& img);

/// Evaluation border: ceil of the larger scale factor, shaved from every
/// edge before comparing.
int border_for(const ScalePair& s);

/// Luminance PSNR against MAX = 255, capped at 100 dB (and floored at 0).
/// Both inputs are N x 1 x H x W luminance planes; `border` pixels are
/// cropped from each edge first.
real psnr(const Tensor& pred_y, const Tensor& ref_y, int border);

/// Mean SSIM over valid 11 x 11 windows (Gaussian weights, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, L = 255), accumulated in double precision.
real ssim(const Tensor& pred_y, const Tensor& ref_y, int border);

}  // namespace arbsr
