#pragma once

#include <vector>

#include "arbsr/scale.hpp"

namespace arbsr {

/// Projected sampling coordinates for one output raster. Both axes are
/// separable, so only one row/column of L and R values is stored per
/// axis. Learned offsets are produced later, per pixel, by the
/// upsampler's offset head.
struct SamplingGrid {
    int h_lr = 0, w_lr = 0;
    int h_out = 0, w_out = 0;
    std::vector<real> lx, rx;  // length w_out
    std::vector<real> ly, ry;  // length h_out
    // Normalized conditioning inputs (factor / 4), in (0, 1] over the
    // training range.
    real cond_rh = 0, cond_rv = 0;
};

/// L(x) = (x + 0.5) / r - 0.5: the projection of output pixel center x
/// into input pixel space.
real coord_l(int x, real r);

/// R(x) = L(x) - floor((x + 0.5) / r), the signed distance to the
/// nearest-left input sample; always in [-0.5, 0.5).
real coord_r(int x, real r);

/// Fills L and R for every output row and column. The projection always
/// uses the exact real-valued size ratios (out/in per axis) so requested
/// output sizes are honored exactly even when they disagree with the
/// nominal scale by rounding; `scale` only supplies the conditioning
/// inputs.
SamplingGrid build_grid(int h_lr, int w_lr, int h_out, int w_out, const ScalePair& scale);

}  // namespace arbsr
