#include "arbsr/grid.hpp"

#include <cmath>
#include <string>

namespace arbsr {

real coord_l(int x, real r) {
    return (real(x) + real(0.5)) / r - real(0.5);
}

real coord_r(int x, real r) {
    const real q = (real(x) + real(0.5)) / r;
    return q - real(0.5) - std::floor(q);
}

SamplingGrid build_grid(int h_lr, int w_lr, int h_out, int w_out, const ScalePair& scale) {
    if (h_lr < 1 || w_lr < 1 || h_out < 1 || w_out < 1)
        throw config_error("build_grid: sizes must be positive");
    if (h_out < h_lr || w_out < w_lr)
        throw config_error("build_grid: target " + std::to_string(w_out) + "x" +
                           std::to_string(h_out) + " smaller than input " +
                           std::to_string(w_lr) + "x" + std::to_string(h_lr));
    SamplingGrid g;
    g.h_lr = h_lr;
    g.w_lr = w_lr;
    g.h_out = h_out;
    g.w_out = w_out;
    const real rx_ratio = real(w_out) / real(w_lr);
    const real ry_ratio = real(h_out) / real(h_lr);
    g.lx.resize(w_out);
    g.rx.resize(w_out);
    for (int x = 0; x < w_out; ++x) {
        g.lx[x] = coord_l(x, rx_ratio);
        g.rx[x] = coord_r(x, rx_ratio);
    }
    g.ly.resize(h_out);
    g.ry.resize(h_out);
    for (int y = 0; y < h_out; ++y) {
        g.ly[y] = coord_l(y, ry_ratio);
        g.ry[y] = coord_r(y, ry_ratio);
    }
    g.cond_rh = scale.r_h / real(4);
    g.cond_rv = scale.r_v / real(4);
    return g;
}

}  // namespace arbsr
