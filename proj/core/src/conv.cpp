#include "arbsr/ops.hpp"

#include <cstring>
#include <string>
#include <vector>

#include "arbsr/gemm.hpp"
#include "arbsr/threading.hpp"

namespace arbsr {

namespace {

struct ConvDims {
    int n, c_in, h, w;
    int c_out, k;
    int h_out, w_out;
};

ConvDims check_conv(const Tensor& input, const Tensor& kernel, const std::vector<real>& bias,
                    int padding, int stride, const char* who) {
    if (padding < 0) throw shape_error(std::string(who) + ": negative padding");
    if (stride < 1) throw shape_error(std::string(who) + ": stride must be >= 1");
    if (kernel.shape.h != kernel.shape.w)
        throw shape_error(std::string(who) + ": kernel must be square, got " + kernel.shape.str());
    if (kernel.shape.c != input.shape.c)
        throw shape_error(std::string(who) + ": kernel expects " + std::to_string(kernel.shape.c) +
                          " input channels, tensor has " + std::to_string(input.shape.c));
    if (!bias.empty() && (int)bias.size() != kernel.shape.n)
        throw shape_error(std::string(who) + ": bias size " + std::to_string(bias.size()) +
                          " != output channels " + std::to_string(kernel.shape.n));
    ConvDims d;
    d.n = input.shape.n;
    d.c_in = input.shape.c;
    d.h = input.shape.h;
    d.w = input.shape.w;
    d.c_out = kernel.shape.n;
    d.k = kernel.shape.h;
    d.h_out = (d.h + 2 * padding - d.k) / stride + 1;
    d.w_out = (d.w + 2 * padding - d.k) / stride + 1;
    if (d.h + 2 * padding < d.k || d.w + 2 * padding < d.k)
        throw shape_error(std::string(who) + ": kernel larger than padded input");
    return d;
}

/// Unpacks one batch item into a (C_in*k*k) x (H_out*W_out) column matrix.
void im2col(const Tensor& input, int n, int padding, const ConvDims& d, real* cols) {
    const int hw_out = d.h_out * d.w_out;
    for (int ic = 0; ic < d.c_in; ++ic) {
        const real* plane = input.plane(n, ic);
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                real* row = cols + (std::size_t)((ic * d.k + ky) * d.k + kx) * hw_out;
                for (int oy = 0; oy < d.h_out; ++oy) {
                    const int iy = oy - padding + ky;
                    if (iy < 0 || iy >= d.h) {
                        std::memset(row + (std::size_t)oy * d.w_out, 0,
                                    sizeof(real) * d.w_out);
                        continue;
                    }
                    const real* src = plane + (std::size_t)iy * d.w;
                    real* dst = row + (std::size_t)oy * d.w_out;
                    for (int ox = 0; ox < d.w_out; ++ox) {
                        const int ix = ox - padding + kx;
                        dst[ox] = (ix < 0 || ix >= d.w) ? real(0) : src[ix];
                    }
                }
            }
        }
    }
}

bool use_im2col(ConvEngine engine, const ConvDims& d) {
    if (engine == ConvEngine::Direct) return false;
    if (engine == ConvEngine::Im2col) return true;
    // Auto: the column matrix only pays off once there is real arithmetic
    // to amortize the unpack.
    const std::int64_t work = (std::int64_t)d.c_out * d.c_in * d.k * d.k * d.h_out * d.w_out;
    return work >= 32768;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const std::vector<real>& bias,
              int padding, ConvEngine engine) {
    const ConvDims d = check_conv(input, kernel, bias, padding, 1, "conv2d");
    Tensor out(Shape4{d.n, d.c_out, d.h_out, d.w_out});
    threads::max();

    if (use_im2col(engine, d)) {
        const int ckk = d.c_in * d.k * d.k;
        const int hw_out = d.h_out * d.w_out;
        std::vector<real> cols((std::size_t)ckk * hw_out);
        for (int n = 0; n < d.n; ++n) {
            im2col(input, n, padding, d, cols.data());
            // out plane block: (C_out) x (H_out*W_out), row-major.
            gemm(false, false, d.c_out, hw_out, ckk, real(1), kernel.data.data(), ckk,
                 cols.data(), hw_out, real(0), out.plane(n, 0), hw_out);
        }
        if (!bias.empty()) {
            for (int n = 0; n < d.n; ++n)
                for (int oc = 0; oc < d.c_out; ++oc) {
                    real* p = out.plane(n, oc);
                    const real b = bias[oc];
                    for (int i = 0; i < hw_out; ++i) p[i] += b;
                }
        }
        return out;
    }

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < d.n; ++n) {
        for (int oc = 0; oc < d.c_out; ++oc) {
            real* dst = out.plane(n, oc);
            for (int oy = 0; oy < d.h_out; ++oy) {
                for (int ox = 0; ox < d.w_out; ++ox) {
                    real acc = bias.empty() ? real(0) : bias[oc];
                    for (int ic = 0; ic < d.c_in; ++ic) {
                        const real* plane = input.plane(n, ic);
                        const real* kr = &kernel.at(oc, ic, 0, 0);
                        for (int ky = 0; ky < d.k; ++ky) {
                            const int iy = oy - padding + ky;
                            if (iy < 0 || iy >= d.h) continue;
                            const real* src = plane + (std::size_t)iy * d.w;
                            for (int kx = 0; kx < d.k; ++kx) {
                                const int ix = ox - padding + kx;
                                if (ix < 0 || ix >= d.w) continue;
                                acc += kr[ky * d.k + kx] * src[ix];
                            }
                        }
                    }
                    dst[(std::size_t)oy * d.w_out + ox] = acc;
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, const Tensor& kernel, const Tensor& grad_out,
                     int padding, Tensor* grad_input, Tensor* grad_kernel,
                     std::vector<real>* grad_bias, ConvEngine engine) {
    const ConvDims d = check_conv(input, kernel, {}, padding, 1, "conv2d_backward");
    const Shape4 want{d.n, d.c_out, d.h_out, d.w_out};
    if (!(grad_out.shape == want))
        throw shape_error("conv2d_backward: grad_out is " + grad_out.shape.str() +
                          ", expected " + want.str());
    if (grad_input && !(grad_input->shape == input.shape))
        throw shape_error("conv2d_backward: grad_input shape mismatch");
    if (grad_kernel && !(grad_kernel->shape == kernel.shape))
        throw shape_error("conv2d_backward: grad_kernel shape mismatch");
    if (grad_bias && (int)grad_bias->size() != d.c_out)
        throw shape_error("conv2d_backward: grad_bias size mismatch");
    threads::max();

    const int hw_out = d.h_out * d.w_out;

    if (grad_bias) {
        for (int oc = 0; oc < d.c_out; ++oc) {
            real acc = 0;
            for (int n = 0; n < d.n; ++n) {
                const real* g = grad_out.plane(n, oc);
                for (int i = 0; i < hw_out; ++i) acc += g[i];
            }
            (*grad_bias)[oc] += acc;
        }
    }

    if (use_im2col(engine, d)) {
        const int ckk = d.c_in * d.k * d.k;
        std::vector<real> cols((std::size_t)ckk * hw_out);
        std::vector<real> gcols;
        if (grad_input) {
            gcols.resize((std::size_t)ckk * hw_out);
            std::fill(grad_input->data.begin(), grad_input->data.end(), real(0));
        }
        for (int n = 0; n < d.n; ++n) {
            if (grad_kernel) {
                im2col(input, n, padding, d, cols.data());
                // dK (C_out x CKK) += dY (C_out x HW) * cols^T (HW x CKK)
                gemm(false, true, d.c_out, ckk, hw_out, real(1), grad_out.plane(n, 0),
                     hw_out, cols.data(), hw_out, real(1), grad_kernel->data.data(), ckk);
            }
            if (grad_input) {
                // dCols (CKK x HW) = K^T (CKK x C_out) * dY (C_out x HW)
                gemm(true, false, ckk, hw_out, d.c_out, real(1), kernel.data.data(), ckk,
                     grad_out.plane(n, 0), hw_out, real(0), gcols.data(), hw_out);
                // col2im in gather form: each input pixel reads every column
                // entry it contributed to, so there are no scatter collisions.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
                for (int ic = 0; ic < d.c_in; ++ic) {
                    real* gplane = grad_input->plane(n, ic);
                    for (int iy = 0; iy < d.h; ++iy) {
                        for (int ix = 0; ix < d.w; ++ix) {
                            real acc = 0;
                            for (int ky = 0; ky < d.k; ++ky) {
                                const int oy = iy + padding - ky;
                                if (oy < 0 || oy >= d.h_out) continue;
                                const real* row =
                                    gcols.data() +
                                    (std::size_t)((ic * d.k + ky) * d.k) * hw_out;
                                for (int kx = 0; kx < d.k; ++kx) {
                                    const int ox = ix + padding - kx;
                                    if (ox < 0 || ox >= d.w_out) continue;
                                    acc += row[(std::size_t)kx * hw_out +
                                               (std::size_t)oy * d.w_out + ox];
                                }
                            }
                            gplane[(std::size_t)iy * d.w + ix] += acc;
                        }
                    }
                }
            }
        }
        return;
    }

    if (grad_kernel) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (int oc = 0; oc < d.c_out; ++oc) {
            for (int ic = 0; ic < d.c_in; ++ic) {
                for (int ky = 0; ky < d.k; ++ky) {
                    for (int kx = 0; kx < d.k; ++kx) {
                        real acc = 0;
                        for (int n = 0; n < d.n; ++n) {
                            const real* gplane = grad_out.plane(n, oc);
                            const real* iplane = input.plane(n, ic);
                            for (int oy = 0; oy < d.h_out; ++oy) {
                                const int iy = oy - padding + ky;
                                if (iy < 0 || iy >= d.h) continue;
                                for (int ox = 0; ox < d.w_out; ++ox) {
                                    const int ix = ox - padding + kx;
                                    if (ix < 0 || ix >= d.w) continue;
                                    acc += gplane[(std::size_t)oy * d.w_out + ox] *
                                           iplane[(std::size_t)iy * d.w + ix];
                                }
                            }
                        }
                        grad_kernel->at(oc, ic, ky, kx) += acc;
                    }
                }
            }
        }
    }

    if (grad_input) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (int n = 0; n < d.n; ++n) {
            for (int ic = 0; ic < d.c_in; ++ic) {
                real* gplane = grad_input->plane(n, ic);
                for (int iy = 0; iy < d.h; ++iy) {
                    for (int ix = 0; ix < d.w; ++ix) {
                        real acc = 0;
                        for (int oc = 0; oc < d.c_out; ++oc) {
                            const real* gout = grad_out.plane(n, oc);
                            const real* kr = &kernel.at(oc, ic, 0, 0);
                            for (int ky = 0; ky < d.k; ++ky) {
                                const int oy = iy + padding - ky;
                                if (oy < 0 || oy >= d.h_out) continue;
                                for (int kx = 0; kx < d.k; ++kx) {
                                    const int ox = ix + padding - kx;
                                    if (ox < 0 || ox >= d.w_out) continue;
                                    acc += kr[ky * d.k + kx] *
                                           gout[(std::size_t)oy * d.w_out + ox];
                                }
                            }
                        }
                        gplane[(std::size_t)iy * d.w + ix] = acc;
                    }
                }
            }
        }
    }
}

Tensor conv2d_strided(const Tensor& input, const Tensor& kernel,
                      const std::vector<real>& bias, int padding, int stride) {
    const ConvDims d = check_conv(input, kernel, bias, padding, stride, "conv2d_strided");
    Tensor out(Shape4{d.n, d.c_out, d.h_out, d.w_out});
    threads::max();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int n = 0; n < d.n; ++n) {
        for (int oc = 0; oc < d.c_out; ++oc) {
            real* dst = out.plane(n, oc);
            for (int oy = 0; oy < d.h_out; ++oy) {
                for (int ox = 0; ox < d.w_out; ++ox) {
                    real acc = bias.empty() ? real(0) : bias[oc];
                    for (int ic = 0; ic < d.c_in; ++ic) {
                        const real* plane = input.plane(n, ic);
                        const real* kr = &kernel.at(oc, ic, 0, 0);
                        for (int ky = 0; ky < d.k; ++ky) {
                            const int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= d.h) continue;
                            for (int kx = 0; kx < d.k; ++kx) {
                                const int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= d.w) continue;
                                acc += kr[ky * d.k + kx] * plane[(std::size_t)iy * d.w + ix];
                            }
                        }
                    }
                    dst[(std::size_t)oy * d.w_out + ox] = acc;
                }
            }
        }
    }
    return out;
}

void conv2d_strided_backward(const Tensor& input, const Tensor& kernel,
                             const Tensor& grad_out, int padding, int stride,
                             Tensor* grad_input, Tensor* grad_kernel,
                             std::vector<real>* grad_bias) {
    const ConvDims d = check_conv(input, kernel, {}, padding, stride, "conv2d_strided_backward");
    const Shape4 want{d.n, d.c_out, d.h_out, d.w_out};
    if (!(grad_out.shape == want))
        throw shape_error("conv2d_strided_backward: grad_out is " + grad_out.shape.str() +
                          ", expected " + want.str());
    threads::max();

    if (grad_bias) {
        for (int oc = 0; oc < d.c_out; ++oc) {
            real acc = 0;
            for (int n = 0; n < d.n; ++n) {
                const real* g = grad_out.plane(n, oc);
                for (int i = 0; i < d.h_out * d.w_out; ++i) acc += g[i];
            }
            (*grad_bias)[oc] += acc;
        }
    }

    if (grad_kernel) {
        for (int oc = 0; oc < d.c_out; ++oc)
            for (int ic = 0; ic < d.c_in; ++ic)
                for (int ky = 0; ky < d.k; ++ky)
                    for (int kx = 0; kx < d.k; ++kx) {
                        real acc = 0;
                        for (int n = 0; n < d.n; ++n) {
                            const real* gplane = grad_out.plane(n, oc);
                            const real* iplane = input.plane(n, ic);
                            for (int oy = 0; oy < d.h_out; ++oy) {
                                const int iy = oy * stride - padding + ky;
                                if (iy < 0 || iy >= d.h) continue;
                                for (int ox = 0; ox < d.w_out; ++ox) {
                                    const int ix = ox * stride - padding + kx;
                                    if (ix < 0 || ix >= d.w) continue;
                                    acc += gplane[(std::size_t)oy * d.w_out + ox] *
                                           iplane[(std::size_t)iy * d.w + ix];
                                }
                            }
                        }
                        grad_kernel->at(oc, ic, ky, kx) += acc;
                    }
    }

    if (grad_input) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
        for (int n = 0; n < d.n; ++n) {
            for (int ic = 0; ic < d.c_in; ++ic) {
                real* gplane = grad_input->plane(n, ic);
                for (int iy = 0; iy < d.h; ++iy) {
                    for (int ix = 0; ix < d.w; ++ix) {
                        real acc = 0;
                        for (int ky = 0; ky < d.k; ++ky) {
                            const int num_y = iy + padding - ky;
                            if (num_y < 0 || num_y % stride != 0) continue;
                            const int oy = num_y / stride;
                            if (oy >= d.h_out) continue;
                            for (int kx = 0; kx < d.k; ++kx) {
                                const int num_x = ix + padding - kx;
                                if (num_x < 0 || num_x % stride != 0) continue;
                                const int ox = num_x / stride;
                                if (ox >= d.w_out) continue;
                                for (int oc = 0; oc < d.c_out; ++oc)
                                    acc += kernel.at(oc, ic, ky, kx) *
                                           grad_out.plane(n, oc)[(std::size_t)oy * d.w_out + ox];
                            }
                        }
                        gplane[(std::size_t)iy * d.w + ix] = acc;
                    }
                }
            }
        }
    }
}

}  // namespace arbsr
