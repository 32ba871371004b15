#include "arbsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace arbsr {

namespace {

void check_luma_pair(const Tensor& a, const Tensor& b, int border, const char* who) {
    if (a.shape.c != 1 || b.shape.c != 1)
        throw shape_error(std::string(who) + ": expects 1-channel luminance planes");
    if (!(a.shape == b.shape))
        throw shape_error(std::string(who) + ": shape mismatch " + a.shape.str() + " vs " +
                          b.shape.str());
    if (border < 0) throw config_error(std::string(who) + ": negative border");
    if (a.shape.h <= 2 * border || a.shape.w <= 2 * border)
        throw config_error(std::string(who) + ": border " + std::to_string(border) +
                           " leaves no pixels on " + a.shape.str());
}

}  // namespace

Tensor to_luminance(const Tensor& rgb) {
    if (rgb.shape.c != 3) throw shape_error("to_luminance: expects 3 channels, got " + rgb.shape.str());
    const int n = rgb.shape.n, h = rgb.shape.h, w = rgb.shape.w;
    Tensor y(Shape4{n, 1, h, w});
    const std::int64_t hw = std::int64_t(h) * w;
    for (int b = 0; b < n; ++b) {
        const real* r = rgb.plane(b, 0);
        const real* g = rgb.plane(b, 1);
        const real* bl = rgb.plane(b, 2);
        real* out = y.plane(b, 0);
        for (std::int64_t i = 0; i < hw; ++i)
            out[i] = real(16) + real(65.481) * r[i] + real(128.553) * g[i] +
                     real(24.966) * bl[i];
    }
    return y;
}

Tensor to_luminance(const ImageBuffer& img) {
    Tensor y(Shape4{1, 1, img.height, img.width});
    for (std::int64_t i = 0; i < std::int64_t(img.height) * img.width; ++i) {
        const real r = real(img.pixels[std::size_t(3 * i)]) / real(255);
        const real g = real(img.pixels[std::size_t(3 * i + 1)]) / real(255);
        const real b = real(img.pixels[std::size_t(3 * i + 2)]) / real(255);
        y.data[std::size_t(i)] =
            real(16) + real(65.481) * r + real(128.553) * g + real(24.966) * b;
    }
    return y;
}

int border_for(const ScalePair& s) {
    return int(std::ceil(std::max(s.r_h, s.r_v)));
}

real psnr(const Tensor& pred_y, const Tensor& ref_y, int border) {
    check_luma_pair(pred_y, ref_y, border, "psnr");
    const int h = pred_y.shape.h, w = pred_y.shape.w;
    double se = 0;
    std::int64_t count = 0;
    for (int n = 0; n < pred_y.shape.n; ++n) {
        for (int y = border; y < h - border; ++y) {
            for (int x = border; x < w - border; ++x) {
                const double d =
                    double(pred_y.at(n, 0, y, x)) - double(ref_y.at(n, 0, y, x));
                se += d * d;
                ++count;
            }
        }
    }
    const double mse = se / double(count);
    if (mse <= 0) return real(100);
    const double db = 10.0 * std::log10(255.0 * 255.0 / mse);
    return real(std::clamp(db, 0.0, 100.0));
}

real ssim(const Tensor& pred_y, const Tensor& ref_y, int border) {
    check_luma_pair(pred_y, ref_y, border, "ssim");
    constexpr int kWin = 11;
    constexpr int kHalf = kWin / 2;
    const int h = pred_y.shape.h - 2 * border;
    const int w = pred_y.shape.w - 2 * border;
    if (h < kWin || w < kWin)
        throw config_error("ssim: cropped image smaller than the 11x11 window");

    // Normalized Gaussian window, sigma 1.5.
    double win[kWin][kWin];
    double wsum = 0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - kHalf, dx = j - kHalf;
            win[i][j] = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
            wsum += win[i][j];
        }
    }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) win[i][j] /= wsum;

    constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
    constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

    double total = 0;
    std::int64_t count = 0;
    for (int n = 0; n < pred_y.shape.n; ++n) {
        for (int cy = 0; cy + kWin <= h; ++cy) {
            for (int cx = 0; cx + kWin <= w; ++cx) {
                double mu_a = 0, mu_b = 0;
                double saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double a =
                            double(pred_y.at(n, 0, border + cy + i, border + cx + j));
                        const double b =
                            double(ref_y.at(n, 0, border + cy + i, border + cx + j));
                        const double wgt = win[i][j];
                        mu_a += wgt * a;
                        mu_b += wgt * b;
                        saa += wgt * a * a;
                        sbb += wgt * b * b;
                        sab += wgt * a * b;
                    }
                }
                const double var_a = saa - mu_a * mu_a;
                const double var_b = sbb - mu_b * mu_b;
                const double cov = sab - mu_a * mu_b;
                const double num = (2 * mu_a * mu_b + kC1) * (2 * cov + kC2);
                const double den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return real(total / double(count));
}

}  // namespace arbsr
