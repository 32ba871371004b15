#include "arbsr/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "arbsr/image.hpp"
#include "arbsr/metrics.hpp"
#include "arbsr/resize.hpp"

namespace arbsr {

namespace {

Tensor clamp01(Tensor t) {
    for (auto& v : t.data) v = std::clamp(v, real(0), real(1));
    return t;
}

void check_same_arch(const ModelConfig& a, const ModelConfig& b, const char* which) {
    auto complain = [&](const char* field, int x, int y) {
        throw config_error(std::string("feature_similarity: models disagree on ") + field +
                           " (" + std::to_string(x) + " vs " + std::to_string(y) + ", " +
                           which + ")");
    };
    if (a.blocks != b.blocks) complain("blocks", a.blocks, b.blocks);
    if (a.channels != b.channels) complain("channels", a.channels, b.channels);
    if (a.adapt_every != b.adapt_every) complain("adapt_every", a.adapt_every, b.adapt_every);
}

}  // namespace

Tensor whiten(const Tensor& f) {
    Tensor out = f;
    const std::int64_t hw = std::int64_t(f.shape.h) * f.shape.w;
    for (int n = 0; n < f.shape.n; ++n) {
        for (int c = 0; c < f.shape.c; ++c) {
            const real* src = f.plane(n, c);
            double mean = 0;
            for (std::int64_t i = 0; i < hw; ++i) mean += double(src[i]);
            mean /= double(hw);
            real* dst = out.plane(n, c);
            for (std::int64_t i = 0; i < hw; ++i) dst[i] = real(double(src[i]) - mean);
        }
    }
    return out;
}

Tensor similarity_map(const Tensor& a, const Tensor& b, const Tensor& c) {
    check_same_shape(a, b, "similarity_map");
    check_same_shape(a, c, "similarity_map");
    const int n = a.shape.n, ch = a.shape.c, h = a.shape.h, w = a.shape.w;
    Tensor out(Shape4{n, 1, h, w});
    const std::int64_t hw = std::int64_t(h) * w;
    for (int bi = 0; bi < n; ++bi) {
        for (std::int64_t p = 0; p < hw; ++p) {
            double ab = 0, ac = 0, bc = 0, na = 0, nb = 0, nc = 0;
            for (int k = 0; k < ch; ++k) {
                const double va = double(a.plane(bi, k)[p]);
                const double vb = double(b.plane(bi, k)[p]);
                const double vc = double(c.plane(bi, k)[p]);
                ab += va * vb;
                ac += va * vc;
                bc += vb * vc;
                na += va * va;
                nb += vb * vb;
                nc += vc * vc;
            }
            na = std::sqrt(na);
            nb = std::sqrt(nb);
            nc = std::sqrt(nc);
            auto cosine = [](double dot, double nx, double ny) {
                return (nx < 1e-12 || ny < 1e-12) ? 0.0 : dot / (nx * ny);
            };
            out.plane(bi, 0)[p] = real(
                (cosine(ab, na, nb) + cosine(ac, na, nc) + cosine(bc, nb, nc)) / 3.0);
        }
    }
    return out;
}

std::vector<Tensor> feature_similarity(const ArbNet& m2, const ArbNet& m3, const ArbNet& m4,
                                       const Tensor& image) {
    check_same_arch(m2.cfg, m3.cfg, "first vs second");
    check_same_arch(m2.cfg, m4.cfg, "first vs third");
    if (image.shape.n != 1 || image.shape.c != 3)
        throw shape_error("feature_similarity: expects a 1x3xHxW image, got " +
                          image.shape.str());

    const int hq = std::max(8, scaled_size(image.shape.h, real(0.25)));
    const int wq = std::max(8, scaled_size(image.shape.w, real(0.25)));
    Tensor lr = bicubic_resize(image, hq, wq);

    std::vector<Tensor> t2, t3, t4;
    m2.forward(lr, ScalePair{2, 2}, nullptr, &t2);
    m3.forward(lr, ScalePair{3, 3}, nullptr, &t3);
    m4.forward(lr, ScalePair{4, 4}, nullptr, &t4);

    std::vector<Tensor> maps;
    maps.reserve(t2.size());
    for (std::size_t i = 0; i < t2.size(); ++i)
        maps.push_back(similarity_map(whiten(t2[i]), whiten(t3[i]), whiten(t4[i])));
    return maps;
}

std::string dump_routing(const ArbNet& model) {
    std::string csv = "r_h,r_v,bank,expert,weight\n";
    const std::vector<real> grid = symmetric_scale_grid();
    char line[96];
    for (real rh : grid) {
        for (real rv : grid) {
            const ScalePair s{rh, rv};
            for (std::size_t b = 0; b < model.adapts.size(); ++b) {
                const ExpertBank::RouteCache rc = model.adapts[b].bank.route(s);
                for (std::size_t e = 0; e < rc.weights.size(); ++e) {
                    std::snprintf(line, sizeof(line), "%.1f,%.1f,%d,%d,%.9f\n", double(rh),
                                  double(rv), int(b), int(e), double(rc.weights[e]));
                    csv += line;
                }
            }
        }
    }
    return csv;
}

std::vector<std::string> dump_guidance(const ArbNet& model, const Tensor& image,
                                       const ScalePair& s, const std::string& out_dir) {
    if (image.shape.n != 1 || image.shape.c != 3)
        throw shape_error("dump_guidance: expects a 1x3xHxW image, got " + image.shape.str());
    std::vector<Tensor> maps;
    model.forward(image, s, nullptr, nullptr, &maps);

    std::vector<std::string> paths;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const Tensor& m = maps[i];
        std::vector<unsigned char> bytes(std::size_t(m.shape.h) * m.shape.w);
        for (std::size_t p = 0; p < bytes.size(); ++p) {
            const long v = std::lround(double(m.data[p]) * 255.0);
            bytes[p] = (unsigned char)std::clamp(v, 0L, 255L);
        }
        const std::filesystem::path path =
            std::filesystem::path(out_dir) / ("adapt" + std::to_string(i) + "_guidance.pgm");
        save_pgm(bytes, m.shape.w, m.shape.h, path.string());
        paths.push_back(path.string());
    }
    return paths;
}

namespace {

EvalResult evaluate_common(const std::vector<Tensor>& images, const ScalePair& s,
                           bool with_ssim, const ArbNet* model) {
    if (images.empty()) throw config_error("evaluate: empty image set");
    const int border = border_for(s);
    double psnr_sum = 0, ssim_sum = 0;
    int n = 0;
    for (const Tensor& hr : images) {
        const int hl = std::max(1, scaled_size(hr.shape.h, real(1) / s.r_v));
        const int wl = std::max(1, scaled_size(hr.shape.w, real(1) / s.r_h));
        Tensor lr = bicubic_resize(hr, hl, wl);
        Tensor sr = model ? model->forward_to(lr, hr.shape.h, hr.shape.w)
                          : bicubic_resize(lr, hr.shape.h, hr.shape.w);
        Tensor pred_y = to_luminance(clamp01(std::move(sr)));
        Tensor ref_y = to_luminance(hr);
        psnr_sum += double(psnr(pred_y, ref_y, border));
        if (with_ssim) ssim_sum += double(ssim(pred_y, ref_y, border));
        ++n;
    }
    EvalResult out;
    out.count = n;
    out.psnr = real(psnr_sum / n);
    out.ssim = with_ssim ? real(ssim_sum / n) : real(0);
    return out;
}

}  // namespace

EvalResult evaluate_model(const ArbNet& model, const std::vector<Tensor>& images,
                          const ScalePair& s, bool with_ssim) {
    return evaluate_common(images, s, with_ssim, &model);
}

EvalResult evaluate_bicubic(const std::vector<Tensor>& images, const ScalePair& s,
                            bool with_ssim) {
    return evaluate_common(images, s, with_ssim, nullptr);
}

}  // namespace arbsr
