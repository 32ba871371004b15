#include "arbsr/sampling.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>

#include "arbsr/image.hpp"
#include "arbsr/model.hpp"
#include "arbsr/resize.hpp"

namespace arbsr {

ScalePair sample_scale(Rng& rng, ScaleMode mode) {
    switch (mode) {
        case ScaleMode::Symmetric: {
            const real r = symmetric_scale_grid()[(std::size_t)rng.uniform_int(30)];
            return ScalePair{r, r};
        }
        case ScaleMode::Asymmetric:
            return asymmetric_scale_grid()[(std::size_t)rng.uniform_int(30)];
        case ScaleMode::Mixed: {
            // 30 symmetric values + 30 asymmetric pairs, weighted by count.
            const int pick = rng.uniform_int(60);
            if (pick < 30) {
                const real r = symmetric_scale_grid()[(std::size_t)pick];
                return ScalePair{r, r};
            }
            return asymmetric_scale_grid()[(std::size_t)(pick - 30)];
        }
        case ScaleMode::IntegerWarmup: {
            const real r = real(2 + rng.uniform_int(3));
            return ScalePair{r, r};
        }
    }
    throw config_error("sample_scale: bad mode");
}

namespace {

Tensor crop_patch(const Tensor& img, int y0, int x0, int h, int w) {
    Tensor out(Shape4{1, img.shape.c, h, w});
    for (int c = 0; c < img.shape.c; ++c) {
        const real* src = img.plane(0, c);
        real* dst = out.plane(0, c);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                dst[(std::size_t)y * w + x] =
                    src[(std::size_t)(y0 + y) * img.shape.w + (x0 + x)];
    }
    return out;
}

}  // namespace

Tensor rotate90(const Tensor& t) {
    // Clockwise quarter turn: out(y, x) = in(H-1-x, y).
    Tensor out(Shape4{t.shape.n, t.shape.c, t.shape.w, t.shape.h});
    for (int n = 0; n < t.shape.n; ++n)
        for (int c = 0; c < t.shape.c; ++c) {
            const real* src = t.plane(n, c);
            real* dst = out.plane(n, c);
            for (int y = 0; y < out.shape.h; ++y)
                for (int x = 0; x < out.shape.w; ++x)
                    dst[(std::size_t)y * out.shape.w + x] =
                        src[(std::size_t)(t.shape.h - 1 - x) * t.shape.w + y];
        }
    return out;
}

Tensor rotate180(const Tensor& t) {
    Tensor out(t.shape);
    for (int n = 0; n < t.shape.n; ++n)
        for (int c = 0; c < t.shape.c; ++c) {
            const real* src = t.plane(n, c);
            real* dst = out.plane(n, c);
            for (int y = 0; y < t.shape.h; ++y)
                for (int x = 0; x < t.shape.w; ++x)
                    dst[(std::size_t)y * t.shape.w + x] =
                        src[(std::size_t)(t.shape.h - 1 - y) * t.shape.w +
                            (t.shape.w - 1 - x)];
        }
    return out;
}

Tensor rotate270(const Tensor& t) {
    return rotate90(rotate180(t));
}

Tensor hflip(const Tensor& t) {
    Tensor out(t.shape);
    for (int n = 0; n < t.shape.n; ++n)
        for (int c = 0; c < t.shape.c; ++c) {
            const real* src = t.plane(n, c);
            real* dst = out.plane(n, c);
            for (int y = 0; y < t.shape.h; ++y)
                for (int x = 0; x < t.shape.w; ++x)
                    dst[(std::size_t)y * t.shape.w + x] =
                        src[(std::size_t)y * t.shape.w + (t.shape.w - 1 - x)];
        }
    return out;
}

std::vector<TrainSample> make_batch(const std::vector<Tensor>& corpus,
                                    const ScalePair& scale, int batch, int patch,
                                    Rng& rng) {
    if (corpus.empty()) throw config_error("make_batch: empty corpus");
    if (batch < 1 || patch < 1) throw config_error("make_batch: bad batch/patch size");
    const int pw = scaled_size(patch, scale.r_h);
    const int ph = scaled_size(patch, scale.r_v);

    bool any_fits = false;
    for (const Tensor& img : corpus)
        if (img.shape.h > ph && img.shape.w > pw) {
            any_fits = true;
            break;
        }
    if (!any_fits)
        throw config_error("make_batch: no corpus image can hold a " + std::to_string(pw) +
                           "x" + std::to_string(ph) + " HR patch");

    // One rotation per batch keeps the recorded scale (and therefore the
    // HR patch shape) uniform across samples.
    const int rot = rng.uniform_int(4);
    ScalePair recorded = scale;
    if (rot == 1 || rot == 3) std::swap(recorded.r_h, recorded.r_v);

    std::vector<TrainSample> out;
    out.reserve((std::size_t)batch);
    while ((int)out.size() < batch) {
        const Tensor& img = corpus[(std::size_t)rng.uniform_int((int)corpus.size())];
        if (img.shape.h <= ph || img.shape.w <= pw) {
            std::fprintf(stderr, "warning: skipping %dx%d image too small for %dx%d patch\n",
                         img.shape.w, img.shape.h, pw, ph);
            continue;
        }
        const int y0 = rng.uniform_int(img.shape.h - ph + 1);
        const int x0 = rng.uniform_int(img.shape.w - pw + 1);
        const bool flip = rng.uniform_int(2) == 1;

        TrainSample s;
        s.hr = crop_patch(img, y0, x0, ph, pw);
        s.lr = bicubic_resize(s.hr, patch, patch);
        switch (rot) {
            case 1:
                s.hr = rotate90(s.hr);
                s.lr = rotate90(s.lr);
                break;
            case 2:
                s.hr = rotate180(s.hr);
                s.lr = rotate180(s.lr);
                break;
            case 3:
                s.hr = rotate270(s.hr);
                s.lr = rotate270(s.lr);
                break;
            default:
                break;
        }
        if (flip) {
            s.hr = hflip(s.hr);
            s.lr = hflip(s.lr);
        }
        s.scale = recorded;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<std::string> list_corpus(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw io_error("corpus directory not found: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext == ".png" || ext == ".PNG" || ext == ".ppm" || ext == ".PPM")
            paths.push_back(entry.path().string());
    }
    std::sort(paths.begin(), paths.end());
    return paths;
}

std::vector<Tensor> load_corpus(const std::string& dir) {
    std::vector<Tensor> out;
    for (const std::string& p : list_corpus(dir)) out.push_back(image_to_tensor(load_image(p)));
    if (out.empty()) throw io_error("no PNG/PPM images in " + dir);
    return out;
}

}  // namespace arbsr
