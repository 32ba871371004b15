#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "arbsr/common.hpp"
#include "arbsr/image.hpp"
#include "arbsr/resize.hpp"
#include "arbsr/rng.hpp"
#include "arbsr/sampling.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "testcorpus.hpp"

namespace test = testsupport;

using namespace arbsr;
namespace fs = std::filesystem;

namespace {

constexpr real kResizeTol = kPrecisionF64 ? real(1e-12) : real(1e-5);

Tensor random_image(int h, int w, unsigned long long seed) {
    Rng rng(seed);
    Tensor t(1, 3, h, w);
    for (auto& v : t.data) v = real(rng.uniform());
    return t;
}

}  // namespace

TEST_CASE("cubic taps partition unity and clamp at the edges") {
    for (auto [in, out] : {std::pair<int, int>{16, 7}, {16, 37}, {5, 5}, {3, 11}}) {
        CubicTaps taps = cubic_taps(in, out);
        REQUIRE(taps.idx.size() == size_t(out) * 4);
        for (int d = 0; d < out; ++d) {
            double wsum = 0;
            for (int t = 0; t < 4; ++t) {
                int i = taps.idx[size_t(d) * 4 + t];
                CHECK(i >= 0);
                CHECK(i < in);
                wsum += double(taps.weight[size_t(d) * 4 + t]);
            }
            CHECK(std::abs(wsum - 1.0) < (kPrecisionF64 ? 1e-12 : 1e-5));
        }
    }
}

TEST_CASE("bicubic matches the direct-summation reference") {
    Tensor img = random_image(16, 16, 201);
    for (auto [ho, wo] : {std::pair<int, int>{7, 7}, {11, 23}, {16, 16}, {33, 9}}) {
        Tensor fast = bicubic_resize(img, ho, wo);
        Tensor slow = test::bicubic_direct(img, ho, wo);
        REQUIRE(fast.shape == slow.shape);
        real worst = 0;
        for (std::int64_t i = 0; i < fast.size(); ++i)
            worst = std::max(worst, std::abs(fast.data[i] - slow.data[i]));
        CHECK(worst <= kResizeTol);
    }
}

TEST_CASE("bicubic reproduces constants and interior linear ramps") {
    // bit-exact, not merely close: the taps enforce partition of unity
    // and the kernel evaluates in differential form
    Tensor flat(1, 3, 9, 9, real(0.37));
    Tensor up = bicubic_resize(flat, 20, 14);
    for (real v : up.data) CHECK(v == real(0.37));
    Tensor down = bicubic_resize(up, 5, 6);
    for (real v : down.data) CHECK(v == real(0.37));

    // Catmull-Rom is exact on linear functions away from the clamped border.
    Tensor ramp(1, 1, 12, 12);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) ramp.at(0, 0, y, x) = real(0.05) * x - real(0.02) * y;
    Tensor big = bicubic_resize(ramp, 30, 30);
    for (int y = 6; y < 24; ++y)
        for (int x = 6; x < 24; ++x) {
            double sx = (x + 0.5) * 12.0 / 30.0 - 0.5;
            double sy = (y + 0.5) * 12.0 / 30.0 - 0.5;
            double want = 0.05 * sx - 0.02 * sy;
            CHECK(std::abs(double(big.at(0, 0, y, x)) - want) <
                  (kPrecisionF64 ? 1e-12 : 1e-5));
        }
}

TEST_CASE("bicubic rejects degenerate sizes") {
    Tensor img = random_image(8, 8, 202);
    CHECK_THROWS_AS(bicubic_resize(img, 0, 8), std::invalid_argument);
    CHECK_THROWS_AS(bicubic_resize(img, 8, -3), std::invalid_argument);
    CHECK_THROWS_AS(cubic_taps(0, 4), std::invalid_argument);
}

TEST_CASE("bicubic backward is the exact adjoint") {
    // <A x, y> == <x, A^T y> for the linear resize map; random probes.
    Tensor x = random_image(7, 9, 203);
    Rng rng(204);
    Tensor y(1, 3, 12, 5);
    for (auto& v : y.data) v = real(rng.uniform(-1, 1));

    Tensor ax = bicubic_resize(x, 12, 5);
    Tensor aty = bicubic_resize_backward(x, y);
    REQUIRE(aty.shape == x.shape);

    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < ax.size(); ++i) lhs += double(ax.data[i]) * double(y.data[i]);
    for (std::int64_t i = 0; i < x.size(); ++i) rhs += double(x.data[i]) * double(aty.data[i]);
    CHECK(std::abs(lhs - rhs) < (kPrecisionF64 ? 1e-10 : 1e-3));
}

TEST_CASE("image files round-trip exactly") {
    fs::path dir = test::fresh_dir("imgio");
    Tensor orig = test::synth_image(3, 24, 17);

    for (const char* name : {"a.png", "b.ppm"}) {
        std::string path = (dir / name).string();
        save_image(tensor_to_image(orig), path);
        Tensor back = image_to_tensor(load_image(path));
        REQUIRE(back.shape == orig.shape);
        // synth images are already 8-bit quantized, so this is exact
        for (std::int64_t i = 0; i < orig.size(); ++i) CHECK(back.data[i] == orig.data[i]);
    }

    CHECK_THROWS_AS(load_image((dir / "nope.png").string()), io_error);
    std::ofstream junk(dir / "junk.png", std::ios::binary);
    junk << "this is not an image";
    junk.close();
    CHECK_THROWS_AS(load_image((dir / "junk.png").string()), io_error);

    fs::remove_all(dir);
}

TEST_CASE("tensor/image quantization clamps out-of-range values") {
    Tensor t(1, 3, 1, 2);
    t.data = {real(-0.5), real(1.5), real(0.5), real(0), real(1), real(0.25)};
    ImageBuffer img = tensor_to_image(t);
    CHECK(img.pixels[0] == 0);    // clamped low
    CHECK(img.pixels[3] == 255);  // clamped high
    Tensor back = image_to_tensor(img);
    CHECK(back.data[0] == real(0));
    CHECK(back.data[1] == real(1));
}

TEST_CASE("sample_scale draws from the documented grids") {
    Rng rng(301);
    const auto& sym = symmetric_scale_grid();

    for (int i = 0; i < 200; ++i) {
        ScalePair w = sample_scale(rng, ScaleMode::IntegerWarmup);
        CHECK(w.r_h == w.r_v);
        CHECK((w.r_h == real(2) || w.r_h == real(3) || w.r_h == real(4)));
    }

    for (int i = 0; i < 200; ++i) {
        ScalePair s = sample_scale(rng, ScaleMode::Symmetric);
        CHECK(s.r_h == s.r_v);
        bool on_grid = false;
        for (real g : sym)
            if (s.r_h == g) on_grid = true;
        CHECK(on_grid);
    }

    bool saw_sym = false, saw_asym = false;
    for (int i = 0; i < 400; ++i) {
        ScalePair m = sample_scale(rng, ScaleMode::Mixed);
        (m.r_h == m.r_v ? saw_sym : saw_asym) = true;
    }
    CHECK(saw_sym);
    CHECK(saw_asym);

    for (int i = 0; i < 200; ++i) {
        ScalePair a = sample_scale(rng, ScaleMode::Asymmetric);
        CHECK(a.r_h != a.r_v);
    }
}

TEST_CASE("make_batch shapes, determinism, and augmentation") {
    std::vector<Tensor> corpus = test::synth_corpus(3, 96, 96);
    ScalePair s{real(1.5), real(3.0)};

    Rng r1(888), r2(888), r3(889);
    auto b1 = make_batch(corpus, s, 4, 20, r1);
    auto b2 = make_batch(corpus, s, 4, 20, r2);
    auto b3 = make_batch(corpus, s, 4, 20, r3);
    REQUIRE(b1.size() == 4);

    // all samples in a batch share one (possibly rotation-swapped) scale
    for (const auto& smp : b1) {
        CHECK(smp.scale.r_h == b1[0].scale.r_h);
        CHECK(smp.scale.r_v == b1[0].scale.r_v);
        CHECK(smp.lr.shape.h == 20);
        CHECK(smp.lr.shape.w == 20);
        CHECK(smp.hr.shape.h == int(std::lround(20 * double(smp.scale.r_v))));
        CHECK(smp.hr.shape.w == int(std::lround(20 * double(smp.scale.r_h))));
        for (real v : smp.lr.data) {
            CHECK(v >= real(0));
            CHECK(v <= real(1));
        }
    }

    bool identical = true, differs = false;
    for (size_t i = 0; i < b1.size(); ++i) {
        if (b1[i].lr.data != b2[i].lr.data || b1[i].hr.data != b2[i].hr.data)
            identical = false;
        if (b1[i].lr.data != b3[i].lr.data) differs = true;
    }
    CHECK(identical);
    CHECK(differs);

    // quarter turns swap the axis pair; over many draws both orders show up
    bool saw_orig = false, saw_swapped = false;
    Rng rr(890);
    for (int i = 0; i < 40 && !(saw_orig && saw_swapped); ++i) {
        auto b = make_batch(corpus, s, 2, 20, rr);
        if (b[0].scale.r_h == s.r_h) saw_orig = true;
        if (b[0].scale.r_h == s.r_v) saw_swapped = true;
    }
    CHECK(saw_orig);
    CHECK(saw_swapped);

    CHECK_THROWS_AS(make_batch({}, s, 4, 20, r1), config_error);

    // an image too small for the HR crop is skipped, not fatal
    std::vector<Tensor> mixed = {random_image(16, 16, 555), corpus[0]};
    auto b4 = make_batch(mixed, {real(4), real(4)}, 3, 20, r1);
    CHECK(b4.size() == 3);

    // nothing fits -> argument error
    std::vector<Tensor> tiny = {random_image(16, 16, 556)};
    CHECK_THROWS_AS(make_batch(tiny, {real(4), real(4)}, 3, 20, r1), config_error);
}

TEST_CASE("rotations and flips are exact permutations") {
    Tensor t = random_image(5, 7, 600);

    Tensor r90 = rotate90(t);
    CHECK(r90.shape.h == 7);
    CHECK(r90.shape.w == 5);
    // clockwise: (y, x) -> (x, H-1-y)
    CHECK(r90.at(0, 1, 3, 0) == t.at(0, 1, 4, 3));

    Tensor r180 = rotate180(t);
    CHECK(r180.at(0, 2, 0, 0) == t.at(0, 2, 4, 6));

    Tensor back = rotate270(rotate90(t));
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(back.data[i] == t.data[i]);

    Tensor f = hflip(t);
    CHECK(f.at(0, 0, 2, 0) == t.at(0, 0, 2, 6));
    Tensor ff = hflip(f);
    for (std::int64_t i = 0; i < t.size(); ++i) CHECK(ff.data[i] == t.data[i]);
}

TEST_CASE("corpus listing and loading") {
    fs::path dir = test::fresh_dir("corpus");
    test::write_corpus_dir(dir.string(), 4, 40, 40);
    std::ofstream(dir / "notes.txt") << "ignored";

    auto files = list_corpus(dir.string());
    REQUIRE(files.size() == 4);
    CHECK(std::is_sorted(files.begin(), files.end()));
    for (const auto& f : files) CHECK(f.find(".png") != std::string::npos);

    auto corpus = load_corpus(dir.string());
    REQUIRE(corpus.size() == 4);
    for (const auto& img : corpus) {
        CHECK(img.shape.c == 3);
        CHECK(img.shape.h == 40);
    }

    CHECK_THROWS_AS(list_corpus((dir / "missing").string()), io_error);
    fs::path empty = test::fresh_dir("empty");
    CHECK_THROWS_AS(load_corpus(empty.string()), io_error);

    fs::remove_all(dir);
    fs::remove_all(empty);
}
