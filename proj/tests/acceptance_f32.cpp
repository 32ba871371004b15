// Acceptance sweep, 32-bit build: the training smoke test against the
// bicubic baseline, the qualitative ablation trends, and the exact-size
// CLI contract. These run real training, so this binary dominates the
// suite's runtime; budgets are enforced, not just hoped for.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include "arbsr/analysis.hpp"
#include "arbsr/checkpoint.hpp"
#include "arbsr/image.hpp"
#include "arbsr/model.hpp"
#include "arbsr/train.hpp"
#include "testcorpus.hpp"

namespace test = testsupport;

using namespace arbsr;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_trained_ckpt;  // written by criterion 5, reused by criterion 7

void report(int criterion, const char* name, bool pass, const std::string& detail) {
    std::printf("%s  criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

std::vector<Tensor> tail(const std::vector<Tensor>& corpus, int n) {
    return {corpus.end() - n, corpus.end()};
}

double mean_psnr(const ArbNet& model, const std::vector<Tensor>& images,
                 const std::vector<ScalePair>& scales) {
    double acc = 0;
    for (const ScalePair& s : scales)
        acc += double(evaluate_model(model, images, s, /*with_ssim=*/false).psnr);
    return acc / double(scales.size());
}

// --- criterion 5: beat the bicubic baseline -------------------------------

void criterion_training_smoke() {
    auto corpus = test::synth_corpus(16, 128, 128);
    const auto heldout = tail(corpus, 4);

    ModelConfig mc;  // the stock configuration: 8 blocks, C=32, K=2, E=4
    ArbNet model(mc);
    model.init(2026);

    TrainConfig tc;
    tc.epochs = 6;
    tc.iters_per_epoch = 120;
    tc.batch = 16;
    tc.patch = 32;
    tc.lr0 = real(1e-3);
    tc.seed = 2026;
    tc.val_holdout = 4;

    const std::clock_t c0 = std::clock();
    train(model, corpus, tc);
    const double cpu_min = double(std::clock() - c0) / CLOCKS_PER_SEC / 60.0;

    const fs::path dir = test::fresh_dir("acc_smoke");
    g_trained_ckpt = (dir / "trained.ckpt").string();
    save_checkpoint(model, g_trained_ckpt);

    struct Bar {
        ScalePair s;
        double need;
    };
    const Bar bars[] = {{{real(2), real(2)}, 0.2},
                        {{real(1.5), real(1.5)}, 0.2},
                        {{real(1.5), real(3)}, 0.1}};
    std::string detail = fmt("%.1f CPU-min;", cpu_min);
    bool pass = cpu_min <= 30.0;
    if (!pass) detail += " over the 30-minute budget;";
    for (const Bar& b : bars) {
        const double ours = double(evaluate_model(model, heldout, b.s, false).psnr);
        const double base = double(evaluate_bicubic(heldout, b.s, false).psnr);
        const double margin = ours - base;
        pass = pass && margin >= b.need;
        detail += fmt(" %s: %+.3f dB (need %+.1f),", b.s.str().c_str(), margin, b.need);
    }
    detail.pop_back();
    report(5, "training beats bicubic on held-out images", pass, detail);
}

// --- criterion 6: ablation trends -----------------------------------------

struct TrendCell {
    double up_head = 0, bic_head = 0;     // (a) mean PSNR, non-integer scales
    double e4_asym = 0, e1_asym = 0;      // (b) asymmetric scales
    double e4_sym = 0, e1_sym = 0;        // (b) symmetric reference
};

TrendCell run_trend_seed(const std::vector<Tensor>& corpus, unsigned long long seed) {
    const auto heldout = tail(corpus, 2);
    const std::vector<ScalePair> non_integer = {{real(1.5), real(1.5)},
                                                {real(2.5), real(2.5)}};
    const std::vector<ScalePair> asym = {{real(1.5), real(3)}, {real(3), real(1.5)}};
    const std::vector<ScalePair> sym = {{real(2), real(2)}, {real(3), real(3)}};

    auto train_one = [&](Variant v, int experts) {
        ModelConfig mc;
        mc.blocks = 4;
        mc.channels = 16;
        mc.adapt_every = 2;
        mc.experts = experts;
        mc.hidden = 32;
        mc.variant = v;
        ArbNet model(mc);
        model.init(seed);

        TrainConfig tc;
        tc.epochs = 3;
        tc.iters_per_epoch = 80;
        tc.batch = 8;
        tc.patch = 24;
        tc.lr0 = real(1e-3);
        tc.seed = seed;
        tc.val_holdout = 2;
        train(model, corpus, tc);
        return model;
    };

    TrendCell cell;
    {
        ArbNet m = train_one(Variant::UpsampleOnly, 4);
        cell.up_head = mean_psnr(m, heldout, non_integer);
    }
    {
        ArbNet m = train_one(Variant::BicubicHead, 4);
        cell.bic_head = mean_psnr(m, heldout, non_integer);
    }
    {
        ArbNet m = train_one(Variant::Full, 4);
        cell.e4_asym = mean_psnr(m, heldout, asym);
        cell.e4_sym = mean_psnr(m, heldout, sym);
    }
    {
        ArbNet m = train_one(Variant::Full, 1);
        cell.e1_asym = mean_psnr(m, heldout, asym);
        cell.e1_sym = mean_psnr(m, heldout, sym);
    }
    return cell;
}

void criterion_trends() {
    auto corpus = test::synth_corpus(10, 96, 96);
    const unsigned long long seeds[] = {101, 202, 303};

    int pass_a = 0, pass_b = 0;
    std::string detail;
    for (unsigned long long seed : seeds) {
        const TrendCell c = run_trend_seed(corpus, seed);
        const bool a = c.up_head >= c.bic_head;
        const bool b =
            c.e4_asym >= c.e1_asym && (c.e4_asym - c.e1_asym) > (c.e4_sym - c.e1_sym);
        pass_a += a;
        pass_b += b;
        detail += fmt(" seed %llu: up%+.3f%s, experts asym%+.3f/sym%+.3f%s;", seed,
                      c.up_head - c.bic_head, a ? "" : " (a MISS)", c.e4_asym - c.e1_asym,
                      c.e4_sym - c.e1_sym, b ? "" : " (b MISS)");
    }
    detail.pop_back();
    report(6, "ablation trends across seeds", pass_a >= 2 && pass_b >= 2,
           fmt("upsampler trend %d/3, expert trend %d/3;%s", pass_a, pass_b,
               detail.c_str()));
}

// --- criterion 7: exact-size CLI output -----------------------------------

bool sr_emits(const std::string& ckpt, const std::string& input, const fs::path& out,
              std::string* why) {
    const std::string cmd = std::string(ARBSR_BIN) + " sr --model " + ckpt + " --input " +
                            input + " --output " + out.string() +
                            " --size 220x420 >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) {
        *why = fmt("exit status %d", rc);
        return false;
    }
    const ImageBuffer img = load_image(out.string());
    if (img.width != 220 || img.height != 420) {
        *why = fmt("wrote %dx%d", img.width, img.height);
        return false;
    }
    return true;
}

void criterion_exact_size() {
    const fs::path dir = test::fresh_dir("acc_size");
    const std::string input = (dir / "in.png").string();
    save_image(tensor_to_image(test::synth_image(33, 100, 100)), input);

    const std::string fresh = (dir / "untrained.ckpt").string();
    {
        ArbNet blank;  // stock configuration, initialized but never trained
        blank.init(9);
        save_checkpoint(blank, fresh);
    }

    std::string why_t = "ok", why_u = "ok";
    const bool trained = !g_trained_ckpt.empty() &&
                         sr_emits(g_trained_ckpt, input, dir / "out_t.png", &why_t);
    if (g_trained_ckpt.empty()) why_t = "no trained checkpoint from criterion 5";
    const bool untrained = sr_emits(fresh, input, dir / "out_u.png", &why_u);

    report(7, "sr --size 220x420 on a 100x100 input", trained && untrained,
           fmt("trained: %s, untrained: %s", why_t.c_str(), why_u.c_str()));
}

}  // namespace

int main() {
    std::printf("acceptance (32-bit build)\n");
    criterion_training_smoke();
    criterion_trends();
    criterion_exact_size();
    if (g_failures) std::printf("%d criteria FAILED\n", g_failures);
    else std::printf("all criteria passed\n");
    return g_failures;
}
