// arbsr: train, apply and inspect the scale-arbitrary SR models.
//
// Exit codes: 0 success, 1 runtime failure (bad file, diverged run),
// 2 usage errors (unknown flags, malformed scale strings, bad configs).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "arbsr/ablation.hpp"
#include "arbsr/analysis.hpp"
#include "arbsr/checkpoint.hpp"
#include "arbsr/common.hpp"
#include "arbsr/gradsuite.hpp"
#include "arbsr/image.hpp"
#include "arbsr/metrics.hpp"
#include "arbsr/model.hpp"
#include "arbsr/sampling.hpp"
#include "arbsr/threading.hpp"
#include "arbsr/train.hpp"

namespace {

using namespace arbsr;

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(text.substr(start));
            break;
        }
        out.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::pair<int, int> parse_size(const std::string& text) {
    int w = 0, h = 0;
    char trailing = 0;
    if (std::sscanf(text.c_str(), "%dx%d%c", &w, &h, &trailing) != 2 || w <= 0 || h <= 0)
        throw config_error("bad --size '" + text + "' (want WxH, e.g. 220x420)");
    return {w, h};
}

ScaleMode parse_mode(const std::string& text) {
    if (text == "mixed") return ScaleMode::Mixed;
    if (text == "symmetric") return ScaleMode::Symmetric;
    if (text == "asymmetric") return ScaleMode::Asymmetric;
    throw config_error("bad --mode '" + text + "' (mixed, symmetric or asymmetric)");
}

struct TrainOpts {
    std::string data, out = "model.ckpt", log_dir, mode = "mixed", variant = "full";
    int epochs = 20, iters = 200, batch = 16, patch = 50;
    int blocks = 8, channels = 32, adapt_every = 2, experts = 4, hidden = 64;
    int warmup = 1, val_holdout = 0;
    unsigned long long seed = 1;
    double lr0 = 1e-4, clip = 10;
    bool no_prefetch = false;
};

int cmd_train(const TrainOpts& o) {
    ModelConfig mc;
    mc.blocks = o.blocks;
    mc.channels = o.channels;
    mc.adapt_every = o.adapt_every;
    mc.experts = o.experts;
    mc.hidden = o.hidden;
    mc.variant = parse_variant(o.variant);
    ArbNet model(mc);
    model.init(o.seed);
    std::printf("model: %s, %lld parameters\n", variant_name(mc.variant),
                (long long)model.parameter_count());

    TrainConfig tc;
    tc.epochs = o.epochs;
    tc.iters_per_epoch = o.iters;
    tc.batch = o.batch;
    tc.patch = o.patch;
    tc.seed = o.seed;
    tc.lr0 = real(o.lr0);
    tc.clip_norm = real(o.clip);
    tc.warmup_epochs = o.warmup;
    tc.mode = parse_mode(o.mode);
    tc.val_holdout = o.val_holdout;
    tc.prefetch = !o.no_prefetch;
    tc.checkpoint_path = o.out;
    if (!o.log_dir.empty()) {
        tc.log_dir = o.log_dir;
    } else {
        const std::string parent = std::filesystem::path(o.out).parent_path().string();
        tc.log_dir = parent.empty() ? "." : parent;
    }
    tc.validate();

    const std::vector<Tensor> corpus = load_corpus(o.data);
    const TrainLog log = train(model, corpus, tc);
    if (!log.iters.empty())
        std::printf("final loss %.6f after %d iterations\n", double(log.iters.back().loss),
                    log.iters.back().iteration);
    std::printf("checkpoint: %s\nlogs: %s\n", o.out.c_str(), tc.log_dir.c_str());
    return 0;
}

struct SrOpts {
    std::string model, input, output = "out.png", scale, size;
};

int cmd_sr(const SrOpts& o) {
    if (o.scale.empty() == o.size.empty())
        throw config_error("sr: exactly one of --scale / --size is required");
    ArbNet model = load_checkpoint(o.model);
    const Tensor lr = image_to_tensor(load_image(o.input));

    Tensor sr;
    if (!o.size.empty()) {
        const auto [w, h] = parse_size(o.size);
        sr = model.forward_to(lr, h, w);
    } else {
        const ScalePair s = parse_scale(o.scale);
        if (s.r_h < 1 || s.r_h > 4 || s.r_v < 1 || s.r_v > 4)
            std::fprintf(stderr, "warning: scale %s is outside the trained range [1, 4]\n",
                         s.str().c_str());
        sr = model.forward(lr, s);
    }
    save_image(tensor_to_image(sr), o.output);
    std::printf("%s: %dx%d -> %s: %dx%d\n", o.input.c_str(), lr.shape.w, lr.shape.h,
                o.output.c_str(), sr.shape.w, sr.shape.h);
    return 0;
}

struct EvalOpts {
    std::string model, data, scales = "2,1.5,1.5x3.0", report;
};

int cmd_eval(const EvalOpts& o) {
    const ArbNet model = load_checkpoint(o.model);
    const std::vector<Tensor> images = load_corpus(o.data);
    const std::string dataset = std::filesystem::path(o.data).filename().string();

    std::vector<ScalePair> scales;
    for (const std::string& item : split_list(o.scales)) scales.push_back(parse_scale(item));

    std::string csv = "dataset,r_h,r_v,n,psnr,ssim\n";
    char line[160];
    for (const ScalePair& s : scales) {
        const EvalResult r = evaluate_model(model, images, s);
        std::printf("scale %s: psnr %.4f dB, ssim %.5f (%d images)\n", s.str().c_str(),
                    double(r.psnr), double(r.ssim), r.count);
        std::snprintf(line, sizeof(line), "%s,%g,%g,%d,%.4f,%.5f\n", dataset.c_str(),
                      double(s.r_h), double(s.r_v), r.count, double(r.psnr), double(r.ssim));
        csv += line;
    }
    if (!o.report.empty()) {
        std::ofstream f(o.report, std::ios::binary);
        if (!f) throw io_error("cannot write " + o.report);
        f << csv;
    }
    return 0;
}

int cmd_gradcheck(unsigned long long seed) {
    if (!kPrecisionF64) {
        std::fprintf(stderr,
                     "gradcheck needs 64-bit precision; run `arbsr64 gradcheck` instead\n");
        return 1;
    }
    const std::vector<SuiteResult> suite = run_gradient_suite(seed);
    std::printf("%-22s %8s %12s %9s  result\n", "op", "checked", "max rel err", "tol");
    bool ok = true;
    for (const SuiteResult& r : suite) {
        const bool pass = r.pass();
        ok = ok && pass;
        std::printf("%-22s %8lld %12.3e %9.0e  %s\n", r.name.c_str(),
                    (long long)r.report.checked, double(r.report.max_rel), double(r.tol),
                    pass ? "pass" : "FAIL");
        if (!pass)
            std::printf("    worst: %s[%lld] analytic %.6e vs numeric %.6e\n",
                        r.report.worst.param.c_str(), (long long)r.report.worst.index,
                        double(r.report.worst.analytic), double(r.report.worst.numeric));
    }
    return ok ? 0 : 1;
}

struct AnalyzeOpts {
    std::vector<std::string> models;
    std::string image, out = ".";
};

int cmd_analyze(const AnalyzeOpts& o) {
    if (o.models.size() != 3)
        throw config_error("analyze: --models wants exactly three checkpoints (x2,x3,x4)");
    const ArbNet m2 = load_checkpoint(o.models[0]);
    const ArbNet m3 = load_checkpoint(o.models[1]);
    const ArbNet m4 = load_checkpoint(o.models[2]);
    const Tensor image = image_to_tensor(load_image(o.image));

    const std::vector<Tensor> maps = feature_similarity(m2, m3, m4, image);
    std::filesystem::create_directories(o.out);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const Tensor& m = maps[i];
        double mean = 0;
        std::vector<unsigned char> bytes(m.data.size());
        for (std::size_t p = 0; p < m.data.size(); ++p) {
            mean += double(m.data[p]);
            // [-1, 1] -> [0, 255]
            const long v = std::lround((double(m.data[p]) + 1.0) * 127.5);
            bytes[p] = (unsigned char)std::clamp(v, 0L, 255L);
        }
        const std::string path =
            (std::filesystem::path(o.out) / ("similarity_block" + std::to_string(i) + ".pgm"))
                .string();
        save_pgm(bytes, m.shape.w, m.shape.h, path);
        std::printf("block %zu: mean similarity %.4f -> %s\n", i, mean / double(m.data.size()),
                    path.c_str());
    }
    return 0;
}

struct RoutingOpts {
    std::string model, out = "routing.csv";
};

int cmd_dump_routing(const RoutingOpts& o) {
    const ArbNet model = load_checkpoint(o.model);
    const std::string csv = dump_routing(model);
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw io_error("cannot write " + o.out);
    f << csv;
    std::printf("routing table for %zu banks -> %s\n", model.adapts.size(), o.out.c_str());
    return 0;
}

struct GuidanceOpts {
    std::string model, image, scale = "2", out = ".";
};

int cmd_dump_guidance(const GuidanceOpts& o) {
    const ArbNet model = load_checkpoint(o.model);
    const Tensor image = image_to_tensor(load_image(o.image));
    const ScalePair s = parse_scale(o.scale);
    std::filesystem::create_directories(o.out);
    for (const std::string& path : dump_guidance(model, image, s, o.out))
        std::printf("%s\n", path.c_str());
    return 0;
}

struct AblateOpts {
    std::string data, out = ".", scales = "2,1.5", variants;
    std::vector<unsigned long long> seeds = {1, 2, 3};
    int epochs = 2, iters = 40, batch = 8, patch = 24;
    int blocks = 4, channels = 16, adapt_every = 2, experts = 4, hidden = 64;
    int holdout = 2;
    double lr0 = 1e-4;
};

int cmd_ablate(const AblateOpts& o) {
    AblationConfig cfg;
    cfg.base.blocks = o.blocks;
    cfg.base.channels = o.channels;
    cfg.base.adapt_every = o.adapt_every;
    cfg.base.hidden = o.hidden;
    cfg.budget.epochs = o.epochs;
    cfg.budget.iters_per_epoch = o.iters;
    cfg.budget.batch = o.batch;
    cfg.budget.patch = o.patch;
    cfg.budget.lr0 = real(o.lr0);
    cfg.budget.warmup_epochs = std::min(1, o.epochs);
    cfg.seeds = o.seeds;
    cfg.holdout = o.holdout;
    cfg.scales.clear();
    for (const std::string& item : split_list(o.scales)) cfg.scales.push_back(parse_scale(item));

    std::vector<AblationSpec> specs;
    if (o.variants.empty()) {
        specs = default_ablation_specs(o.experts);
    } else {
        for (const std::string& name : split_list(o.variants))
            specs.push_back(AblationSpec{parse_variant(name), o.experts});
    }

    const std::vector<Tensor> corpus = load_corpus(o.data);
    const std::vector<AblationCell> cells = ablation_harness(corpus, specs, cfg);
    std::filesystem::create_directories(o.out);
    const std::string csv_path = (std::filesystem::path(o.out) / "ablation.csv").string();
    write_ablation_csv(cells, csv_path);
    for (const AblationCell& c : cells)
        std::printf("%-14s E=%d seed=%llu scale %gx%g: psnr %.4f ssim %.5f\n",
                    c.variant.c_str(), c.experts, c.seed, double(c.r_h), double(c.r_v),
                    double(c.psnr), double(c.ssim));
    std::printf("-> %s\n", csv_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scale-arbitrary single-image super-resolution"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap worker threads (0 = auto)");

    TrainOpts tr;
    CLI::App* train_cmd = app.add_subcommand("train", "train a model on an image corpus");
    train_cmd->add_option("--data", tr.data, "corpus directory")->required();
    train_cmd->add_option("--out", tr.out, "checkpoint path");
    train_cmd->add_option("--log-dir", tr.log_dir, "CSV log directory (default: beside --out)");
    train_cmd->add_option("--epochs", tr.epochs, "training epochs");
    train_cmd->add_option("--iters", tr.iters, "iterations per epoch");
    train_cmd->add_option("--batch", tr.batch, "batch size");
    train_cmd->add_option("--patch", tr.patch, "LR patch side");
    train_cmd->add_option("--seed", tr.seed, "run seed");
    train_cmd->add_option("--lr", tr.lr0, "initial learning rate");
    train_cmd->add_option("--clip", tr.clip, "global gradient-norm clip (0 = off)");
    train_cmd->add_option("--warmup", tr.warmup, "integer-scale warm-up epochs");
    train_cmd->add_option("--mode", tr.mode, "scale regime: mixed|symmetric|asymmetric");
    train_cmd->add_option("--val-holdout", tr.val_holdout, "corpus tail held out for validation");
    train_cmd->add_option("--blocks", tr.blocks, "residual blocks");
    train_cmd->add_option("--channels", tr.channels, "feature channels");
    train_cmd->add_option("--adapt-every", tr.adapt_every, "adaption block stride");
    train_cmd->add_option("--experts", tr.experts, "experts per bank");
    train_cmd->add_option("--hidden", tr.hidden, "controller hidden width");
    train_cmd->add_option("--variant", tr.variant,
                          "full|no_guidance|upsample_only|bicubic_head");
    train_cmd->add_flag("--no-prefetch", tr.no_prefetch, "build batches on the main thread");

    SrOpts sr;
    CLI::App* sr_cmd = app.add_subcommand("sr", "super-resolve one image");
    sr_cmd->add_option("--model", sr.model, "checkpoint path")->required();
    sr_cmd->add_option("--input", sr.input, "input image (PNG or PPM)")->required();
    sr_cmd->add_option("--output", sr.output, "output image path");
    sr_cmd->add_option("--scale", sr.scale, "R or RHxRV, e.g. 2 or 2.2x4.2");
    sr_cmd->add_option("--size", sr.size, "exact output WxH, e.g. 220x420");

    EvalOpts ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "psnr/ssim over a directory");
    eval_cmd->add_option("--model", ev.model, "checkpoint path")->required();
    eval_cmd->add_option("--data", ev.data, "image directory")->required();
    eval_cmd->add_option("--scales", ev.scales, "comma list, e.g. 2,1.5,1.5x3.0");
    eval_cmd->add_option("--report", ev.report, "write the metrics CSV here");

    unsigned long long gc_seed = 0;
    CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient audit");
    gc_cmd->add_option("--seed", gc_seed, "re-randomize probe data (0 = pinned)");

    AnalyzeOpts an;
    CLI::App* an_cmd =
        app.add_subcommand("analyze", "cross-scale feature similarity maps");
    an_cmd->add_option("--models", an.models, "three checkpoints: x2,x3,x4")
        ->required()
        ->delimiter(',');
    an_cmd->add_option("--image", an.image, "probe image")->required();
    an_cmd->add_option("--out", an.out, "output directory");

    RoutingOpts ro;
    CLI::App* ro_cmd = app.add_subcommand("dump-routing", "expert weights over the scale grid");
    ro_cmd->add_option("--model", ro.model, "checkpoint path")->required();
    ro_cmd->add_option("--out", ro.out, "CSV path");

    GuidanceOpts gu;
    CLI::App* gu_cmd = app.add_subcommand("dump-guidance", "guidance maps as PGM");
    gu_cmd->add_option("--model", gu.model, "checkpoint path")->required();
    gu_cmd->add_option("--image", gu.image, "input image")->required();
    gu_cmd->add_option("--scale", gu.scale, "conditioning scale");
    gu_cmd->add_option("--out", gu.out, "output directory");

    AblateOpts ab;
    CLI::App* ab_cmd = app.add_subcommand("ablate", "train and score the variant matrix");
    ab_cmd->add_option("--data", ab.data, "corpus directory")->required();
    ab_cmd->add_option("--out", ab.out, "output directory");
    ab_cmd->add_option("--scales", ab.scales, "evaluation scales");
    ab_cmd->add_option("--variants", ab.variants, "comma list (default: all four)");
    ab_cmd->add_option("--seeds", ab.seeds, "run seeds")->delimiter(',');
    ab_cmd->add_option("--epochs", ab.epochs, "epochs per cell");
    ab_cmd->add_option("--iters", ab.iters, "iterations per epoch");
    ab_cmd->add_option("--batch", ab.batch, "batch size");
    ab_cmd->add_option("--patch", ab.patch, "LR patch side");
    ab_cmd->add_option("--blocks", ab.blocks, "residual blocks");
    ab_cmd->add_option("--channels", ab.channels, "feature channels");
    ab_cmd->add_option("--adapt-every", ab.adapt_every, "adaption block stride");
    ab_cmd->add_option("--experts", ab.experts, "experts per bank");
    ab_cmd->add_option("--lr", ab.lr0, "initial learning rate");
    ab_cmd->add_option("--holdout", ab.holdout, "eval images held out");

    // Subcommand callbacks run inside parse(); apply the thread cap first.
    int rc = 0;
    auto dispatch = [&](auto fn) {
        return [&, fn] {
            if (threads > 0) threads::set_max(threads);
            rc = fn();
        };
    };
    train_cmd->callback(dispatch([&] { return cmd_train(tr); }));
    sr_cmd->callback(dispatch([&] { return cmd_sr(sr); }));
    eval_cmd->callback(dispatch([&] { return cmd_eval(ev); }));
    gc_cmd->callback(dispatch([&] { return cmd_gradcheck(gc_seed); }));
    an_cmd->callback(dispatch([&] { return cmd_analyze(an); }));
    ro_cmd->callback(dispatch([&] { return cmd_dump_routing(ro); }));
    gu_cmd->callback(dispatch([&] { return cmd_dump_guidance(gu); }));
    ab_cmd->callback(dispatch([&] { return cmd_ablate(ab); }));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // help exits clean; anything else is usage
    } catch (const config_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
