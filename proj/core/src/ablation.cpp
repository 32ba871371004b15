#include "arbsr/ablation.hpp"

#include <cstdio>
#include <fstream>

#include "arbsr/analysis.hpp"

namespace arbsr {

std::vector<AblationSpec> default_ablation_specs(int experts) {
    return {
        {Variant::BicubicHead, experts},
        {Variant::UpsampleOnly, experts},
        {Variant::NoGuidance, experts},
        {Variant::Full, experts},
    };
}

std::vector<AblationCell> ablation_harness(const std::vector<Tensor>& corpus,
                                           const std::vector<AblationSpec>& specs,
                                           const AblationConfig& cfg) {
    if (cfg.holdout <= 0 || int(corpus.size()) <= cfg.holdout)
        throw config_error("ablation: corpus of " + std::to_string(corpus.size()) +
                           " images cannot hold out " + std::to_string(cfg.holdout));
    if (specs.empty()) throw config_error("ablation: no specs");
    if (cfg.seeds.empty()) throw config_error("ablation: no seeds");
    const std::vector<Tensor> train_images(corpus.begin(), corpus.end() - cfg.holdout);
    const std::vector<Tensor> eval_images(corpus.end() - cfg.holdout, corpus.end());

    std::vector<AblationCell> cells;
    for (const AblationSpec& spec : specs) {
        for (unsigned long long seed : cfg.seeds) {
            ModelConfig mc = cfg.base;
            mc.variant = spec.variant;
            mc.experts = spec.experts;
            ArbNet net(mc);
            net.init(seed);

            TrainConfig tc = cfg.budget;
            tc.seed = seed;
            tc.val_holdout = 0;
            tc.checkpoint_path.clear();
            tc.log_dir.clear();
            train(net, train_images, tc);

            for (const ScalePair& s : cfg.scales) {
                const EvalResult r = evaluate_model(net, eval_images, s);
                AblationCell cell;
                cell.variant = variant_name(spec.variant);
                cell.experts = spec.experts;
                cell.seed = seed;
                cell.r_h = s.r_h;
                cell.r_v = s.r_v;
                cell.count = r.count;
                cell.psnr = r.psnr;
                cell.ssim = r.ssim;
                cells.push_back(cell);
            }
        }
    }
    return cells;
}

void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path);
    f << "variant,experts,seed,r_h,r_v,n,psnr,ssim\n";
    char line[160];
    for (const AblationCell& c : cells) {
        std::snprintf(line, sizeof(line), "%s,%d,%llu,%g,%g,%d,%.4f,%.5f\n",
                      c.variant.c_str(), c.experts, c.seed, double(c.r_h), double(c.r_v),
                      c.count, double(c.psnr), double(c.ssim));
        f << line;
    }
}

}  // namespace arbsr
