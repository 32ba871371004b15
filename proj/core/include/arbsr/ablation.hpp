#pragma once

#include <string>
#include <vector>

#include "arbsr/model.hpp"
#include "arbsr/train.hpp"

namespace arbsr {

/// One trained configuration in the comparison matrix.
struct AblationSpec {
    Variant variant = Variant::Full;
    int experts = 4;
};

struct AblationConfig {
    ModelConfig base;     // shared backbone; variant/experts come per spec
    TrainConfig budget;   // identical training budget for every cell
    std::vector<unsigned long long> seeds = {1, 2, 3};
    std::vector<ScalePair> scales = {{2, 2}, {real(1.5), real(1.5)}};
    int holdout = 2;      // corpus tail reserved for evaluation
};

/// One (spec, seed, scale) measurement.
struct AblationCell {
    std::string variant;
    int experts = 0;
    unsigned long long seed = 0;
    real r_h = 0, r_v = 0;
    int count = 0;
    real psnr = 0;
    real ssim = 0;
};

/// The four-variant sweep at the base expert count.
std::vector<AblationSpec> default_ablation_specs(int experts);

/// Trains every spec under every seed on the corpus head and evaluates on
/// the held-out tail. All cells share the training budget and split.
std::vector<AblationCell> ablation_harness(const std::vector<Tensor>& corpus,
                                           const std::vector<AblationSpec>& specs,
                                           const AblationConfig& cfg);

/// "variant,experts,seed,r_h,r_v,n,psnr,ssim" rows.
void write_ablation_csv(const std::vector<AblationCell>& cells, const std::string& path);

}  // namespace arbsr
