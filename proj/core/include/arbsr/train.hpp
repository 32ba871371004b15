#pragma once

#include <string>
#include <vector>

#include "arbsr/model.hpp"
#include "arbsr/sampling.hpp"

namespace arbsr {

struct TrainConfig {
    int iters_per_epoch = 200;
    int epochs = 20;
    real lr0 = real(1e-4);
    int lr_halving_period = 30;  // epochs between halvings
    int warmup_epochs = 1;       // integer-scale opening phase
    int batch = 16;
    int patch = 50;  // LR patch side
    unsigned long long seed = 1;
    ScaleMode mode = ScaleMode::Mixed;  // regime after warm-up
    real clip_norm = 10;                // global L2 clip; 0 disables
    int val_holdout = 0;                // images reserved from the corpus tail
    bool prefetch = true;               // assemble the next batch on a worker thread
    std::string checkpoint_path;        // rewritten every epoch; empty disables
    std::string log_dir;                // CSV logs; empty disables

    void validate() const;  // throws config_error
};

struct TrainLog {
    struct IterRow {
        int iteration = 0;  // 1-based, global
        int epoch = 0;
        real loss = 0;
        real lr = 0;
    };
    struct ValRow {
        int epoch = 0;
        real r_h = 0, r_v = 0;
        real psnr = 0;
    };
    std::vector<IterRow> iters;
    std::vector<ValRow> vals;
};

/// Step-decay schedule: lr0 * 0.5^floor(epoch / halving period).
real lr_schedule(const TrainConfig& cfg, int epoch);

/// The fixed validation scale pairs: x2, x1.5 and 1.5x3.0.
const std::vector<ScalePair>& validation_scales();

/// Runs the full loop: per-iteration seeded batches (so prefetching
/// cannot change the stream), warm-up epoch on integer scales, L1 loss,
/// gradient clipping, Adam, per-epoch checkpoint and validation. Aborts
/// with train_error if the loss goes non-finite.
TrainLog train(ArbNet& model, const std::vector<Tensor>& corpus, const TrainConfig& cfg);

/// train_log.csv (iteration,epoch,loss,lr) and val_log.csv
/// (epoch,r_h,r_v,psnr) under dir, with pinned number formatting.
void write_train_logs(const TrainLog& log, const std::string& dir);

}  // namespace arbsr
