#include "arbsr/train.hpp"

#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "arbsr/analysis.hpp"
#include "arbsr/checkpoint.hpp"
#include "arbsr/image.hpp"
#include "arbsr/ops.hpp"

namespace arbsr {

namespace {

// Per-iteration seed: a splitmix64 scramble of (run seed, iteration), so
// batch k is the same whether it was prefetched or built inline.
std::uint64_t batch_seed(std::uint64_t seed, int k) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (std::uint64_t(k) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct Batch {
    Tensor lr, hr;
    ScalePair scale;
};

#ifdef ARBSR_TRAIN_TRACE
constexpr int kTraceCap = 64;
struct TraceRow {
    std::uint64_t lr_hash, hr_hash, pred_hash, grad_hash, param_hash;
    double loss;
    const void* lr_addr;
    const void* pred_addr;
};
TraceRow g_trace[kTraceCap];
constexpr int kTraceMaxParams = 256;
const char* g_tp_name[kTraceMaxParams];
std::uint64_t g_tp_grad[kTraceMaxParams];
int g_tp_count = 0;
#endif

Batch build_batch(const std::vector<Tensor>& images, const TrainConfig& cfg, int k) {
    Rng rng(batch_seed(cfg.seed, k));
    const int epoch = k / cfg.iters_per_epoch;
    const ScaleMode mode =
        epoch < cfg.warmup_epochs ? ScaleMode::IntegerWarmup : cfg.mode;
    const ScalePair drawn = sample_scale(rng, mode);
    std::vector<TrainSample> samples = make_batch(images, drawn, cfg.batch, cfg.patch, rng);

    Batch out;
    out.scale = samples[0].scale;  // rotation may have swapped the drawn pair
    const Shape4 ls = samples[0].lr.shape;
    const Shape4 hs = samples[0].hr.shape;
    out.lr = Tensor(Shape4{cfg.batch, 3, ls.h, ls.w});
    out.hr = Tensor(Shape4{cfg.batch, 3, hs.h, hs.w});
    for (int i = 0; i < cfg.batch; ++i) {
        check_same_shape(samples[std::size_t(i)].lr, samples[0].lr, "build_batch");
        check_same_shape(samples[std::size_t(i)].hr, samples[0].hr, "build_batch");
        std::memcpy(out.lr.plane(i, 0), samples[std::size_t(i)].lr.data.data(),
                    sizeof(real) * std::size_t(ls.elems()));
        std::memcpy(out.hr.plane(i, 0), samples[std::size_t(i)].hr.data.data(),
                    sizeof(real) * std::size_t(hs.elems()));
    }
    return out;
}

// Bounded hand-off queue between the batch-builder thread and the
// training loop. Capacity 2 keeps one batch in flight.
class BatchQueue {
public:
    /// False once the consumer has shut down (the producer should stop).
    bool push(Batch&& b) {
        std::unique_lock<std::mutex> lk(mu_);
        cv_room_.wait(lk, [&] { return q_.size() < 2 || stop_; });
        if (stop_) return false;
        q_.push_back(std::move(b));
        cv_data_.notify_one();
        return true;
    }

    void fail(std::exception_ptr e) {
        std::lock_guard<std::mutex> lk(mu_);
        err_ = e;
        cv_data_.notify_one();
    }

    Batch pop() {
        std::unique_lock<std::mutex> lk(mu_);
        cv_data_.wait(lk, [&] { return !q_.empty() || err_; });
        if (q_.empty() && err_) std::rethrow_exception(err_);
        Batch b = std::move(q_.front());
        q_.pop_front();
        cv_room_.notify_one();
        return b;
    }

    void shutdown() {
        std::lock_guard<std::mutex> lk(mu_);
        stop_ = true;
        cv_room_.notify_all();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_data_, cv_room_;
    std::deque<Batch> q_;
    std::exception_ptr err_;
    bool stop_ = false;
};

void dump_divergence(const Batch& batch, const TrainConfig& cfg, int k, int epoch, real lr,
                     real loss) {
    auto range = [](const Tensor& t) {
        real lo = t.data.empty() ? real(0) : t.data[0], hi = lo;
        for (real v : t.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return std::pair<real, real>{lo, hi};
    };
    const auto [llo, lhi] = range(batch.lr);
    const auto [hlo, hhi] = range(batch.hr);
    std::fprintf(stderr,
                 "training diverged: loss=%g at iteration %d (epoch %d, lr=%g, scale %s)\n"
                 "  batch lr range [%g, %g], hr range [%g, %g]\n",
                 double(loss), k + 1, epoch, double(lr), batch.scale.str().c_str(),
                 double(llo), double(lhi), double(hlo), double(hhi));
    if (!cfg.log_dir.empty()) {
        std::filesystem::create_directories(cfg.log_dir);
        Tensor one(Shape4{1, 3, batch.lr.shape.h, batch.lr.shape.w});
        std::memcpy(one.data.data(), batch.lr.plane(0, 0), sizeof(real) * one.data.size());
        const std::string p =
            (std::filesystem::path(cfg.log_dir) / "diverged_batch0_lr.ppm").string();
        save_image(tensor_to_image(one), p);
        std::fprintf(stderr, "  first LR patch written to %s\n", p.c_str());
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (iters_per_epoch <= 0) throw config_error("train: iters_per_epoch must be positive");
    if (epochs < 0) throw config_error("train: negative epoch count");
    if (lr0 <= 0) throw config_error("train: lr0 must be positive");
    if (lr_halving_period <= 0)
        throw config_error("train: lr_halving_period must be positive");
    if (warmup_epochs < 0) throw config_error("train: negative warmup_epochs");
    if (batch <= 0) throw config_error("train: batch must be positive");
    if (patch < 8) throw config_error("train: patch must be at least 8");
    if (clip_norm < 0) throw config_error("train: negative clip_norm");
    if (val_holdout < 0) throw config_error("train: negative val_holdout");
}

real lr_schedule(const TrainConfig& cfg, int epoch) {
    return cfg.lr0 * real(std::pow(0.5, double(epoch / cfg.lr_halving_period)));
}

const std::vector<ScalePair>& validation_scales() {
    static const std::vector<ScalePair> kScales = {
        {2, 2}, {real(1.5), real(1.5)}, {real(1.5), real(3.0)}};
    return kScales;
}

TrainLog train(ArbNet& model, const std::vector<Tensor>& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (int(corpus.size()) <= cfg.val_holdout)
        throw config_error("train: corpus has " + std::to_string(corpus.size()) +
                           " images but val_holdout is " + std::to_string(cfg.val_holdout));
    const std::vector<Tensor> train_images(corpus.begin(),
                                           corpus.end() - cfg.val_holdout);
    const std::vector<Tensor> val_images(corpus.end() - cfg.val_holdout, corpus.end());

    std::vector<Parameter*> params = model.parameters();
    TrainLog log;
    const int total = cfg.epochs * cfg.iters_per_epoch;

    BatchQueue queue;
    std::thread producer;
    if (cfg.prefetch && total > 0) {
        producer = std::thread([&]() {
            try {
                for (int k = 0; k < total; ++k)
                    if (!queue.push(build_batch(train_images, cfg, k))) break;
            } catch (...) {
                queue.fail(std::current_exception());
            }
        });
    }
    struct JoinGuard {
        BatchQueue& q;
        std::thread& t;
        ~JoinGuard() {
            q.shutdown();
            if (t.joinable()) t.join();
        }
    } guard{queue, producer};

    for (int k = 0; k < total; ++k) {
        const int epoch = k / cfg.iters_per_epoch;
        const real lr = lr_schedule(cfg, epoch);
        Batch batch = producer.joinable() ? queue.pop() : build_batch(train_images, cfg, k);

        ArbNet::Cache cache;
        Tensor pred = model.forward(batch.lr, batch.scale, &cache);
        const real loss = l1_loss(pred, batch.hr);
#ifdef ARBSR_TRAIN_TRACE
        // Allocation-free capture: anything that touches the heap here
        // perturbs the layout-sensitive bug this exists to observe.
        {
            auto fnv = [](const void* p, std::size_t n) {
                const unsigned char* b = static_cast<const unsigned char*>(p);
                std::uint64_t h = 1469598103934665603ull;
                for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
                return h;
            };
            if (k < kTraceCap) {
                g_trace[k].lr_hash = fnv(batch.lr.data.data(),
                                         batch.lr.data.size() * sizeof(real));
                g_trace[k].hr_hash = fnv(batch.hr.data.data(),
                                         batch.hr.data.size() * sizeof(real));
                g_trace[k].pred_hash = fnv(pred.data.data(),
                                           pred.data.size() * sizeof(real));
                g_trace[k].loss = double(loss);
                g_trace[k].lr_addr = (const void*)batch.lr.data.data();
                g_trace[k].pred_addr = (const void*)pred.data.data();
            }
        }
#endif
        if (!std::isfinite(double(loss))) {
            dump_divergence(batch, cfg, k, epoch, lr, loss);
            throw train_error("training diverged: non-finite loss at iteration " +
                              std::to_string(k + 1));
        }
        Tensor grad = l1_loss_backward(pred, batch.hr);
        model.backward(batch.lr, cache, grad);
#ifdef ARBSR_TRAIN_TRACE
        if (k < kTraceCap) {
            std::uint64_t h = 1469598103934665603ull;
            for (const Parameter* p : params)
                for (real v : p->grad.data) {
                    const unsigned char* b = (const unsigned char*)&v;
                    for (std::size_t i = 0; i < sizeof(real); ++i)
                        h = (h ^ b[i]) * 1099511628211ull;
                }
            g_trace[k].grad_hash = h;
            if (k == 0) {
                g_tp_count = 0;
                for (const Parameter* p : params) {
                    if (g_tp_count >= kTraceMaxParams) break;
                    std::uint64_t ph = 1469598103934665603ull;
                    for (real v : p->grad.data) {
                        const unsigned char* b = (const unsigned char*)&v;
                        for (std::size_t i = 0; i < sizeof(real); ++i)
                            ph = (ph ^ b[i]) * 1099511628211ull;
                    }
                    g_tp_name[g_tp_count] = p->name.c_str();
                    g_tp_grad[g_tp_count] = ph;
                    ++g_tp_count;
                }
            }
        }
#endif

        if (cfg.clip_norm > 0) {
            double sq = 0;
            for (const Parameter* p : params)
                for (real g : p->grad.data) sq += double(g) * double(g);
            const double norm = std::sqrt(sq);
            if (norm > double(cfg.clip_norm)) {
                const real f = real(double(cfg.clip_norm) / norm);
                for (Parameter* p : params)
                    for (real& g : p->grad.data) g *= f;
            }
        }
        adam_step(params, lr);
#ifdef ARBSR_TRAIN_TRACE
        if (k < kTraceCap) {
            std::uint64_t h = 1469598103934665603ull;
            for (const Parameter* p : params)
                for (real v : p->value.data) {
                    const unsigned char* b = (const unsigned char*)&v;
                    for (std::size_t i = 0; i < sizeof(real); ++i)
                        h = (h ^ b[i]) * 1099511628211ull;
                }
            g_trace[k].param_hash = h;
        }
#endif
        log.iters.push_back(TrainLog::IterRow{k + 1, epoch, loss, lr});

        const bool epoch_end = (k + 1) % cfg.iters_per_epoch == 0;
        if (epoch_end) {
            if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
            for (const ScalePair& s : validation_scales()) {
                if (val_images.empty()) break;
                const EvalResult r = evaluate_model(model, val_images, s, /*with_ssim=*/false);
                log.vals.push_back(TrainLog::ValRow{epoch, s.r_h, s.r_v, r.psnr});
            }
        }
    }

    // Covers the zero-epoch case too: the file then holds the init state.
    if (!cfg.checkpoint_path.empty()) save_checkpoint(model, cfg.checkpoint_path);
    if (!cfg.log_dir.empty()) write_train_logs(log, cfg.log_dir);
#ifdef ARBSR_TRAIN_TRACE
    for (int k = 0; k < total && k < kTraceCap; ++k)
        std::fprintf(stderr,
                     "TRACE k=%d lrh=%016llx hrh=%016llx predh=%016llx gradh=%016llx "
                     "parh=%016llx loss=%a lraddr=%p predaddr=%p\n",
                     k + 1, (unsigned long long)g_trace[k].lr_hash,
                     (unsigned long long)g_trace[k].hr_hash,
                     (unsigned long long)g_trace[k].pred_hash,
                     (unsigned long long)g_trace[k].grad_hash,
                     (unsigned long long)g_trace[k].param_hash, g_trace[k].loss,
                     g_trace[k].lr_addr, g_trace[k].pred_addr);
    for (int i = 0; i < g_tp_count; ++i)
        std::fprintf(stderr, "PGRAD %-40s %016llx\n", g_tp_name[i],
                     (unsigned long long)g_tp_grad[i]);
#endif
    return log;
}

void write_train_logs(const TrainLog& log, const std::string& dir) {
    std::filesystem::create_directories(dir);
    char line[128];

    std::ofstream tf(std::filesystem::path(dir) / "train_log.csv", std::ios::binary);
    if (!tf) throw io_error("cannot write train_log.csv under " + dir);
    tf << "iteration,epoch,loss,lr\n";
    for (const auto& r : log.iters) {
        std::snprintf(line, sizeof(line), "%d,%d,%.9e,%.9e\n", r.iteration, r.epoch,
                      double(r.loss), double(r.lr));
        tf << line;
    }

    std::ofstream vf(std::filesystem::path(dir) / "val_log.csv", std::ios::binary);
    if (!vf) throw io_error("cannot write val_log.csv under " + dir);
    vf << "epoch,r_h,r_v,psnr\n";
    for (const auto& r : log.vals) {
        std::snprintf(line, sizeof(line), "%d,%g,%g,%.6f\n", r.epoch, double(r.r_h),
                      double(r.r_v), double(r.psnr));
        vf << line;
    }
}

}  // namespace arbsr
