#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mdrn/checkpoint.hpp"
#include "mdrn/corpus.hpp"
#include "mdrn/distill.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/infer.hpp"
#include "mdrn/metrics.hpp"
#include "mdrn/model.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/optimizer.hpp"
#include "mdrn/patches.hpp"
#include "mdrn/rng.hpp"

namespace mdrn {

struct TrainConfig {
    std::int64_t epochs = 500;
    std::int64_t steps_per_epoch = 1000;
    std::int64_t batch = 16;
    std::int64_t patch = 64;
    double lr0 = 1e-4;
    std::int64_t halving_period = 100;
    std::uint64_t seed = 0;
    bool augment = true;
    NoiseSpec sigma{};
    DistillConfig distill{};

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (steps_per_epoch < 1) throw ConfigError("train: steps_per_epoch must be >= 1");
        if (batch < 1) throw ConfigError("train: batch must be >= 1");
        if (patch < 1) throw ConfigError("train: patch must be >= 1");
        if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ConfigError("train: lr0 must be positive and finite");
        if (halving_period < 1) throw ConfigError("train: halving_period must be >= 1");
        sigma.validate();
        distill.validate();
    }

    /// Noise level the student sees: plain runs use sigma, distillation
    /// runs use the student side of the distill config.
    double operating_sigma() const {
        return distill.mode == DistillMode::None ? sigma.sigma : distill.student_sigma;
    }
};

/// Piecewise-constant schedule: lr0 halved once per halving_period epochs.
/// Scaling by exact powers of two keeps the reference value sequence bit-exact.
inline double lr_at(std::int64_t epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) {
        throw std::invalid_argument("lr_at: epoch " + std::to_string(epoch) + " outside [0, " +
                                    std::to_string(cfg.epochs) + ")");
    }
    return std::ldexp(cfg.lr0, -static_cast<int>(epoch / cfg.halving_period));
}

struct StepRecord {
    std::int64_t epoch = 0;
    std::int64_t step = 0;
    double rl = 0.0;
    double kd = 0.0;
    double total = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

/// Single-loop trainer covering plain runs and both distillation regimes.
/// All randomness is derived statelessly from (seed, epoch, step), so a
/// resumed run replays the exact trajectory of an uninterrupted one.
class Trainer {
public:
    struct Options {
        const LoadedCorpus* train = nullptr;
        const LoadedCorpus* val = nullptr;
        Network<double>* teacher = nullptr;
        std::string run_dir;  // empty: keep everything in memory, write no files
        std::function<void(const StepRecord&)> on_step;
        std::function<void(const EpochStats&)> on_epoch;
    };

    Trainer(Network<double>& model, TrainConfig cfg, Options opt)
        : model_(model), cfg_(std::move(cfg)), opt_(std::move(opt)), adam_(model.parameters()) {
        cfg_.validate();
        if (!opt_.train) throw ConfigError("trainer: no training corpus");
        if (cfg_.distill.mode != DistillMode::None) {
            if (!opt_.teacher) throw ConfigError("trainer: distillation enabled but no teacher model");
            cfg_.distill.validate_pair(opt_.teacher->config(), model_.config());
            opt_.teacher->freeze();
        } else if (opt_.teacher) {
            throw ConfigError("trainer: teacher model supplied but distillation is off");
        }
        const auto pool = eligible_images(*opt_.train, cfg_.patch);
        if (pool.empty()) {
            throw DataError("trainer: no training image is at least " + std::to_string(cfg_.patch) + "x" +
                            std::to_string(cfg_.patch));
        }
        if (pool.size() < opt_.train->images.size()) {
            std::cerr << "warning: " << (opt_.train->images.size() - pool.size()) << " of "
                      << opt_.train->images.size() << " training images are smaller than the patch size and were skipped\n";
        }
        if (!opt_.run_dir.empty()) {
            std::filesystem::create_directories(opt_.run_dir);
            log_.open(std::filesystem::path(opt_.run_dir) / "train_log.jsonl", std::ios::app);
            if (!log_) throw DataError("trainer: cannot open train_log.jsonl under " + opt_.run_dir);
        }
    }

    /// Restores weights, optimizer state, and history; training continues
    /// at the epoch after the checkpointed one.
    void resume(const CheckpointData& ckpt) {
        if (ckpt.seed != cfg_.seed) {
            throw ConfigError("resume: checkpoint was trained with seed " + std::to_string(ckpt.seed) +
                              ", config says " + std::to_string(cfg_.seed));
        }
        apply_checkpoint(model_, ckpt);
        if (ckpt.has_optimizer) apply_optimizer_state(adam_, ckpt);
        history_ = ckpt.history;
        next_epoch_ = ckpt.epoch + 1;
        best_val_psnr_ = -std::numeric_limits<double>::infinity();
        for (const auto& h : history_) {
            if (std::isfinite(h.val_psnr) && h.val_psnr > best_val_psnr_) best_val_psnr_ = h.val_psnr;
        }
    }

    /// Runs every remaining epoch. Throws TrainingError on non-finite loss.
    void run() {
        while (next_epoch_ < cfg_.epochs) run_one_epoch();
    }

    void run_one_epoch() {
        const std::int64_t epoch = next_epoch_;
        if (epoch >= cfg_.epochs) throw ConfigError("trainer: all configured epochs already completed");
        const double lr = lr_at(epoch, cfg_);
        double sum_rl = 0.0;
        double sum_kd = 0.0;
        for (std::int64_t step = 0; step < cfg_.steps_per_epoch; ++step) {
            const StepRecord rec = train_step(epoch, step, lr);
            sum_rl += rec.rl;
            sum_kd += rec.kd;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_rl = sum_rl / static_cast<double>(cfg_.steps_per_epoch);
        stats.mean_kd = sum_kd / static_cast<double>(cfg_.steps_per_epoch);
        stats.lr = lr;
        if (opt_.val) stats.val_psnr = validation_psnr();
        history_.push_back(stats);
        next_epoch_ = epoch + 1;

        if (!opt_.run_dir.empty()) {
            const auto dir = std::filesystem::path(opt_.run_dir);
            save_checkpoint((dir / "last.ckpt").string(), model_, epoch, cfg_.seed, history_, &adam_);
            if (opt_.val && stats.val_psnr >= best_val_psnr_) {
                best_val_psnr_ = stats.val_psnr;
                save_checkpoint((dir / "best.ckpt").string(), model_, epoch, cfg_.seed, history_, &adam_);
            }
        } else if (opt_.val && stats.val_psnr >= best_val_psnr_) {
            best_val_psnr_ = stats.val_psnr;
        }
        if (opt_.on_epoch) opt_.on_epoch(stats);
    }

    const std::vector<EpochStats>& history() const { return history_; }
    std::int64_t next_epoch() const { return next_epoch_; }
    Adam<double>& optimizer() { return adam_; }
    const TrainConfig& config() const { return cfg_; }

private:
    StepRecord train_step(std::int64_t epoch, std::int64_t step, double lr) {
        const auto t0 = std::chrono::steady_clock::now();
        RngStream rng = RngStream::derive(cfg_.seed, {RngStream::hash_label("step"),
                                                      static_cast<std::uint64_t>(epoch),
                                                      static_cast<std::uint64_t>(step)});

        LossBreakdown<double> loss;
        if (cfg_.distill.mode == DistillMode::None) {
            const PatchBatch batch =
                sample_patches(*opt_.train, cfg_.batch, cfg_.patch, cfg_.sigma, cfg_.augment, rng);
            const Var<double> noisy(batch.noisy, false);
            const Var<double> clean(batch.clean, false);
            const auto trace = model_.forward(noisy);
            loss = total_loss(trace.output, clean, trace.taps, {}, cfg_.distill);
        } else {
            const PatchBatch batch =
                sample_patches(*opt_.train, cfg_.batch, cfg_.patch, NoiseSpec{0.0}, cfg_.augment, rng);
            auto inputs = make_distill_inputs(batch.clean, cfg_.distill, rng);
            const Var<double> clean(batch.clean, false);
            const auto teacher_trace = opt_.teacher->forward(Var<double>(std::move(inputs.second), false));
            const auto student_trace = model_.forward(Var<double>(std::move(inputs.first), false));
            loss = total_loss(student_trace.output, clean, student_trace.taps, teacher_trace.taps, cfg_.distill);
        }

        StepRecord rec;
        rec.epoch = epoch;
        rec.step = step;
        rec.rl = loss.rl.value().item();
        rec.kd = loss.kd.value().item();
        rec.total = loss.total.value().item();
        rec.lr = lr;
        if (!std::isfinite(rec.total)) {
            throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                std::to_string(step) + " (rl=" + std::to_string(rec.rl) +
                                ", kd=" + std::to_string(rec.kd) + ")");
        }

        adam_.zero_grad();
        loss.total.backward();
        adam_.step(lr);

        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (log_.is_open()) {
            nlohmann::json line{{"epoch", rec.epoch}, {"step", rec.step}, {"rl", rec.rl},
                                {"kd", rec.kd},       {"lr", rec.lr},     {"wall_ms", rec.wall_ms}};
            log_ << line.dump() << '\n';
            log_.flush();
        }
        if (opt_.on_step) opt_.on_step(rec);
        return rec;
    }

    /// Mean PSNR over the validation set at the operating sigma. Noise is
    /// derived from (seed, image index) only, so every epoch scores the
    /// same degraded images and best-checkpoint selection is stable.
    double validation_psnr() const {
        const NoiseSpec spec{cfg_.operating_sigma()};
        double sum = 0.0;
        for (std::size_t i = 0; i < opt_.val->images.size(); ++i) {
            RngStream rng = RngStream::derive(cfg_.seed, {RngStream::hash_label("val"),
                                                          static_cast<std::uint64_t>(i)});
            const Tensor<double>& clean = opt_.val->images[i];
            const Tensor<double> noisy = add_awgn(clean, spec, rng);
            sum += psnr(denoise_image(model_, noisy), clean);
        }
        return sum / static_cast<double>(opt_.val->images.size());
    }

    Network<double>& model_;
    TrainConfig cfg_;
    Options opt_;
    Adam<double> adam_;
    std::vector<EpochStats> history_;
    std::int64_t next_epoch_ = 0;
    double best_val_psnr_ = -std::numeric_limits<double>::infinity();
    std::ofstream log_;
};

}  // namespace mdrn
