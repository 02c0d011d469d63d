#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mdrn/checkpoint.hpp"
#include "mdrn/corpus.hpp"
#include "mdrn/model.hpp"
#include "mdrn/optimizer.hpp"
#include "mdrn/synthetic.hpp"
#include "mdrn/trainer.hpp"

namespace {

mdrn::ModelConfig micro_config(std::int64_t blocks = 1) {
    mdrn::ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.channels = 4;
    cfg.num_msabs = blocks;
    cfg.levels = 1;
    cfg.tap_indices = {1};
    return cfg;
}

mdrn::LoadedCorpus tiny_corpus(std::int64_t n, std::int64_t side, std::uint64_t seed) {
    mdrn::LoadedCorpus corpus;
    corpus.channels = 1;
    for (std::int64_t i = 0; i < n; ++i) {
        corpus.ids.push_back("img" + std::to_string(i));
        corpus.images.push_back(mdrn::synthetic_natural_image(side, side, seed + static_cast<std::uint64_t>(i)));
    }
    return corpus;
}

mdrn::TrainConfig quick_train_config(std::int64_t epochs, std::int64_t steps) {
    mdrn::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.steps_per_epoch = steps;
    cfg.batch = 2;
    cfg.patch = 8;
    cfg.lr0 = 1e-3;
    cfg.halving_period = 100;
    cfg.seed = 77;
    cfg.sigma = mdrn::NoiseSpec{25.0};
    return cfg;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mdrn_trainer_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("learning rate schedule matches the reference halving points", "[trainer]") {
    mdrn::TrainConfig cfg;
    cfg.epochs = 500;
    cfg.lr0 = 1e-4;
    cfg.halving_period = 100;

    CHECK(mdrn::lr_at(0, cfg) == 1e-4);
    CHECK(mdrn::lr_at(99, cfg) == 1e-4);
    CHECK(mdrn::lr_at(100, cfg) == 5e-5);
    CHECK(mdrn::lr_at(200, cfg) == 2.5e-5);
    CHECK(mdrn::lr_at(300, cfg) == 1.25e-5);
    CHECK(mdrn::lr_at(499, cfg) == 6.25e-6);

    std::set<double> distinct;
    double prev = cfg.lr0;
    for (std::int64_t e = 0; e < cfg.epochs; ++e) {
        const double lr = mdrn::lr_at(e, cfg);
        CHECK(lr <= prev);
        prev = lr;
        distinct.insert(lr);
    }
    CHECK(distinct.size() == 5);

    CHECK_THROWS_AS(mdrn::lr_at(-1, cfg), std::invalid_argument);
    CHECK_THROWS_AS(mdrn::lr_at(500, cfg), std::invalid_argument);
}

TEST_CASE("adam step matches a hand-computed oracle over several steps", "[trainer]") {
    mdrn::Tensor<double> w0(1, 1, 1, 2);
    w0.vec() = {1.0, -2.0};
    mdrn::Var<double> p(w0, true);
    mdrn::Adam<double> adam({{"w", p}});

    const double b1 = 0.9, b2 = 0.999, eps = 1e-8, lr = 0.1;
    std::vector<double> w = {1.0, -2.0}, m = {0.0, 0.0}, v = {0.0, 0.0};
    const std::vector<std::vector<double>> grads = {{0.5, -1.0}, {-0.25, 0.75}, {1.5, 0.0}};

    for (std::size_t t = 0; t < grads.size(); ++t) {
        p.zero_grad();
        p.grad().vec() = grads[t];
        adam.step(lr);
        for (std::size_t k = 0; k < 2; ++k) {
            const double g = grads[t][k];
            m[k] = b1 * m[k] + (1 - b1) * g;
            v[k] = b2 * v[k] + (1 - b2) * g * g;
            const double mhat = m[k] / (1 - std::pow(b1, double(t + 1)));
            const double vhat = v[k] / (1 - std::pow(b2, double(t + 1)));
            w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        CHECK_THAT(p.value().vec()[0], Catch::Matchers::WithinRel(w[0], 1e-14));
        CHECK_THAT(p.value().vec()[1], Catch::Matchers::WithinAbs(w[1], 1e-14));
    }
    CHECK(adam.step_count() == 3);
    CHECK_THROWS_AS(adam.step(0.0), std::invalid_argument);
}

TEST_CASE("adam bias correction follows the restored step count", "[trainer]") {
    auto make = [] {
        mdrn::Tensor<double> t(1, 1, 1, 1);
        t.vec() = {1.0};
        return mdrn::Var<double>(t, true);
    };
    mdrn::Var<double> a = make(), b = make();
    mdrn::Adam<double> fresh({{"w", a}});
    mdrn::Adam<double> warm({{"w", b}});
    warm.set_step_count(500);

    a.grad().vec() = {0.1};
    b.grad().vec() = {0.1};
    fresh.step(0.01);
    warm.step(0.01);
    // At t=1 the corrections cancel exactly; at t=501 they no longer do.
    CHECK(a.value().vec()[0] != b.value().vec()[0]);
    CHECK(warm.step_count() == 501);
    CHECK_THROWS_AS(warm.set_step_count(-1), std::invalid_argument);
}

TEST_CASE("checkpoint round trip preserves weights, optimizer, and metadata", "[trainer]") {
    TempDir dir;
    mdrn::Network<double> net(micro_config(), 11);
    mdrn::Adam<double> adam(net.parameters());

    mdrn::RngStream rng(5);
    for (int s = 0; s < 3; ++s) {
        for (auto& p : net.parameters()) {
            p.var.zero_grad();
            for (auto& g : p.var.grad().vec()) g = 0.1 * rng.normal();
        }
        adam.step(1e-3);
    }

    std::vector<mdrn::EpochStats> history;
    history.push_back({0, 0.5, 0.25, 1e-4, 31.7});
    history.push_back({1, 0.4, 0.2, 1e-4, std::numeric_limits<double>::quiet_NaN()});

    const std::string path = (dir.path / "net.ckpt").string();
    mdrn::save_checkpoint(path, net, 1, 42, history, &adam);
    const mdrn::CheckpointData ckpt = mdrn::load_checkpoint(path);

    CHECK(ckpt.epoch == 1);
    CHECK(ckpt.seed == 42);
    CHECK(ckpt.model.channels == 4);
    CHECK(ckpt.model.tap_indices == std::vector<std::int64_t>{1});
    REQUIRE(ckpt.history.size() == 2);
    CHECK(ckpt.history[0].val_psnr == 31.7);
    CHECK(std::isnan(ckpt.history[1].val_psnr));
    CHECK(ckpt.has_optimizer);
    CHECK(ckpt.adam_step_count == 3);
    CHECK(ckpt.weights_sha256 == mdrn::weights_hash(net));

    mdrn::Network<double> restored(micro_config(), 999);
    mdrn::apply_checkpoint(restored, ckpt);
    CHECK(mdrn::weights_payload(restored) == mdrn::weights_payload(net));

    mdrn::Adam<double> restored_adam(restored.parameters());
    mdrn::apply_optimizer_state(restored_adam, ckpt);
    CHECK(restored_adam.step_count() == 3);
    for (std::size_t i = 0; i < adam.slots().size(); ++i) {
        CHECK(restored_adam.slots()[i].m.vec() == adam.slots()[i].m.vec());
        CHECK(restored_adam.slots()[i].v.vec() == adam.slots()[i].v.vec());
    }

    // Saving the restored state reproduces the weight payload byte for byte.
    const std::string path2 = (dir.path / "net2.ckpt").string();
    mdrn::save_checkpoint(path2, restored, 1, 42, ckpt.history, &restored_adam);
    const mdrn::CheckpointData again = mdrn::load_checkpoint(path2);
    CHECK(again.weights_sha256 == ckpt.weights_sha256);
}

TEST_CASE("corrupt or mismatched checkpoints are rejected", "[trainer]") {
    TempDir dir;
    mdrn::Network<double> net(micro_config(), 3);
    const std::string path = (dir.path / "net.ckpt").string();
    mdrn::save_checkpoint(path, net, 0, 1, {});

    SECTION("bad magic") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.write("XXXXXXXX", 8);
        f.close();
        CHECK_THROWS_AS(mdrn::load_checkpoint(path), mdrn::DataError);
    }
    SECTION("flipped payload byte breaks the hash") {
        const auto size = std::filesystem::file_size(path);
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekg(static_cast<std::streamoff>(size) - 9);
        char c;
        f.get(c);
        f.seekp(static_cast<std::streamoff>(size) - 9);
        f.put(static_cast<char>(c ^ 0x40));
        f.close();
        CHECK_THROWS_AS(mdrn::load_checkpoint(path), mdrn::DataError);
    }
    SECTION("truncated payload") {
        const auto size = std::filesystem::file_size(path);
        std::filesystem::resize_file(path, size - 16);
        CHECK_THROWS_AS(mdrn::load_checkpoint(path), mdrn::DataError);
    }
    SECTION("architecture mismatch on apply") {
        const mdrn::CheckpointData ckpt = mdrn::load_checkpoint(path);
        mdrn::ModelConfig other = micro_config();
        other.channels = 6;
        mdrn::Network<double> wrong(other, 3);
        CHECK_THROWS_AS(mdrn::apply_checkpoint(wrong, ckpt), mdrn::ConfigError);
    }
    SECTION("missing file") { CHECK_THROWS_AS(mdrn::load_checkpoint((dir.path / "nope.ckpt").string()), mdrn::DataError); }
}

TEST_CASE("fifty step rerun reproduces losses and weights exactly", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(2, 24, 900);
    const mdrn::TrainConfig cfg = quick_train_config(1, 50);

    auto run = [&](std::vector<double>& losses) {
        mdrn::Network<double> net(micro_config(), 123);
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        opt.on_step = [&](const mdrn::StepRecord& r) { losses.push_back(r.total); };
        mdrn::Trainer trainer(net, cfg, opt);
        trainer.run();
        return mdrn::weights_hash(net);
    };

    std::vector<double> first, second;
    const std::string h1 = run(first);
    const std::string h2 = run(second);
    REQUIRE(first.size() == 50);
    CHECK(first == second);
    CHECK(h1 == h2);
    CHECK(std::isfinite(first.back()));
}

TEST_CASE("resuming from a checkpoint continues the exact trajectory", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(2, 24, 901);
    const mdrn::TrainConfig cfg = quick_train_config(2, 5);

    std::vector<double> uninterrupted;
    {
        mdrn::Network<double> net(micro_config(), 55);
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        opt.on_step = [&](const mdrn::StepRecord& r) { uninterrupted.push_back(r.total); };
        mdrn::Trainer trainer(net, cfg, opt);
        trainer.run();
    }

    TempDir dir;
    std::vector<double> before, after;
    {
        mdrn::Network<double> net(micro_config(), 55);
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        opt.run_dir = dir.path.string();
        opt.on_step = [&](const mdrn::StepRecord& r) { before.push_back(r.total); };
        mdrn::Trainer trainer(net, cfg, opt);
        trainer.run_one_epoch();
    }
    {
        mdrn::Network<double> net(micro_config(), 424242);  // deliberately different init
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        opt.on_step = [&](const mdrn::StepRecord& r) { after.push_back(r.total); };
        mdrn::Trainer trainer(net, cfg, opt);
        trainer.resume(mdrn::load_checkpoint((dir.path / "last.ckpt").string()));
        CHECK(trainer.next_epoch() == 1);
        trainer.run();
    }

    REQUIRE(uninterrupted.size() == 10);
    REQUIRE(before.size() == 5);
    REQUIRE(after.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(before[i] == uninterrupted[i]);
        CHECK(after[i] == uninterrupted[5 + i]);
    }

    mdrn::TrainConfig other = cfg;
    other.seed = cfg.seed + 1;
    mdrn::Network<double> net(micro_config(), 55);
    mdrn::Trainer::Options opt;
    opt.train = &corpus;
    mdrn::Trainer trainer(net, other, opt);
    CHECK_THROWS_AS(trainer.resume(mdrn::load_checkpoint((dir.path / "last.ckpt").string())), mdrn::ConfigError);
}

TEST_CASE("non-finite loss aborts with a training error", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(1, 16, 902);
    mdrn::Network<double> net(micro_config(), 9);
    net.parameters()[0].var.value().vec()[0] = std::numeric_limits<double>::infinity();

    mdrn::Trainer::Options opt;
    opt.train = &corpus;
    mdrn::Trainer trainer(net, quick_train_config(1, 1), opt);
    CHECK_THROWS_AS(trainer.run(), mdrn::TrainingError);
}

TEST_CASE("distillation training leaves the teacher untouched", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(2, 24, 903);

    mdrn::Network<double> teacher(micro_config(2), 31);
    mdrn::Network<double> student(micro_config(1), 32);
    const std::string teacher_before = mdrn::weights_hash(teacher);
    const std::string student_before = mdrn::weights_hash(student);

    mdrn::TrainConfig cfg = quick_train_config(1, 3);
    cfg.distill.mode = mdrn::DistillMode::Hads;
    cfg.distill.student_sigma = 25.0;
    cfg.distill.teacher_sigma = 25.0;

    std::vector<mdrn::StepRecord> steps;
    mdrn::Trainer::Options opt;
    opt.train = &corpus;
    opt.teacher = &teacher;
    opt.on_step = [&](const mdrn::StepRecord& r) { steps.push_back(r); };
    mdrn::Trainer trainer(student, cfg, opt);
    trainer.run();

    CHECK(mdrn::weights_hash(teacher) == teacher_before);
    CHECK(mdrn::weights_hash(student) != student_before);
    REQUIRE(steps.size() == 3);
    for (const auto& r : steps) {
        CHECK(r.kd > 0.0);
        CHECK(r.total == r.rl + r.kd);
    }
}

TEST_CASE("trainer rejects inconsistent teacher wiring", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(1, 16, 904);
    mdrn::Network<double> student(micro_config(), 1);
    mdrn::Network<double> teacher(micro_config(2), 2);

    SECTION("teacher without distillation") {
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        opt.teacher = &teacher;
        CHECK_THROWS_AS(mdrn::Trainer(student, quick_train_config(1, 1), opt), mdrn::ConfigError);
    }
    SECTION("distillation without teacher") {
        mdrn::TrainConfig cfg = quick_train_config(1, 1);
        cfg.distill.mode = mdrn::DistillMode::Hads;
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        CHECK_THROWS_AS(mdrn::Trainer(student, cfg, opt), mdrn::ConfigError);
    }
    SECTION("no corpus") {
        mdrn::Trainer::Options opt;
        CHECK_THROWS_AS(mdrn::Trainer(student, quick_train_config(1, 1), opt), mdrn::ConfigError);
    }
    SECTION("patch larger than every image") {
        mdrn::TrainConfig cfg = quick_train_config(1, 1);
        cfg.patch = 64;
        mdrn::Trainer::Options opt;
        opt.train = &corpus;
        CHECK_THROWS_AS(mdrn::Trainer(student, cfg, opt), mdrn::DataError);
    }
}

TEST_CASE("validation drives best checkpoint selection", "[trainer]") {
    const mdrn::LoadedCorpus corpus = tiny_corpus(2, 24, 905);
    const mdrn::LoadedCorpus val = tiny_corpus(1, 16, 906);
    TempDir dir;

    mdrn::Network<double> net(micro_config(), 8);
    mdrn::Trainer::Options opt;
    opt.train = &corpus;
    opt.val = &val;
    opt.run_dir = dir.path.string();
    mdrn::Trainer trainer(net, quick_train_config(1, 2), opt);
    trainer.run();

    REQUIRE(trainer.history().size() == 1);
    CHECK(std::isfinite(trainer.history()[0].val_psnr));
    CHECK(std::filesystem::exists(dir.path / "last.ckpt"));
    CHECK(std::filesystem::exists(dir.path / "best.ckpt"));
    CHECK(std::filesystem::exists(dir.path / "train_log.jsonl"));

    const mdrn::CheckpointData best = mdrn::load_checkpoint((dir.path / "best.ckpt").string());
    CHECK(best.epoch == 0);
    REQUIRE(best.history.size() == 1);
    CHECK(best.history[0].val_psnr == trainer.history()[0].val_psnr);
}
