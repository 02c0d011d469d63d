#include <catch2/catch_amalgamated.hpp>

#include "mdrn/distill.hpp"
#include "mdrn/synthetic.hpp"
#include "support/gradcheck.hpp"

using mdrn::DistillConfig;
using mdrn::DistillMode;
using mdrn::ModelConfig;
using mdrn::Network;
using mdrn::RngStream;
using mdrn::Tensor;
using mdrn::Var;

namespace {

Var<double> offset_var(const Var<double>& base, double off, bool rg = false) {
    Tensor<double> t = base.value();
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] += off;
    return Var<double>(t, rg);
}

ModelConfig micro(std::int64_t blocks) {
    ModelConfig c;
    c.channels = 4;
    c.num_msabs = blocks;
    c.levels = 1;
    c.tap_indices = {1};
    return c;
}

}  // namespace

TEST_CASE("reconstruction loss is the mean absolute error", "[distill]") {
    RngStream rng(1);
    Var<double> clean(testsupport::random_tensor({1, 1, 2, 2}, rng), false);
    REQUIRE(mdrn::reconstruction_loss(clean, clean).value().item() == 0.0);

    auto shifted = offset_var(clean, 0.1);
    REQUIRE_THAT(mdrn::reconstruction_loss(shifted, clean).value().item(),
                 Catch::Matchers::WithinAbs(0.1, 1e-12));

    Var<double> other(testsupport::random_tensor({1, 1, 2, 2}, rng), false);
    double brute = 0;
    for (std::int64_t i = 0; i < 4; ++i) brute += std::abs(clean.value()[i] - other.value()[i]);
    REQUIRE_THAT(mdrn::reconstruction_loss(clean, other).value().item(),
                 Catch::Matchers::WithinAbs(brute / 4.0, 1e-12));
}

TEST_CASE("kd loss sums per-tap means", "[distill]") {
    RngStream rng(2);
    std::vector<Var<double>> taps, same, shifted;
    for (int i = 0; i < 3; ++i) {
        taps.emplace_back(testsupport::random_tensor({2, 4, 3, 3}, rng), false);
        same.push_back(taps.back());
        shifted.push_back(offset_var(taps.back(), 0.5));
    }
    REQUIRE(mdrn::kd_loss(taps, same).value().item() == 0.0);
    REQUIRE_THAT(mdrn::kd_loss(shifted, taps).value().item(), Catch::Matchers::WithinAbs(1.5, 1e-12));

    // Independent scalar oracle on random pairs.
    std::vector<Var<double>> a, b;
    double want = 0;
    for (int i = 0; i < 2; ++i) {
        a.emplace_back(testsupport::random_tensor({1, 2, 2, 2}, rng), false);
        b.emplace_back(testsupport::random_tensor({1, 2, 2, 2}, rng), false);
        double s = 0;
        for (std::int64_t k = 0; k < 8; ++k) s += std::abs(a.back().value()[k] - b.back().value()[k]);
        want += s / 8.0;
    }
    REQUIRE_THAT(mdrn::kd_loss(a, b).value().item(), Catch::Matchers::WithinAbs(want, 1e-12));

    REQUIRE_THROWS_AS(mdrn::kd_loss(a, taps), std::invalid_argument);
    const std::vector<Var<double>> none;
    REQUIRE_THROWS_AS(mdrn::kd_loss(none, none), std::invalid_argument);
}

TEST_CASE("kd loss is symmetric in value but one-sided in gradient", "[distill]") {
    RngStream rng(3);
    Var<double> s(testsupport::random_tensor({1, 2, 2, 2}, rng), true);
    Var<double> t(testsupport::random_tensor({1, 2, 2, 2}, rng), true);
    const double ab = mdrn::kd_loss<double>({s}, {t}).value().item();
    const double ba = mdrn::kd_loss<double>({t}, {s}).value().item();
    REQUIRE_THAT(ab, Catch::Matchers::WithinAbs(ba, 1e-12));

    s.zero_grad();
    t.zero_grad();
    mdrn::kd_loss<double>({s}, {t}).backward();
    double smag = 0, tmag = 0;
    for (std::int64_t i = 0; i < 8; ++i) {
        smag += std::abs(s.grad()[i]);
        tmag += std::abs(t.grad()[i]);
    }
    REQUIRE(smag > 0.0);
    REQUIRE(tmag == 0.0);  // detached inside the loss
}

TEST_CASE("total loss composes the two terms", "[distill]") {
    RngStream rng(4);
    Var<double> clean(testsupport::random_tensor({1, 1, 4, 4}, rng), false);
    Var<double> tap(testsupport::random_tensor({1, 4, 4, 4}, rng), false);

    DistillConfig none;
    auto plain = mdrn::total_loss(offset_var(clean, 0.2), clean, {}, {}, none);
    REQUIRE_THAT(plain.total.value().item(), Catch::Matchers::WithinAbs(plain.rl.value().item(), 1e-15));
    REQUIRE(plain.kd.value().item() == 0.0);

    DistillConfig hads;
    hads.mode = DistillMode::Hads;
    hads.student_sigma = hads.teacher_sigma = 50.0;
    auto perfect = mdrn::total_loss(clean, clean, {tap}, {tap}, hads);
    REQUIRE(perfect.total.value().item() == 0.0);

    // rl = 0.2 from the output offset, kd = 0.3 from a single-tap offset.
    auto both = mdrn::total_loss(offset_var(clean, 0.2), clean, {offset_var(tap, 0.3)}, {tap}, hads);
    REQUIRE_THAT(both.rl.value().item(), Catch::Matchers::WithinAbs(0.2, 1e-12));
    REQUIRE_THAT(both.kd.value().item(), Catch::Matchers::WithinAbs(0.3, 1e-12));
    REQUIRE_THAT(both.total.value().item(), Catch::Matchers::WithinAbs(0.5, 1e-12));

    hads.kd_weight = 0.25;
    auto weighted = mdrn::total_loss(offset_var(clean, 0.2), clean, {offset_var(tap, 0.3)}, {tap}, hads);
    REQUIRE_THAT(weighted.total.value().item(), Catch::Matchers::WithinAbs(0.2 + 0.25 * 0.3, 1e-12));

    REQUIRE_THROWS_AS(mdrn::total_loss(clean, clean, {tap}, {}, hads), mdrn::ConfigError);
}

TEST_CASE("both loss terms scale linearly with a shared offset", "[distill]") {
    RngStream rng(5);
    Var<double> clean(testsupport::random_tensor({1, 1, 4, 4}, rng), false);
    Var<double> tap(testsupport::random_tensor({1, 4, 4, 4}, rng), false);
    DistillConfig hads;
    hads.mode = DistillMode::Hads;
    hads.student_sigma = hads.teacher_sigma = 25.0;
    for (double alpha : {1.0, 2.0, 4.0}) {
        auto l = mdrn::total_loss(offset_var(clean, 0.05 * alpha), clean, {offset_var(tap, 0.02 * alpha)}, {tap}, hads);
        REQUIRE_THAT(l.rl.value().item(), Catch::Matchers::WithinAbs(0.05 * alpha, 1e-12));
        REQUIRE_THAT(l.kd.value().item(), Catch::Matchers::WithinAbs(0.02 * alpha, 1e-12));
    }
}

TEST_CASE("hads shares one noise draw, hmds draws independently", "[distill]") {
    Tensor<double> clean(4, 1, 16, 16, 0.5);

    DistillConfig hads;
    hads.mode = DistillMode::Hads;
    hads.student_sigma = hads.teacher_sigma = 50.0;
    RngStream r1(6);
    auto [s1, t1] = mdrn::make_distill_inputs(clean, hads, r1);
    REQUIRE(mdrn::max_abs_diff(s1, t1) == 0.0);
    REQUIRE(mdrn::stddev(s1 - clean) > 0.0);

    DistillConfig hmds;
    hmds.mode = DistillMode::Hmds;
    hmds.student_sigma = 70.0;
    hmds.teacher_sigma = 50.0;
    RngStream r2(7);
    auto [s2, t2] = mdrn::make_distill_inputs(clean, hmds, r2);
    REQUIRE(mdrn::max_abs_diff(s2, t2) > 0.0);
    REQUIRE_THAT(mdrn::stddev(s2 - clean), Catch::Matchers::WithinAbs(70.0 / 255.0, 0.01));
    REQUIRE_THAT(mdrn::stddev(t2 - clean), Catch::Matchers::WithinAbs(50.0 / 255.0, 0.01));

    // Independence: the two realizations are uncorrelated.
    double dot = 0;
    const auto ns = s2 - clean, nt = t2 - clean;
    for (std::int64_t i = 0; i < ns.size(); ++i) dot += ns[i] * nt[i];
    dot /= static_cast<double>(ns.size()) * mdrn::stddev(ns) * mdrn::stddev(nt);
    REQUIRE(std::abs(dot) < 0.1);

    // Determinism under a fixed stream.
    RngStream r3(7);
    auto [s3, t3] = mdrn::make_distill_inputs(clean, hmds, r3);
    REQUIRE(mdrn::max_abs_diff(s2, s3) == 0.0);
    REQUIRE(mdrn::max_abs_diff(t2, t3) == 0.0);
}

TEST_CASE("config invariants reject bad pairings", "[distill]") {
    DistillConfig bad;
    bad.mode = DistillMode::Hmds;
    bad.student_sigma = 50.0;
    bad.teacher_sigma = 50.0;  // must be strictly lower
    REQUIRE_THROWS_AS(bad.validate(), mdrn::ConfigError);
    Tensor<double> clean(1, 1, 8, 8, 0.5);
    RngStream rng(8);
    REQUIRE_THROWS_AS(mdrn::make_distill_inputs(clean, bad, rng), mdrn::ConfigError);

    DistillConfig hads;
    hads.mode = DistillMode::Hads;
    hads.student_sigma = 25.0;
    hads.teacher_sigma = 50.0;  // must match
    REQUIRE_THROWS_AS(hads.validate(), mdrn::ConfigError);

    hads.teacher_sigma = 25.0;
    REQUIRE_NOTHROW(hads.validate());
    REQUIRE_THROWS_AS(hads.validate_pair(micro(1), micro(1)), mdrn::ConfigError);   // teacher not deeper
    REQUIRE_NOTHROW(hads.validate_pair(micro(2), micro(1)));

    DistillConfig hmds;
    hmds.mode = DistillMode::Hmds;
    hmds.student_sigma = 50.0;
    hmds.teacher_sigma = 25.0;
    REQUIRE_THROWS_AS(hmds.validate_pair(micro(2), micro(1)), mdrn::ConfigError);   // shapes must match
    REQUIRE_NOTHROW(hmds.validate_pair(micro(1), micro(1)));

    ModelConfig wide = micro(2);
    wide.channels = 8;
    REQUIRE_THROWS_AS(hads.validate_pair(wide, micro(1)), mdrn::ConfigError);       // backbone differs
}

TEST_CASE("no gradient ever reaches a frozen teacher", "[distill]") {
    ModelConfig sc = micro(1), tc = micro(2);
    Network<double> student(sc, 31);
    Network<double> teacher(tc, 32);
    teacher.freeze();

    DistillConfig cfg;
    cfg.mode = DistillMode::Hads;
    cfg.student_sigma = cfg.teacher_sigma = 25.0;

    Tensor<double> clean = mdrn::synthetic_natural_image(8, 8, 33);
    RngStream rng(34);
    auto [sin, tin] = mdrn::make_distill_inputs(clean, cfg, rng);

    auto st = student.forward(Var<double>(sin, false));
    auto tt = teacher.forward(Var<double>(tin, false));
    student.zero_grad();
    teacher.zero_grad();
    auto loss = mdrn::total_loss(st.output, Var<double>(clean, false), st.taps, tt.taps, cfg);
    loss.total.backward();

    double teacher_mag = 0, student_mag = 0;
    for (const auto& p : teacher.parameters())
        for (std::int64_t i = 0; i < p.var.grad().size(); ++i) teacher_mag += std::abs(p.var.grad()[i]);
    for (const auto& p : student.parameters())
        for (std::int64_t i = 0; i < p.var.grad().size(); ++i) student_mag += std::abs(p.var.grad()[i]);
    REQUIRE(teacher_mag == 0.0);
    REQUIRE(student_mag > 0.0);
}

TEST_CASE("teacher equal to the student gives exactly zero kd loss", "[distill]") {
    // Same architecture, same weights, same input: the taps coincide, so the
    // distillation term vanishes at step zero.
    ModelConfig c = micro(1);
    Network<double> student(c, 41);
    Network<double> teacher(c, 42);
    teacher.copy_parameters_from(student);
    teacher.freeze();

    Tensor<double> clean = mdrn::synthetic_natural_image(8, 8, 43);
    RngStream rng(44);
    Tensor<double> noisy = mdrn::add_awgn(clean, mdrn::NoiseSpec{25.0}, rng);

    auto st = student.forward(Var<double>(noisy, false));
    auto tt = teacher.forward(Var<double>(noisy, false));
    REQUIRE(mdrn::kd_loss(st.taps, tt.taps).value().item() == 0.0);
}
