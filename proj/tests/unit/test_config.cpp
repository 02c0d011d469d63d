#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "mdrn/run_config.hpp"

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("mdrn_cfg_" + std::to_string(Catch::rngSeed()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("defaults mirror the documented schema", "[config]") {
    const mdrn::RunConfig cfg;
    CHECK(cfg.model.in_channels == 1);
    CHECK(cfg.model.channels == 64);
    CHECK(cfg.model.num_msabs == 8);
    CHECK(cfg.model.levels == 3);
    CHECK(cfg.model.tap_indices == std::vector<std::int64_t>{1, 2, 3});
    CHECK(cfg.train.epochs == 500);
    CHECK(cfg.train.steps_per_epoch == 1000);
    CHECK(cfg.train.batch == 16);
    CHECK(cfg.train.patch == 64);
    CHECK(cfg.train.lr0 == 1e-4);
    CHECK(cfg.train.halving_period == 100);
    CHECK(cfg.train.augment);
    CHECK(cfg.train.sigma.sigma == 25.0);
    CHECK(cfg.train.distill.mode == mdrn::DistillMode::None);
    CHECK(cfg.train.distill.kd_weight == 1.0);
}

TEST_CASE("config text parses values, comments, and whitespace", "[config]") {
    const std::string text =
        "# architecture\n"
        "model.channels = 16\n"
        "model.msab_per_msag=2   # inline comment\n"
        "model.taps = 1, 2\n"
        "\n"
        "train.lr0 = 5e-4\n"
        "train.augment = off\n"
        "noise.sigma = 50\n"
        "distill.mode = hmds\n"
        "paths.train_set = /data/train set\n";
    const auto cfg = mdrn::parse_config_text(text);
    CHECK(cfg.model.channels == 16);
    CHECK(cfg.model.num_msabs == 2);
    CHECK(cfg.model.tap_indices == std::vector<std::int64_t>{1, 2});
    CHECK(cfg.train.lr0 == 5e-4);
    CHECK_FALSE(cfg.train.augment);
    CHECK(cfg.train.sigma.sigma == 50.0);
    CHECK(cfg.train.distill.mode == mdrn::DistillMode::Hmds);
    CHECK(cfg.paths.train_set == "/data/train set");
}

TEST_CASE("unknown keys and malformed values fail fast", "[config]") {
    CHECK_THROWS_AS(mdrn::parse_config_text("model.width = 3\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("just a line\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("model.channels = many\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("train.lr0 = 1e-4x\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("train.augment = maybe\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("distill.mode = softlabel\n"), mdrn::ConfigError);
    CHECK_THROWS_AS(mdrn::parse_config_text("model.taps = \n"), mdrn::ConfigError);
}

TEST_CASE("overrides apply after the file and last one wins", "[config]") {
    mdrn::RunConfig cfg = mdrn::parse_config_text("train.epochs = 10\n");
    mdrn::apply_override(cfg, "train.epochs=20");
    mdrn::apply_override(cfg, "train.epochs=30");
    CHECK(cfg.train.epochs == 30);

    SECTION("bare aliases map to their dotted keys") {
        mdrn::apply_override(cfg, "epochs=7");
        mdrn::apply_override(cfg, "sigma=70");
        mdrn::apply_override(cfg, "lr0=0.01");
        CHECK(cfg.train.epochs == 7);
        CHECK(cfg.train.sigma.sigma == 70.0);
        CHECK(cfg.train.lr0 == 0.01);
    }
    SECTION("model keys keep their prefix") {
        mdrn::apply_override(cfg, "model.msab_per_msag=2");
        CHECK(cfg.model.num_msabs == 2);
        CHECK_THROWS_AS(mdrn::apply_override(cfg, "msab_per_msag=2"), mdrn::ConfigError);
    }
    SECTION("malformed override specs are rejected") {
        CHECK_THROWS_AS(mdrn::apply_override(cfg, "train.epochs"), mdrn::ConfigError);
        CHECK_THROWS_AS(mdrn::apply_override(cfg, "=5"), mdrn::ConfigError);
        CHECK_THROWS_AS(mdrn::apply_override(cfg, "nope=5"), mdrn::ConfigError);
    }
}

TEST_CASE("render and reparse reproduce the configuration exactly", "[config]") {
    mdrn::RunConfig cfg;
    cfg.model.channels = 12;
    cfg.model.tap_indices = {1, 3};
    cfg.model.levels = 3;
    cfg.train.lr0 = 0.1 + 0.2;  // forces full-precision float round trip
    cfg.train.sigma.sigma = 33.333333333333336;
    cfg.train.seed = 18446744073709551615ull % 1000003;
    cfg.paths.val_set = "relative/dir";

    const std::string text = mdrn::render_config(cfg);
    const auto back = mdrn::parse_config_text(text);
    CHECK(back.model.channels == cfg.model.channels);
    CHECK(back.model.tap_indices == cfg.model.tap_indices);
    CHECK(back.train.lr0 == cfg.train.lr0);
    CHECK(back.train.sigma.sigma == cfg.train.sigma.sigma);
    CHECK(back.train.seed == cfg.train.seed);
    CHECK(back.paths.val_set == cfg.paths.val_set);
    CHECK(mdrn::render_config(back) == text);
    CHECK(mdrn::config_hash(back) == mdrn::config_hash(cfg));
}

TEST_CASE("config hash tracks content, not identity", "[config]") {
    mdrn::RunConfig a, b;
    CHECK(mdrn::config_hash(a) == mdrn::config_hash(b));
    CHECK(mdrn::config_hash(a).size() == 12);
    b.train.seed = 1;
    CHECK(mdrn::config_hash(a) != mdrn::config_hash(b));
}

TEST_CASE("run root resolution follows config, env, fallback order", "[config]") {
    mdrn::RunConfig cfg;
    unsetenv("MDRN_RUN_ROOT");
    CHECK(mdrn::resolve_run_root(cfg) == "runs");
    setenv("MDRN_RUN_ROOT", "/tmp/from_env", 1);
    CHECK(mdrn::resolve_run_root(cfg) == "/tmp/from_env");
    cfg.paths.run_root = "/tmp/explicit";
    CHECK(mdrn::resolve_run_root(cfg) == "/tmp/explicit");
    unsetenv("MDRN_RUN_ROOT");
}

TEST_CASE("run directories are unique and carry the config echo", "[config]") {
    TempDir root;
    mdrn::RunConfig cfg;
    cfg.paths.run_root = root.path.string();

    const std::string d1 = mdrn::make_run_dir(cfg, "train");
    const std::string d2 = mdrn::make_run_dir(cfg, "train");
    CHECK(d1 != d2);
    CHECK(std::filesystem::exists(std::filesystem::path(d1) / "config.cfg"));
    CHECK(d1.find("train-") != std::string::npos);
    CHECK(d1.find(mdrn::config_hash(cfg)) != std::string::npos);

    std::ifstream echo(std::filesystem::path(d1) / "config.cfg");
    std::stringstream buf;
    buf << echo.rdbuf();
    const auto back = mdrn::parse_config_text(buf.str());
    CHECK(mdrn::config_hash(back) == mdrn::config_hash(cfg));
}

TEST_CASE("missing config file is a data error", "[config]") {
    CHECK_THROWS_AS(mdrn::load_config_file("/definitely/not/here.cfg"), mdrn::DataError);
}
