// Command-line surface for the denoising toolkit: training, distillation,
// inference, evaluation, degradation analysis, and parameter reporting.
// Results go to stdout; diagnostics and progress go to stderr.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 training abort.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mdrn/bicubic.hpp"
#include "mdrn/checkpoint.hpp"
#include "mdrn/corpus.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/evaluate.hpp"
#include "mdrn/image_io.hpp"
#include "mdrn/infer.hpp"
#include "mdrn/metrics.hpp"
#include "mdrn/model.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/run_config.hpp"
#include "mdrn/trainer.hpp"

namespace {

mdrn::RunConfig effective_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    mdrn::RunConfig cfg;
    if (!config_path.empty()) cfg = mdrn::load_config_file(config_path);
    for (const auto& o : overrides) mdrn::apply_override(cfg, o);
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

mdrn::LoadedCorpus load_set(const std::string& path, std::int64_t channels, const char* what) {
    const auto manifest = mdrn::resolve_corpus(path);
    std::vector<std::string> skipped;
    auto corpus = mdrn::load_corpus(manifest, channels, &skipped);
    for (const auto& s : skipped) std::cerr << "warning: skipped " << what << " image: " << s << "\n";
    return corpus;
}

std::string human_count(std::int64_t n) {
    char buf[32];
    if (n >= 1000000) {
        std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(n) / 1e6);
    } else if (n >= 1000) {
        std::snprintf(buf, sizeof(buf), "%.0fK", static_cast<double>(n) / 1e3);
    } else {
        std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(n));
    }
    return buf;
}

std::vector<double> parse_double_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw mdrn::ConfigError(std::string(flag) + ": '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw mdrn::ConfigError(std::string(flag) + ": empty list");
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& text, const char* flag) {
    std::vector<std::int64_t> out;
    for (double v : parse_double_list(text, flag)) {
        const auto i = static_cast<std::int64_t>(v);
        if (static_cast<double>(i) != v) throw mdrn::ConfigError(std::string(flag) + ": expects integers");
        out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config;
    std::vector<std::string> overrides;
    std::string resume;
};

int run_training(const mdrn::RunConfig& cfg, const std::string& resume_path) {
    if (cfg.paths.train_set.empty()) {
        throw mdrn::ConfigError("paths.train_set is required (config key or --override)");
    }
    const auto corpus = load_set(cfg.paths.train_set, cfg.model.in_channels, "training");
    std::optional<mdrn::LoadedCorpus> val;
    if (!cfg.paths.val_set.empty()) val = load_set(cfg.paths.val_set, cfg.model.in_channels, "validation");

    mdrn::Network<double> model(cfg.model, cfg.train.seed);
    std::optional<mdrn::Network<double>> teacher;
    if (cfg.train.distill.mode != mdrn::DistillMode::None) {
        if (cfg.train.distill.teacher_checkpoint.empty()) {
            throw mdrn::ConfigError("distill.teacher_checkpoint is required when distillation is enabled");
        }
        const auto tckpt = mdrn::load_checkpoint(cfg.train.distill.teacher_checkpoint);
        teacher.emplace(mdrn::network_from_checkpoint(tckpt));
        std::cerr << "teacher: " << tckpt.weights_sha256.substr(0, 12) << " (N=" << tckpt.model.num_msabs
                  << ", epoch " << tckpt.epoch << ")\n";
    }

    const std::string kind = cfg.train.distill.mode == mdrn::DistillMode::None ? "train" : "distill";
    const std::string run_dir = mdrn::make_run_dir(cfg, kind);
    std::cout << "run_dir: " << run_dir << "\n";

    mdrn::Trainer::Options opt;
    opt.train = &corpus;
    opt.val = val ? &*val : nullptr;
    opt.teacher = teacher ? &*teacher : nullptr;
    opt.run_dir = run_dir;
    opt.on_epoch = [](const mdrn::EpochStats& s) {
        std::ostringstream line;
        line << "epoch " << s.epoch << "  rl " << mdrn::detail::fixed4(s.mean_rl) << "  kd "
             << mdrn::detail::fixed4(s.mean_kd) << "  lr " << s.lr;
        if (std::isfinite(s.val_psnr)) line << "  val_psnr " << mdrn::format_db(s.val_psnr);
        std::cout << line.str() << "\n" << std::flush;
    };

    mdrn::Trainer trainer(model, cfg.train, opt);
    if (!resume_path.empty()) {
        trainer.resume(mdrn::load_checkpoint(resume_path));
        std::cerr << "resumed at epoch " << trainer.next_epoch() << "\n";
    }
    trainer.run();
    std::cout << "checkpoint: " << (std::filesystem::path(run_dir) / "last.ckpt").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"single-image denoising toolkit: nested degradation/reconstruction network"};
    app.require_subcommand(1);

    // train
    TrainArgs train_args;
    auto* cmd_train = app.add_subcommand("train", "Train a model from a config file");
    cmd_train->add_option("--config", train_args.config, "key = value config file");
    cmd_train->add_option("--override", train_args.overrides, "dotted key=value override (repeatable, last wins)");
    cmd_train->add_option("--resume", train_args.resume, "checkpoint to continue from");

    // distill
    TrainArgs distill_args;
    std::string distill_mode;
    std::string distill_teacher;
    double distill_teacher_sigma = std::nan("");
    double distill_student_sigma = std::nan("");
    auto* cmd_distill = app.add_subcommand("distill", "Train a student against a frozen teacher");
    cmd_distill->add_option("--config", distill_args.config, "key = value config file");
    cmd_distill->add_option("--override", distill_args.overrides, "dotted key=value override (repeatable)");
    cmd_distill->add_option("--resume", distill_args.resume, "checkpoint to continue from");
    cmd_distill->add_option("--teacher", distill_teacher, "teacher checkpoint path");
    cmd_distill->add_option("--mode", distill_mode, "hads | hmds");
    cmd_distill->add_option("--teacher-sigma", distill_teacher_sigma, "teacher noise level (0-255 scale)");
    cmd_distill->add_option("--student-sigma", distill_student_sigma, "student noise level (0-255 scale)");

    // denoise
    std::string den_ckpt, den_input, den_out = ".";
    double den_sigma = std::nan("");
    bool den_ensemble = false;
    std::uint64_t den_seed = 0;
    auto* cmd_denoise = app.add_subcommand("denoise", "Denoise an image or a directory of images");
    cmd_denoise->add_option("--ckpt", den_ckpt, "model checkpoint")->required();
    cmd_denoise->add_option("--input", den_input, "PNG file or directory")->required();
    cmd_denoise->add_option("--out", den_out, "output directory (default: current)");
    cmd_denoise->add_option("--sigma", den_sigma, "benchmark mode: corrupt clean inputs first, report PSNR");
    cmd_denoise->add_flag("--ensemble", den_ensemble, "geometric self-ensemble (8 forwards per image)");
    cmd_denoise->add_option("--seed", den_seed, "noise seed for benchmark mode");

    // eval
    std::string eval_ckpt, eval_set, eval_sigmas = "25", eval_run_root;
    bool eval_ensemble = false, eval_luma = false;
    std::uint64_t eval_seed = 0;
    auto* cmd_eval = app.add_subcommand("eval", "Evaluate PSNR/SSIM over an image set");
    cmd_eval->add_option("--ckpt", eval_ckpt, "model checkpoint")->required();
    cmd_eval->add_option("--set", eval_set, "image directory or manifest")->required();
    cmd_eval->add_option("--sigma", eval_sigmas, "comma-separated noise levels (default 25)");
    cmd_eval->add_flag("--ensemble", eval_ensemble, "geometric self-ensemble");
    cmd_eval->add_flag("--luma", eval_luma, "score BT.601 luma instead of pooled channels (color models)");
    cmd_eval->add_option("--seed", eval_seed, "per-image noise seed");
    cmd_eval->add_option("--run-root", eval_run_root, "directory for report output");

    // analyze
    std::string ana_image, ana_scales = "2,3,4", ana_strip;
    double ana_sigma = 50.0;
    std::uint64_t ana_seed = 0;
    auto* cmd_analyze = app.add_subcommand("analyze", "Bicubic degradation round-trip analysis");
    cmd_analyze->add_option("--image", ana_image, "clean PNG input")->required();
    cmd_analyze->add_option("--sigma", ana_sigma, "noise level (default 50)");
    cmd_analyze->add_option("--scales", ana_scales, "comma-separated downscale factors (default 2,3,4)");
    cmd_analyze->add_option("--seed", ana_seed, "noise seed");
    cmd_analyze->add_option("--strip", ana_strip, "write clean|noisy|roundtrip strip PNG here");

    // params
    std::string par_config, par_ckpt, par_sweep;
    std::vector<std::string> par_overrides;
    auto* cmd_params = app.add_subcommand("params", "Report exact parameter counts");
    cmd_params->add_option("--config", par_config, "config file (defaults used when omitted)");
    cmd_params->add_option("--ckpt", par_ckpt, "read the architecture from a checkpoint");
    cmd_params->add_option("--override", par_overrides, "dotted key=value override (repeatable)");
    cmd_params->add_option("--sweep", par_sweep, "comma-separated block counts to tabulate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*cmd_train) {
            const auto cfg = effective_config(train_args.config, train_args.overrides);
            return run_training(cfg, train_args.resume);
        }

        if (*cmd_distill) {
            auto cfg = effective_config(distill_args.config, distill_args.overrides);
            if (!distill_mode.empty()) cfg.train.distill.mode = mdrn::distill_mode_from_string(distill_mode);
            if (!distill_teacher.empty()) cfg.train.distill.teacher_checkpoint = distill_teacher;
            if (!std::isnan(distill_student_sigma)) cfg.train.distill.student_sigma = distill_student_sigma;
            if (!std::isnan(distill_teacher_sigma)) {
                cfg.train.distill.teacher_sigma = distill_teacher_sigma;
            } else if (cfg.train.distill.mode == mdrn::DistillMode::Hads) {
                cfg.train.distill.teacher_sigma = cfg.train.distill.student_sigma;
            }
            if (cfg.train.distill.mode == mdrn::DistillMode::None) {
                throw mdrn::ConfigError("distill requires --mode hads or --mode hmds");
            }
            cfg.train.distill.validate();
            return run_training(cfg, distill_args.resume);
        }

        if (*cmd_denoise) {
            const auto ckpt = mdrn::load_checkpoint(den_ckpt);
            const auto net = mdrn::network_from_checkpoint(ckpt);

            mdrn::CorpusManifest inputs;
            if (std::filesystem::is_directory(den_input)) {
                inputs = mdrn::scan_directory(den_input);
            } else {
                inputs.ids.push_back(std::filesystem::path(den_input).stem().string());
                inputs.paths.push_back(den_input);
            }
            std::filesystem::create_directories(den_out);
            if (den_ensemble) std::cerr << "self-ensemble: 8 forward passes per image\n";

            const bool benchmark = !std::isnan(den_sigma);
            std::int64_t done = 0;
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                try {
                    mdrn::Tensor<double> clean = mdrn::read_png(inputs.paths[i]);
                    if (net.config().in_channels == 1 && clean.c() == 3) clean = mdrn::to_grayscale(clean);
                    if (clean.c() != net.config().in_channels) {
                        throw mdrn::DataError(inputs.paths[i] + ": channel count does not match the model");
                    }
                    mdrn::Tensor<double> degraded = clean;
                    if (benchmark) {
                        auto rng = mdrn::RngStream::derive(den_seed, {mdrn::RngStream::hash_label("denoise"),
                                                                      mdrn::RngStream::hash_label(inputs.ids[i])});
                        degraded = mdrn::add_awgn(clean, mdrn::NoiseSpec{den_sigma}, rng);
                    }
                    const auto restored = den_ensemble ? mdrn::self_ensemble_denoise(net, degraded)
                                                       : mdrn::denoise_image(net, degraded);
                    const auto out_path =
                        (std::filesystem::path(den_out) / (inputs.ids[i] + "_denoised.png")).string();
                    mdrn::write_png(out_path, restored);
                    if (benchmark) {
                        std::cout << inputs.ids[i] << "  noisy " << mdrn::format_db(mdrn::psnr(mdrn::clamp01(degraded), clean))
                                  << " dB  denoised " << mdrn::format_db(mdrn::psnr(restored, clean)) << " dB  -> "
                                  << out_path << "\n";
                    } else {
                        std::cout << inputs.ids[i] << " -> " << out_path << "\n";
                    }
                    ++done;
                } catch (const mdrn::DataError& e) {
                    std::cerr << "error: " << e.what() << "\n";
                }
            }
            if (done == 0) throw mdrn::DataError("no input image could be processed under " + den_input);
            return 0;
        }

        if (*cmd_eval) {
            const auto ckpt = mdrn::load_checkpoint(eval_ckpt);
            const auto net = mdrn::network_from_checkpoint(ckpt);
            const auto manifest = mdrn::resolve_corpus(eval_set);
            const auto sigmas = parse_double_list(eval_sigmas, "--sigma");

            mdrn::RunConfig dir_cfg;
            dir_cfg.model = ckpt.model;
            dir_cfg.train.sigma.sigma = sigmas.front();
            dir_cfg.train.seed = eval_seed;
            dir_cfg.paths.run_root = eval_run_root;
            const std::string run_dir = mdrn::make_run_dir(dir_cfg, "eval");

            for (double s : sigmas) {
                mdrn::EvalOptions opt;
                opt.sigma = s;
                opt.ensemble = eval_ensemble;
                opt.seed = eval_seed;
                opt.luma_metrics = eval_luma;
                const auto report = mdrn::evaluate_dataset(manifest, net, opt);
                std::cout << mdrn::format_report_table(report) << "\n";

                char tag[32];
                std::snprintf(tag, sizeof(tag), "%g", s);
                std::ofstream jsonl(std::filesystem::path(run_dir) / ("report_sigma" + std::string(tag) + ".jsonl"));
                jsonl << mdrn::format_report_jsonl(report);
            }
            std::cout << "reports: " << run_dir << "\n";
            return 0;
        }

        if (*cmd_analyze) {
            const auto clean = mdrn::read_png(ana_image);
            const auto scales = parse_int_list(ana_scales, "--scales");
            for (const std::int64_t s : scales) {
                if (s == 1) throw mdrn::ConfigError("--scales: 1 is the identity, not an analysis point");
                if (s < 2 || s > 4) throw mdrn::ConfigError("--scales: supported factors are 2, 3, 4");
            }

            auto rng = mdrn::RngStream::derive(ana_seed, {mdrn::RngStream::hash_label("analyze")});
            const auto rows =
                mdrn::degradation_roundtrip_report(clean, mdrn::NoiseSpec{ana_sigma}, scales, rng);
            std::cout << "sigma " << ana_sigma << "\n";
            std::cout << "scale  noisy_psnr(db)  roundtrip_psnr(db)\n";
            for (const auto& r : rows) {
                std::cout << "x" << r.scale << "     " << mdrn::format_db(r.psnr_noisy) << "         "
                          << mdrn::format_db(r.psnr_roundtrip) << "\n";
            }

            if (!ana_strip.empty()) {
                // clean | noisy | one roundtrip panel per scale, left to right
                auto rng2 = mdrn::RngStream::derive(ana_seed, {mdrn::RngStream::hash_label("analyze")});
                const auto noisy = mdrn::add_awgn(clean, mdrn::NoiseSpec{ana_sigma}, rng2);
                std::vector<mdrn::Tensor<double>> panels{clean, mdrn::clamp01(noisy)};
                for (const std::int64_t s : scales) {
                    panels.push_back(mdrn::clamp01(mdrn::bicubic_roundtrip(noisy, s)));
                }
                mdrn::Tensor<double> strip(1, clean.c(), clean.h(),
                                           clean.w() * static_cast<std::int64_t>(panels.size()));
                for (std::size_t p = 0; p < panels.size(); ++p) {
                    for (std::int64_t c = 0; c < clean.c(); ++c) {
                        for (std::int64_t y = 0; y < clean.h(); ++y) {
                            for (std::int64_t x = 0; x < clean.w(); ++x) {
                                strip.at(0, c, y, static_cast<std::int64_t>(p) * clean.w() + x) =
                                    panels[p].at(0, c, y, x);
                            }
                        }
                    }
                }
                mdrn::write_png(ana_strip, strip);
                std::cout << "strip: " << ana_strip << "\n";
            }
            return 0;
        }

        if (*cmd_params) {
            mdrn::ModelConfig mc;
            if (!par_ckpt.empty()) {
                mc = mdrn::load_checkpoint(par_ckpt).model;
            } else {
                mc = effective_config(par_config, par_overrides).model;
            }
            auto count_for = [&](std::int64_t n) {
                mdrn::ModelConfig c = mc;
                c.num_msabs = n;
                c.validate();
                return mdrn::Network<double>(c, 0).count_parameters();
            };

            std::cout << "channels=" << mc.channels << " levels=" << mc.levels << " in_channels=" << mc.in_channels
                      << "\n";
            std::vector<std::int64_t> block_counts{mc.num_msabs};
            if (!par_sweep.empty()) block_counts = parse_int_list(par_sweep, "--sweep");
            for (const std::int64_t n : block_counts) {
                const std::int64_t cnt = count_for(n);
                std::cout << "N=" << n << "  params=" << cnt << "  (~" << human_count(cnt) << ")\n";
            }
            return 0;
        }
    } catch (const mdrn::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mdrn::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const mdrn::TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
