#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdrn/checkpoint.hpp"
#include "mdrn/corpus.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/image_io.hpp"
#include "mdrn/infer.hpp"
#include "mdrn/metrics.hpp"
#include "mdrn/model.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/rng.hpp"

namespace mdrn {

struct MetricRow {
    std::string id;
    double sigma = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    bool ok = true;
    std::string error;  // set when ok is false
};

/// Dataset evaluation result: one row per manifest entry plus aggregate
/// means over the rows that evaluated cleanly.
struct MetricReport {
    std::vector<MetricRow> rows;
    double sigma = 0.0;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::int64_t evaluated = 0;
    std::int64_t failed = 0;

    // provenance
    std::string checkpoint_hash;
    std::int64_t channels = 0;
    std::int64_t feature_channels = 0;
    std::int64_t num_msabs = 0;
    bool ensemble = false;
};

struct EvalOptions {
    double sigma = 25.0;
    bool ensemble = false;
    std::uint64_t seed = 0;
    bool luma_metrics = false;  // color runs: score BT.601 luma instead of pooled channels
    std::string dump_dir;       // when set, save denoised 8-bit PNGs here
};

/// Denoises every manifest image at the given noise level and reports
/// PSNR/SSIM per image. Noise is derived from (seed, image id), so reruns
/// reproduce the table exactly. Unreadable or incompatible images become
/// failure rows instead of aborting the run.
inline MetricReport evaluate_dataset(const CorpusManifest& manifest, const Network<double>& model,
                                     const EvalOptions& opt) {
    if (manifest.size() == 0) throw DataError("evaluate: empty manifest");
    NoiseSpec spec{opt.sigma};
    spec.validate();
    const std::int64_t want = model.config().in_channels;

    MetricReport report;
    report.sigma = opt.sigma;
    report.checkpoint_hash = weights_hash(model);
    report.channels = want;
    report.feature_channels = model.config().channels;
    report.num_msabs = model.config().num_msabs;
    report.ensemble = opt.ensemble;

    if (!opt.dump_dir.empty()) std::filesystem::create_directories(opt.dump_dir);

    double sum_psnr = 0.0;
    double sum_ssim = 0.0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        MetricRow row;
        row.id = manifest.ids[i];
        row.sigma = opt.sigma;
        try {
            Tensor<double> clean = read_png(manifest.paths[i]);
            if (want == 1 && clean.c() == 3) clean = to_grayscale(clean);
            if (clean.c() != want) {
                throw DataError("image has " + std::to_string(clean.c()) + " channels, model expects " +
                                std::to_string(want));
            }
            RngStream rng = RngStream::derive(opt.seed, {RngStream::hash_label("eval"),
                                                         RngStream::hash_label(row.id)});
            const Tensor<double> noisy = add_awgn(clean, spec, rng);
            const Tensor<double> denoised =
                opt.ensemble ? self_ensemble_denoise(model, noisy) : denoise_image(model, noisy);

            Tensor<double> scored = denoised;
            Tensor<double> target = clean;
            if (opt.luma_metrics && want == 3) {
                scored = to_grayscale(denoised);
                target = to_grayscale(clean);
            }
            row.psnr_db = psnr(scored, target);
            row.ssim = ssim(scored, target);
            if (!opt.dump_dir.empty()) {
                write_png((std::filesystem::path(opt.dump_dir) / (row.id + "_denoised.png")).string(), denoised);
            }
            sum_psnr += row.psnr_db;
            sum_ssim += row.ssim;
            ++report.evaluated;
        } catch (const DataError& e) {
            row.ok = false;
            row.error = e.what();
            ++report.failed;
        }
        report.rows.push_back(std::move(row));
    }

    if (report.evaluated > 0) {
        report.mean_psnr = sum_psnr / static_cast<double>(report.evaluated);
        report.mean_ssim = sum_ssim / static_cast<double>(report.evaluated);
    } else {
        report.mean_psnr = std::numeric_limits<double>::quiet_NaN();
        report.mean_ssim = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

namespace detail {

inline std::string fixed4(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace detail

/// Aligned text table with a provenance header, one row per image, and an
/// aggregate line. Failure rows carry the error in place of metrics.
inline std::string format_report_table(const MetricReport& r) {
    std::size_t idw = 5;
    for (const auto& row : r.rows) idw = std::max(idw, row.id.size());

    std::ostringstream os;
    os << "model: C=" << r.feature_channels << " N=" << r.num_msabs << " channels=" << r.channels
       << " ensemble=" << (r.ensemble ? "on" : "off") << "\n";
    os << "checkpoint: " << r.checkpoint_hash << "\n";
    os << "sigma: " << detail::fixed4(r.sigma) << "\n";
    os << std::string(idw, '-') << "--------------------------\n";
    auto pad = [&](const std::string& s) { return s + std::string(idw - s.size() + 2, ' '); };
    os << pad("image") << "psnr(db)  ssim\n";
    for (const auto& row : r.rows) {
        if (row.ok) {
            os << pad(row.id) << format_db(row.psnr_db) << "   " << detail::fixed4(row.ssim) << "\n";
        } else {
            os << pad(row.id) << "FAILED: " << row.error << "\n";
        }
    }
    os << std::string(idw, '-') << "--------------------------\n";
    os << pad("mean") << format_db(r.mean_psnr) << "   " << detail::fixed4(r.mean_ssim) << " ("
       << r.evaluated << " images, " << r.failed << " failed)\n";
    return os.str();
}

/// One JSON object per row, then one aggregate object. Stable key order
/// and float formatting make rerun outputs byte-identical.
inline std::string format_report_jsonl(const MetricReport& r) {
    std::ostringstream os;
    for (const auto& row : r.rows) {
        nlohmann::json j{{"id", row.id}, {"sigma", row.sigma}};
        if (row.ok) {
            if (std::isinf(row.psnr_db)) {
                j["psnr_db"] = "inf";
            } else {
                j["psnr_db"] = row.psnr_db;
            }
            j["ssim"] = row.ssim;
        } else {
            j["error"] = row.error;
        }
        os << j.dump() << "\n";
    }
    nlohmann::json agg{{"aggregate", true},
                       {"sigma", r.sigma},
                       {"mean_psnr_db", r.mean_psnr},
                       {"mean_ssim", r.mean_ssim},
                       {"evaluated", r.evaluated},
                       {"failed", r.failed},
                       {"checkpoint", r.checkpoint_hash},
                       {"ensemble", r.ensemble}};
    os << agg.dump() << "\n";
    return os.str();
}

inline void write_report_files(const MetricReport& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(std::filesystem::path(dir) / "report.txt");
        f << format_report_table(r);
    }
    {
        std::ofstream f(std::filesystem::path(dir) / "report.jsonl");
        f << format_report_jsonl(r);
    }
}

}  // namespace mdrn
