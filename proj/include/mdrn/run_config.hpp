#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mdrn/distill.hpp"
#include "mdrn/errors.hpp"
#include "mdrn/hash.hpp"
#include "mdrn/model.hpp"
#include "mdrn/trainer.hpp"

namespace mdrn {

struct RunPaths {
    std::string train_set;
    std::string val_set;
    std::string run_root;  // empty: use $MDRN_RUN_ROOT, falling back to ./runs
};

/// Everything a run needs, addressable by dotted keys. The same grammar
/// serves config files (one key = value per line, '#' comments) and
/// command-line overrides (key=value, last one wins).
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    RunPaths paths;
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::int64_t parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::int64_t out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects an integer, got '" + v + "'");
    }
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("config: " + key + " expects a boolean, got '" + v + "'");
}

inline std::vector<std::int64_t> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<std::int64_t> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw ConfigError("config: " + key + " expects a comma-separated integer list");
    return out;
}

inline std::string join_ints(const std::vector<std::int64_t>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(xs[i]);
    }
    return out;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct ConfigKey {
    const char* name;
    Setter set;
    Getter get;
};

/// Canonical key table; render order follows this list.
inline const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"model.in_channels",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.in_channels = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.model.in_channels); }},
        {"model.channels",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.channels = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.model.channels); }},
        {"model.msab_per_msag",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.num_msabs = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.model.num_msabs); }},
        {"model.levels",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.levels = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.model.levels); }},
        {"model.taps",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.model.tap_indices = parse_int_list(k, v); },
         [](const RunConfig& c) { return join_ints(c.model.tap_indices); }},
        {"train.epochs",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.train.epochs); }},
        {"train.steps_per_epoch",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.steps_per_epoch = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.train.steps_per_epoch); }},
        {"train.batch",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.train.batch); }},
        {"train.patch",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.patch = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.train.patch); }},
        {"train.lr0",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.lr0 = parse_double(k, v); },
         [](const RunConfig& c) { return format_double(c.train.lr0); }},
        {"train.halving_period",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.halving_period = parse_int(k, v); },
         [](const RunConfig& c) { return std::to_string(c.train.halving_period); }},
        {"train.seed",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.seed = static_cast<std::uint64_t>(parse_int(k, v));
         },
         [](const RunConfig& c) { return std::to_string(c.train.seed); }},
        {"train.augment",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.augment = parse_bool(k, v); },
         [](const RunConfig& c) { return c.train.augment ? std::string("true") : std::string("false"); }},
        {"noise.sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) { c.train.sigma.sigma = parse_double(k, v); },
         [](const RunConfig& c) { return format_double(c.train.sigma.sigma); }},
        {"distill.mode",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             try {
                 c.train.distill.mode = distill_mode_from_string(v);
             } catch (const ConfigError&) {
                 throw ConfigError("config: " + k + " expects none|hads|hmds, got '" + v + "'");
             }
         },
         [](const RunConfig& c) { return to_string(c.train.distill.mode); }},
        {"distill.teacher_checkpoint",
         [](RunConfig& c, const std::string&, const std::string& v) { c.train.distill.teacher_checkpoint = v; },
         [](const RunConfig& c) { return c.train.distill.teacher_checkpoint; }},
        {"distill.student_sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.distill.student_sigma = parse_double(k, v);
         },
         [](const RunConfig& c) { return format_double(c.train.distill.student_sigma); }},
        {"distill.teacher_sigma",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.distill.teacher_sigma = parse_double(k, v);
         },
         [](const RunConfig& c) { return format_double(c.train.distill.teacher_sigma); }},
        {"distill.kd_weight",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.train.distill.kd_weight = parse_double(k, v);
         },
         [](const RunConfig& c) { return format_double(c.train.distill.kd_weight); }},
        {"paths.train_set",
         [](RunConfig& c, const std::string&, const std::string& v) { c.paths.train_set = v; },
         [](const RunConfig& c) { return c.paths.train_set; }},
        {"paths.val_set",
         [](RunConfig& c, const std::string&, const std::string& v) { c.paths.val_set = v; },
         [](const RunConfig& c) { return c.paths.val_set; }},
        {"paths.run_root",
         [](RunConfig& c, const std::string&, const std::string& v) { c.paths.run_root = v; },
         [](const RunConfig& c) { return c.paths.run_root; }},
    };
    return keys;
}

/// Unprefixed spellings accepted in overrides for the most-swept knobs.
inline std::string canonical_key(const std::string& key) {
    static const std::map<std::string, std::string> aliases = {
        {"epochs", "train.epochs"},   {"steps_per_epoch", "train.steps_per_epoch"},
        {"batch", "train.batch"},     {"patch", "train.patch"},
        {"lr0", "train.lr0"},         {"halving_period", "train.halving_period"},
        {"seed", "train.seed"},       {"augment", "train.augment"},
        {"sigma", "noise.sigma"},
    };
    const auto it = aliases.find(key);
    return it == aliases.end() ? key : it->second;
}

}  // namespace detail

/// Assigns one dotted key. Unknown keys fail fast.
inline void set_config_value(RunConfig& cfg, const std::string& raw_key, const std::string& value) {
    const std::string key = detail::canonical_key(detail::trim(raw_key));
    for (const auto& entry : detail::config_keys()) {
        if (key == entry.name) {
            entry.set(cfg, key, detail::trim(value));
            return;
        }
    }
    throw ConfigError("config: unknown key '" + detail::trim(raw_key) + "'");
}

/// Applies a command-line override of the form key=value.
inline void apply_override(RunConfig& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override must look like key=value, got '" + spec + "'");
    }
    set_config_value(cfg, spec.substr(0, eq), spec.substr(eq + 1));
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value: '" + line + "'");
        }
        set_config_value(base, line.substr(0, eq), line.substr(eq + 1));
    }
    return base;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("config: cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str());
}

/// Canonical echo: every key in table order. Re-parsing reproduces the
/// configuration exactly (doubles rendered with full precision).
inline std::string render_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& entry : detail::config_keys()) {
        out += entry.name;
        out += " = ";
        out += entry.get(cfg);
        out += "\n";
    }
    return out;
}

/// Short content hash used in run-directory names.
inline std::string config_hash(const RunConfig& cfg) { return sha256_hex(render_config(cfg)).substr(0, 12); }

/// Run root precedence: explicit config value, then $MDRN_RUN_ROOT, then ./runs.
inline std::string resolve_run_root(const RunConfig& cfg) {
    if (!cfg.paths.run_root.empty()) return cfg.paths.run_root;
    if (const char* env = std::getenv("MDRN_RUN_ROOT"); env != nullptr && *env != '\0') return env;
    return "runs";
}

/// Creates <root>/<kind>-<utc timestamp>-<config hash>, suffixing a counter
/// if that directory already exists, and echoes the effective config into it.
inline std::string make_run_dir(const RunConfig& cfg, const std::string& kind) {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);

    const std::filesystem::path root = resolve_run_root(cfg);
    const std::string base = kind + "-" + stamp + "-" + config_hash(cfg);
    std::filesystem::path dir = root / base;
    for (int n = 2; std::filesystem::exists(dir); ++n) dir = root / (base + "-" + std::to_string(n));
    std::filesystem::create_directories(dir);

    std::ofstream echo(dir / "config.cfg");
    if (!echo) throw DataError("cannot write config echo into " + dir.string());
    echo << render_config(cfg);
    return dir.string();
}

}  // namespace mdrn
