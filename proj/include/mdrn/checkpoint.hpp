#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdrn/errors.hpp"
#include "mdrn/hash.hpp"
#include "mdrn/model.hpp"
#include "mdrn/optimizer.hpp"
#include "mdrn/tensor.hpp"

namespace mdrn {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads are little-endian");
static_assert(sizeof(double) == 8, "checkpoint payloads assume 8-byte IEEE doubles");

/// Per-epoch training summary carried inside checkpoints and logs.
/// val_psnr is NaN when the run had no validation set.
struct EpochStats {
    std::int64_t epoch = 0;
    double mean_rl = 0.0;
    double mean_kd = 0.0;
    double lr = 0.0;
    double val_psnr = std::numeric_limits<double>::quiet_NaN();
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
    return nlohmann::json{{"in_channels", c.in_channels},
                          {"channels", c.channels},
                          {"num_msabs", c.num_msabs},
                          {"levels", c.levels},
                          {"taps", c.tap_indices}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    try {
        c.in_channels = j.at("in_channels").get<std::int64_t>();
        c.channels = j.at("channels").get<std::int64_t>();
        c.num_msabs = j.at("num_msabs").get<std::int64_t>();
        c.levels = j.at("levels").get<std::int64_t>();
        c.tap_indices = j.at("taps").get<std::vector<std::int64_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

struct CheckpointData {
    ModelConfig model;
    std::int64_t epoch = -1;  // last completed epoch, -1 for an untouched model
    std::uint64_t seed = 0;
    std::vector<EpochStats> history;

    std::vector<std::string> names;
    std::vector<Tensor<double>> weights;

    bool has_optimizer = false;
    AdamConfig adam;
    std::int64_t adam_step_count = 0;
    std::vector<Tensor<double>> adam_m;
    std::vector<Tensor<double>> adam_v;

    std::string weights_sha256;
};

namespace detail {

constexpr char kCkptMagic[8] = {'M', 'D', 'R', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

inline void append_u32(std::string& out, std::uint32_t v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline void append_tensor(std::string& out, const Tensor<double>& t) {
    out.append(reinterpret_cast<const char*>(t.vec().data()), t.vec().size() * sizeof(double));
}

inline nlohmann::json epoch_stats_to_json(const EpochStats& s) {
    nlohmann::json j{{"epoch", s.epoch}, {"mean_rl", s.mean_rl}, {"mean_kd", s.mean_kd}, {"lr", s.lr}};
    if (std::isfinite(s.val_psnr)) {
        j["val_psnr"] = s.val_psnr;
    } else {
        j["val_psnr"] = nullptr;
    }
    return j;
}

inline EpochStats epoch_stats_from_json(const nlohmann::json& j) {
    EpochStats s;
    s.epoch = j.at("epoch").get<std::int64_t>();
    s.mean_rl = j.at("mean_rl").get<double>();
    s.mean_kd = j.at("mean_kd").get<double>();
    s.lr = j.at("lr").get<double>();
    if (j.contains("val_psnr") && !j.at("val_psnr").is_null()) s.val_psnr = j.at("val_psnr").get<double>();
    return s;
}

}  // namespace detail

/// Raw little-endian bytes of every parameter tensor in registry order.
/// This is exactly the weight segment of the checkpoint payload, so its
/// hash is stable across save/load cycles.
template <typename T>
std::string weights_payload(const Network<T>& net) {
    std::string out;
    std::size_t total = 0;
    for (const auto& p : net.parameters()) total += p.var.value().vec().size();
    out.reserve(total * sizeof(double));
    for (const auto& p : net.parameters()) {
        for (T v : p.var.value().vec()) {
            const double d = static_cast<double>(v);
            out.append(reinterpret_cast<const char*>(&d), sizeof(d));
        }
    }
    return out;
}

template <typename T>
std::string weights_hash(const Network<T>& net) {
    const std::string payload = weights_payload(net);
    return sha256_hex(payload.data(), payload.size());
}

inline void save_checkpoint(const std::string& path, const Network<double>& net, std::int64_t epoch,
                            std::uint64_t seed, const std::vector<EpochStats>& history,
                            const Adam<double>* opt = nullptr) {
    const std::string weights = weights_payload(net);

    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& p : net.parameters()) {
        const Shape& s = p.var.value().shape();
        tensors.push_back({{"name", p.name}, {"shape", std::vector<std::int64_t>{s.b, s.c, s.h, s.w}}});
    }
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& s : history) hist.push_back(detail::epoch_stats_to_json(s));

    nlohmann::json header{{"format", detail::kCkptVersion},
                          {"model", model_config_to_json(net.config())},
                          {"epoch", epoch},
                          {"seed", seed},
                          {"history", hist},
                          {"tensors", tensors},
                          {"weights_sha256", sha256_hex(weights.data(), weights.size())}};
    if (opt) {
        header["optimizer"] = {{"present", true},
                               {"beta1", opt->config().beta1},
                               {"beta2", opt->config().beta2},
                               {"eps", opt->config().eps},
                               {"step_count", opt->step_count()}};
    } else {
        header["optimizer"] = {{"present", false}};
    }

    const std::string header_bytes = header.dump();
    std::string blob;
    blob.append(detail::kCkptMagic, sizeof(detail::kCkptMagic));
    detail::append_u32(blob, detail::kCkptVersion);
    detail::append_u32(blob, static_cast<std::uint32_t>(header_bytes.size()));
    blob += header_bytes;
    blob += weights;
    if (opt) {
        for (const auto& slot : opt->slots()) detail::append_tensor(blob, slot.m);
        for (const auto& slot : opt->slots()) detail::append_tensor(blob, slot.v);
    }

    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw DataError("checkpoint: cannot open " + tmp.string() + " for writing");
        f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
        if (!f) throw DataError("checkpoint: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

inline CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("checkpoint: cannot open " + path);

    char magic[sizeof(detail::kCkptMagic)];
    std::uint32_t version = 0;
    std::uint32_t header_len = 0;
    f.read(magic, sizeof(magic));
    f.read(reinterpret_cast<char*>(&version), sizeof(version));
    f.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    if (!f || std::memcmp(magic, detail::kCkptMagic, sizeof(magic)) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    if (version != detail::kCkptVersion) {
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }

    std::string header_bytes(header_len, '\0');
    f.read(header_bytes.data(), header_len);
    if (!f) throw DataError("checkpoint: truncated header in " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: header parse failed: ") + e.what());
    }

    CheckpointData out;
    try {
        out.model = model_config_from_json(header.at("model"));
        out.epoch = header.at("epoch").get<std::int64_t>();
        out.seed = header.at("seed").get<std::uint64_t>();
        for (const auto& h : header.at("history")) out.history.push_back(detail::epoch_stats_from_json(h));
        out.weights_sha256 = header.at("weights_sha256").get<std::string>();

        const auto& opt = header.at("optimizer");
        out.has_optimizer = opt.at("present").get<bool>();
        if (out.has_optimizer) {
            out.adam.beta1 = opt.at("beta1").get<double>();
            out.adam.beta2 = opt.at("beta2").get<double>();
            out.adam.eps = opt.at("eps").get<double>();
            out.adam_step_count = opt.at("step_count").get<std::int64_t>();
        }

        for (const auto& t : header.at("tensors")) {
            out.names.push_back(t.at("name").get<std::string>());
            const auto s = t.at("shape").get<std::vector<std::int64_t>>();
            if (s.size() != 4) throw DataError("checkpoint: tensor shape must have 4 dims");
            out.weights.emplace_back(s[0], s[1], s[2], s[3]);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: malformed header: ") + e.what());
    }

    auto read_tensor = [&](Tensor<double>& t) {
        f.read(reinterpret_cast<char*>(t.vec().data()),
               static_cast<std::streamsize>(t.vec().size() * sizeof(double)));
        if (!f) throw DataError("checkpoint: truncated payload in " + path);
    };

    Sha256 hash;
    for (auto& t : out.weights) {
        read_tensor(t);
        hash.update(t.vec().data(), t.vec().size() * sizeof(double));
    }
    if (hash.hex() != out.weights_sha256) throw DataError("checkpoint: weight payload hash mismatch in " + path);

    if (out.has_optimizer) {
        for (const auto& w : out.weights) {
            out.adam_m.emplace_back(w.shape());
            read_tensor(out.adam_m.back());
        }
        for (const auto& w : out.weights) {
            out.adam_v.emplace_back(w.shape());
            read_tensor(out.adam_v.back());
        }
    }
    return out;
}

/// Copies checkpointed weights into a compatible network.
inline void apply_checkpoint(Network<double>& net, const CheckpointData& ckpt) {
    auto& params = net.parameters();
    if (params.size() != ckpt.weights.size()) {
        throw ConfigError("checkpoint: parameter count mismatch (expected " + std::to_string(params.size()) +
                          ", checkpoint has " + std::to_string(ckpt.weights.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != ckpt.names[i] || params[i].var.value().shape() != ckpt.weights[i].shape()) {
            throw ConfigError("checkpoint: tensor mismatch at " + params[i].name);
        }
        params[i].var.value().vec() = ckpt.weights[i].vec();
    }
}

inline void apply_optimizer_state(Adam<double>& opt, const CheckpointData& ckpt) {
    if (!ckpt.has_optimizer) throw ConfigError("checkpoint: no optimizer state stored");
    auto& slots = opt.slots();
    if (slots.size() != ckpt.adam_m.size()) throw ConfigError("checkpoint: optimizer slot count mismatch");
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].m.shape() != ckpt.adam_m[i].shape()) {
            throw ConfigError("checkpoint: optimizer slot shape mismatch at index " + std::to_string(i));
        }
        slots[i].m.vec() = ckpt.adam_m[i].vec();
        slots[i].v.vec() = ckpt.adam_v[i].vec();
    }
    opt.set_step_count(ckpt.adam_step_count);
}

/// Rebuilds the network a checkpoint was saved from.
inline Network<double> network_from_checkpoint(const CheckpointData& ckpt, std::uint64_t init_seed = 0) {
    Network<double> net(ckpt.model, init_seed);
    apply_checkpoint(net, ckpt);
    return net;
}

}  // namespace mdrn
