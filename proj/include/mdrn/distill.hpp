#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mdrn/errors.hpp"
#include "mdrn/model.hpp"
#include "mdrn/noise.hpp"
#include "mdrn/ops.hpp"

namespace mdrn {

enum class DistillMode { None, Hads, Hmds };

inline std::string to_string(DistillMode m) {
    switch (m) {
        case DistillMode::None: return "none";
        case DistillMode::Hads: return "hads";
        case DistillMode::Hmds: return "hmds";
    }
    return "none";
}

inline DistillMode distill_mode_from_string(const std::string& s) {
    if (s == "none") return DistillMode::None;
    if (s == "hads") return DistillMode::Hads;
    if (s == "hmds") return DistillMode::Hmds;
    throw ConfigError("unknown distillation mode '" + s + "' (expected none, hads or hmds)");
}

/// Teacher-student pairing. Two regimes:
///  - hads: teacher shares the student's noise level but stacks more blocks
///    per group; both see the same noisy tensor.
///  - hmds: teacher has the identical architecture but was trained for a
///    lower noise level; each side gets its own noise draw.
struct DistillConfig {
    DistillMode mode = DistillMode::None;
    std::string teacher_checkpoint;
    double student_sigma = 25.0;
    double teacher_sigma = 25.0;
    double kd_weight = 1.0;

    void validate() const {
        if (kd_weight < 0) throw ConfigError("distill.kd_weight must be non-negative");
        if (mode == DistillMode::Hads && teacher_sigma != student_sigma) {
            throw ConfigError("hads requires teacher_sigma == student_sigma (one shared noise level)");
        }
        if (mode == DistillMode::Hmds && !(teacher_sigma < student_sigma)) {
            throw ConfigError("hmds requires teacher_sigma < student_sigma (teacher solves the easier problem)");
        }
    }

    /// Architecture compatibility between a loaded teacher and the student.
    void validate_pair(const ModelConfig& teacher, const ModelConfig& student) const {
        validate();
        if (mode == DistillMode::None) return;
        const bool same_backbone = teacher.in_channels == student.in_channels &&
                                   teacher.channels == student.channels && teacher.levels == student.levels &&
                                   teacher.tap_indices == student.tap_indices;
        if (!same_backbone) {
            throw ConfigError("teacher and student must share the same backbone layout");
        }
        if (mode == DistillMode::Hads && teacher.num_msabs <= student.num_msabs) {
            throw ConfigError("hads teacher must stack more blocks per group than the student (teacher " +
                              std::to_string(teacher.num_msabs) + " vs student " + std::to_string(student.num_msabs) +
                              ")");
        }
        if (mode == DistillMode::Hmds && teacher.num_msabs != student.num_msabs) {
            throw ConfigError("hmds teacher must match the student architecture exactly");
        }
    }
};

/// Mean absolute error between the network output and the clean target.
template <class T>
Var<T> reconstruction_loss(const Var<T>& output, const Var<T>& clean) {
    return mean_abs_diff(output, clean);
}

/// Feature-matching loss: per-tap mean absolute difference, summed over
/// taps. The teacher side never receives gradients.
template <class T>
Var<T> kd_loss(const std::vector<Var<T>>& student_taps, const std::vector<Var<T>>& teacher_taps) {
    if (student_taps.empty() || student_taps.size() != teacher_taps.size()) {
        throw std::invalid_argument("kd_loss: tap lists must be non-empty and equally long");
    }
    std::vector<Var<T>> terms;
    terms.reserve(student_taps.size());
    for (std::size_t i = 0; i < student_taps.size(); ++i) {
        terms.push_back(mean_abs_diff(student_taps[i], teacher_taps[i].detach()));
    }
    return scalar_sum(terms);
}

template <class T>
struct LossBreakdown {
    Var<T> total;
    Var<T> rl;
    Var<T> kd;  // zero scalar when mode is none
};

template <class T>
LossBreakdown<T> total_loss(const Var<T>& output, const Var<T>& clean, const std::vector<Var<T>>& student_taps,
                            const std::vector<Var<T>>& teacher_taps, const DistillConfig& cfg) {
    LossBreakdown<T> out;
    out.rl = reconstruction_loss(output, clean);
    if (cfg.mode == DistillMode::None) {
        out.kd = Var<T>(Tensor<T>::scalar(T(0)), false);
        out.total = out.rl;
        return out;
    }
    if (teacher_taps.empty()) throw ConfigError("distillation is enabled but no teacher taps were provided");
    out.kd = kd_loss(student_taps, teacher_taps);
    out.total = scalar_sum<T>({out.rl, scalar_scale(out.kd, static_cast<T>(cfg.kd_weight))});
    return out;
}

/// Noisy inputs for one distillation step. hads: one draw shared by both
/// sides. hmds: independent draws on the same clean content.
template <class T>
std::pair<Tensor<T>, Tensor<T>> make_distill_inputs(const Tensor<T>& clean_batch, const DistillConfig& cfg,
                                                    RngStream& rng) {
    if (cfg.mode == DistillMode::None) throw ConfigError("make_distill_inputs requires hads or hmds");
    cfg.validate();
    if (cfg.mode == DistillMode::Hads) {
        Tensor<T> noisy = add_awgn(clean_batch, NoiseSpec{cfg.student_sigma}, rng);
        return {noisy, noisy};
    }
    Tensor<T> student = add_awgn(clean_batch, NoiseSpec{cfg.student_sigma}, rng);
    Tensor<T> teacher = add_awgn(clean_batch, NoiseSpec{cfg.teacher_sigma}, rng);
    return {std::move(student), std::move(teacher)};
}

}  // namespace mdrn
