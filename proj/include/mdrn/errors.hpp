#pragma once

#include <stdexcept>
#include <string>

namespace mdrn {

/// Invalid or inconsistent configuration (model/train/distill settings,
/// weight-shape mismatches). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Unreadable or malformed input data (corpora, images, checkpoints).
/// CLI maps this to exit code 3.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training aborted (non-finite loss). CLI maps this to exit code 4.
class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mdrn
