#pragma once

#include <stdexcept>
#include <string>

namespace madsel {

/// Invalid argument or violated precondition.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// File could not be opened, read or written.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or unsupported on-disk content.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Classifier could not be fitted to the given data.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Evaluation protocol violated (e.g. a subject on both sides of a split).
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Failure inside one stage of the end-to-end pipeline.
struct StageError : std::runtime_error {
    StageError(std::string stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace madsel
