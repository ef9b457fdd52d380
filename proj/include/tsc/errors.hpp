#pragma once

#include <stdexcept>
#include <string>

namespace tsc {

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoSuchPhase : std::runtime_error {
    explicit NoSuchPhase(int phase_id)
        : std::runtime_error("no such phase: " + std::to_string(phase_id)) {}
};

struct DeadlockError : std::runtime_error {
    explicit DeadlockError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IllegalTransition : std::runtime_error {
    explicit IllegalTransition(const std::string& msg) : std::runtime_error(msg) {}
};

struct IllegalAction : std::runtime_error {
    explicit IllegalAction(const std::string& msg) : std::runtime_error(msg) {}
};

struct EpisodeDone : std::runtime_error {
    EpisodeDone() : std::runtime_error("episode already finished") {}
};

struct LengthMismatch : std::runtime_error {
    explicit LengthMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyMask : std::runtime_error {
    EmptyMask() : std::runtime_error("action mask has no bit set") {}
};

struct NonFiniteLoss : std::runtime_error {
    NonFiniteLoss() : std::runtime_error("loss is NaN or Inf") {}
};

struct NonFiniteGradient : std::runtime_error {
    NonFiniteGradient() : std::runtime_error("gradient is NaN or Inf") {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidCyclePlan : std::runtime_error {
    explicit InvalidCyclePlan(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tsc
