#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace poke2vid {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape, range or invariant violations in caller-provided data.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A dataset entry could not be read.
class IngestionError : public Error {
public:
    IngestionError(std::string entry, const std::string& what)
        : Error("ingestion failed for '" + entry + "': " + what), entry_(std::move(entry)) {}
    const std::string& entry() const noexcept { return entry_; }

private:
    std::string entry_;
};

/// A flow provider failed; carries the provider's identity.
class FlowError : public Error {
public:
    FlowError(std::string provider, const std::string& what)
        : Error("flow provider '" + provider + "': " + what), provider_(std::move(provider)) {}
    const std::string& provider() const noexcept { return provider_; }

private:
    std::string provider_;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

/// Evaluation or service protocol could not be satisfied (too few samples, empty sets, ...).
class ProtocolError : public Error {
public:
    using Error::Error;
};

class TrainingError : public Error {
public:
    using Error::Error;
};

/// Non-finite latent state during a rollout.
class RolloutError : public Error {
public:
    RolloutError(int step, const std::string& what)
        : Error("rollout step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

using Rng = std::mt19937_64;

inline bool is_power_of_two(std::int64_t v) { return v > 0 && (v & (v - 1)) == 0; }

inline int log2_exact(std::int64_t v) {
    int n = 0;
    while ((std::int64_t{1} << n) < v) ++n;
    return n;
}

}  // namespace poke2vid
