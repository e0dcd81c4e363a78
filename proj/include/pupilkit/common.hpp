#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pupilkit {

using Eigen::ArrayXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

/// Base of all pupilkit errors. Every throw site supplies a short
/// machine-parsable code (e.g. "insufficient-data") next to the human
/// message; the CLI maps the subclass to its process exit code.
class Error : public std::runtime_error {
public:
    Error(std::string_view code, std::string_view message)
        : std::runtime_error(std::string(code) + ": " + std::string(message)),
          code_(code) {}

    const std::string& code() const noexcept { return code_; }
    virtual int exit_code() const noexcept = 0;

private:
    std::string code_;
};

/// Bad parameters, malformed run configuration, missing options. Exit 2.
class ConfigError final : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

/// Unreadable, malformed, or inconsistent input data. Exit 3.
class DataError final : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

/// Numerical failure: divergence, singular systems, undefined statistics.
/// Exit 4.
class NumericError final : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

/// 64-bit FNV-1a. Used for input manifests and config hashes; not
/// cryptographic.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t fnv1a64_file(const std::string& path);

/// Deterministic substream construction: one independent mt19937_64 per
/// (seed, tag, index) triple, so parallel generation order never changes
/// the stream a unit sees.
std::mt19937_64 make_rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

/// Uniform in (0,1), 53-bit, straight off the engine.
double uniform01(std::mt19937_64& rng);

/// Standard normal via Box-Muller. Self-contained so generated studies are
/// byte-identical regardless of the standard library's distribution
/// implementation.
double normal01(std::mt19937_64& rng);

/// Runs fn(0..n-1) on up to `jobs` threads (0 = hardware concurrency).
/// Each index owns its output slot, so results are deterministic.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Shortest-ish decimal formatting used by every writer, "%.12g".
std::string format_double(double v);

}  // namespace pupilkit
