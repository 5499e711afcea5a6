#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace csi_intruder {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Error taxonomy shared by every module. The CLI maps each kind to a
// machine-readable error record and a distinct exit status.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(message), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error("config", m) {}
};

struct PreconditionError : Error {
    explicit PreconditionError(const std::string& m) : Error("precondition", m) {}
};

struct IoError : Error {
    explicit IoError(const std::string& m) : Error("io", m) {}
};

struct ConsistencyError : Error {
    explicit ConsistencyError(const std::string& m) : Error("consistency", m) {}
};

struct TrainingError : Error {
    TrainingError(const std::string& m, std::size_t step)
        : Error("training", m + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct DegenerateDatasetError : Error {
    explicit DegenerateDatasetError(const std::string& m) : Error("degenerate_dataset", m) {}
};

struct DependencyError : Error {
    DependencyError(const std::string& m, std::string required)
        : Error("dependency", m), required_(std::move(required)) {}
    const std::string& required() const noexcept { return required_; }

private:
    std::string required_;
};

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a) noexcept {
    return mix_seed(parent ^ mix_seed(a + 0x632BE59BD9B4E019ull));
}

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, Rest... rest) noexcept {
    return derive_seed(derive_seed(parent, a), static_cast<std::uint64_t>(rest)...);
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Circularly-symmetric complex Gaussian with E|z|^2 = std^2.
inline cplx complex_gaussian(Rng& rng, double std) {
    std::normal_distribution<double> n(0.0, std / std::sqrt(2.0));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

/// Wrap an angle into [0, 2*pi).
inline double wrap_phase(double phi) {
    double w = std::fmod(phi, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w = 0.0;
    return w;
}

}  // namespace csi_intruder
