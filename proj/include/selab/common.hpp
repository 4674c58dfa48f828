#ifndef SELAB_COMMON_HPP
#define SELAB_COMMON_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace selab {

/// Malformed or inconsistent input data (CSV rows, misaligned probabilities,
/// dimension mismatches).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A library invariant was found violated at runtime.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Per-instance probabilities keyed by instance id. Ordered so that any
/// serialization of it is deterministic.
using ProbMap = std::map<std::uint64_t, double>;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for an independent sub-stream `stream` of `seed`. Used wherever work
/// is split into units (instances, folds, pipeline stages) so results do not
/// depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads.
/// Bodies must only write to per-index state.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

double sigmoid(double z) noexcept;
double logit(double p) noexcept;

}  // namespace selab

#endif  // SELAB_COMMON_HPP
