#pragma once

#include <cstdint>
#include <random>

namespace tclsafe {

/// Seeded 64-bit engine with distribution helpers whose output does not depend
/// on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal by Box-Muller.
    double normal();
    std::uint64_t next() { return engine_(); }

    /// Independent stream derived from this seed and a label.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace tclsafe
