#pragma once

// Grid search of the Strategy I and benchmark tracking gains on tuning trials
// drawn from seeds disjoint from the evaluation trials.

#include <cstdint>
#include <vector>

#include "tclsafe/safety.hpp"
#include "tclsafe/sim.hpp"

namespace tclsafe {

struct TuningGrid {
    std::vector<double> k{0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.9, 1.0, 1.1, 1.2};
    std::vector<double> kp{1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 5.0, 6.0};
    std::vector<double> ti{50.0, 100.0, 200.0, 400.0, 800.0};
};

struct TuningOptions {
    int trials = 25;
    std::uint64_t seed = 90210;   // scenario and signal seeds of the tuning set
    std::vector<double> levels = default_blocking_levels();
    std::vector<double> no_comm_levels = default_blocking_levels();
    /// Relative RMS improvement a level-specific comm gain needs over the
    /// no-comm gain at that level before the schedule uses it.
    double min_improvement = 0.03;
    TuningGrid grid{};
};

struct TuningRow {
    Strategy strategy;
    bool comm;
    double level;   // blocked fraction (comm rows)
    double k;       // Strategy I
    double kp, ti;  // benchmark
    double rms_pct; // average over the tuning runs
};

struct TuningResult {
    ControllerTuning tuning;
    std::vector<TuningRow> rows; // every evaluated grid point
};

/// Blocks round(fraction * n) units chosen uniformly without replacement.
SafetyAssignment random_blocking(std::size_t n, double fraction, Rng& rng);

/// The scenario with its seeds replaced by the tuning seeds.
ScenarioConfig tuning_config(const ScenarioConfig& cfg, const TuningOptions& opt);

/// Without communication: one gain per controller minimizing the average RMS
/// over all tuning trials at every no-comm level. With communication: the best
/// gain at each level independently, stored as schedules, unless it is within
/// `min_improvement` of the no-comm gain there. Other tuning fields
/// are copied from `cfg`.
TuningResult tune_gains(const ScenarioConfig& cfg, const TuningOptions& opt);

} // namespace tclsafe
