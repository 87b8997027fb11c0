#pragma once

// Tick-synchronous trial runner. Per tick: operator safety directives, the
// aggregator's tracking directives (with the operator's message when direct
// communication is on), dispatch with safety preemption, plant step, power
// flow, constraint check, metrics.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tclsafe/aggregate_model.hpp"
#include "tclsafe/controllers.hpp"
#include "tclsafe/feeder.hpp"
#include "tclsafe/kalman.hpp"
#include "tclsafe/random.hpp"
#include "tclsafe/safety.hpp"
#include "tclsafe/signal.hpp"
#include "tclsafe/synthetic_feeder.hpp"
#include "tclsafe/tcl.hpp"

namespace tclsafe {

enum class Strategy : std::uint8_t { Benchmark, Strategy1, Strategy2 };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

enum class PiErrorUnits : std::uint8_t { Normalized, PerKw };

struct ControllerTuning {
    /// Estimator noise with q in unit counts squared (scaled by 1/n^2 internally).
    EstimatorTuning estimator{};
    /// Normalized: error / total rated power. PerKw: error in kW.
    PiErrorUnits pi_error = PiErrorUnits::Normalized;
    // Defaults come from the tune-gains command on the default scenario.
    // Without communication the aggregator runs one fixed gain set.
    double k = 0.6;
    PiGains pi{3.0, 200.0};
    // With communication the gains follow the communicated blocked fraction.
    GainSchedule k_schedule = GainSchedule(default_blocking_levels(), {0.6, 0.7, 0.65, 0.6, 0.6});
    GainSchedule kp_schedule = GainSchedule(default_blocking_levels(), {3.0, 3.0, 3.0, 3.0, 4.0});
    GainSchedule ti_schedule = GainSchedule(default_blocking_levels(), {200.0, 200.0, 200.0, 200.0, 400.0});
    double p_small_fraction = 0.25;
};

struct SignalSource {
    std::optional<std::string> csv_path; // unset: synthesize
    double cutoff_hz = 0.01;
    double target_std = 0.45;
    std::uint64_t seed = 11;
};

struct ScenarioConfig {
    PopulationSpec population{};
    double theta_a = 32.0;
    double h_seconds = 2.0;
    BinConfig bins{};
    SyntheticFeederSpec feeder{};
    std::optional<std::string> feeder_path; // load instead of generating
    SignalSource signal{};
    double amplitude = 0.33;
    double horizon_s = 600.0;
    double prerun_s = 3600.0;
    /// Per-tick probability of a random external switch per unlocked unit
    /// during the identification run.
    double identification_excitation = 0.01;
    /// Tail of the uncontrolled pre-run fed to the estimator before the trial
    /// starts (0 = start from the uniform guess).
    double estimator_warmup_s = 600.0;
    int trials = 10;
    std::uint64_t seed = 2024; // per-trial streams derive from this
    ControllerTuning tuning{};
    ConstraintLimits limits{};
};

/// Everything a single trial needs besides the controller choice.
struct TrialScenario {
    int index = 0;
    std::uint64_t seed = 0;
    std::vector<TclState> initial;
    double baseline_kw = 0.0;
    Eigen::MatrixXd As;
    RegulationSignal signal;
    std::vector<double> target_kw; // P* for ticks 1..T  (index k -> tick k+1)
    std::vector<double> warmup_kw;  // uncontrolled power just before tick 0
};

struct Scenario {
    ScenarioConfig cfg;
    AmbientConditions amb;
    std::vector<TclParams> params;
    Feeder feeder;
    std::vector<int> weak_nodes;
    std::vector<TrialScenario> trials;
    double p_on_total = 0.0; // sum of ratings
    double p_small = 0.0;
    int ticks = 0;

    std::size_t units() const { return params.size(); }
};

/// Builds the population, every trial's warm state, baseline, A_s and target,
/// and (unless a feeder file is given) generates and calibrates the feeder on
/// the trials' uncontrolled trajectories.
Scenario prepare_scenario(const ScenarioConfig& cfg);

/// Uncontrolled run of `ticks` steps from `initial`; returns per-tick states
/// after each step when `keep` is set, and the bin history for A_s.
struct FreeRun {
    std::vector<double> power_kw;  // per tick, before each step
    BinHistory bins;               // per tick, before each step
    std::vector<TclState> final_state;
};
FreeRun free_run(std::vector<TclState> initial, std::span<const TclParams> params, const AmbientConditions& amb,
                 int ticks, const BinConfig* bins = nullptr);

/// A_s from a run with random external switching of probability `excitation`
/// per unlocked unit and tick; the switched transitions are skipped.
Eigen::MatrixXd identify_with_excitation(std::vector<TclState> initial, std::span<const TclParams> params,
                                         const AmbientConditions& amb, int ticks, const BinConfig& bins,
                                         double excitation, Rng& rng);

struct RunOptions {
    Strategy strategy = Strategy::Strategy2;
    bool comm = false;
    bool traces = false;
    bool safety = true; // false marks a matched unprotected run in the metrics
};

struct ComponentViolation {
    ViolationType type;
    int node = 0;
    int ticks = 0;
    double max_severity = 0.0;
};

struct TickTrace {
    double t_s = 0.0;
    double p_kw = 0.0;
    double target_kw = 0.0;
    double command = 0.0; // PI command, Strategy I net probability mass, Strategy II commanded kW
    double min_voltage_pu = 0.0;
    int violations = 0;
    double delta_p_safety = 0.0;
    // Hottest off-unlocked bin, unit counts.
    double est_hot_off = 0.0;
    int responsive_hot_off = 0;
    int total_hot_off = 0;
};

struct TrialMetrics {
    Strategy strategy = Strategy::Strategy2;
    bool comm = false;
    bool safety = true;
    int trial = 0;
    double baseline_kw = 0.0;
    double rms_pct = 0.0;
    double safety_fraction_pct = 0.0;
    std::size_t blocked = 0;
    std::size_t grouped = 0;
    std::size_t over_current = 0;
    std::size_t under_voltage = 0;
    std::size_t over_voltage = 0;
    std::size_t transformer_overload = 0;
    int violation_ticks = 0;
    int saturation_events = 0;
    int infeasible_events = 0;
    int estimator_jitter = 0;
    double min_voltage_pu = 0.0;
    std::vector<ComponentViolation> components;
    std::vector<TickTrace> trace;

    std::size_t total_violations() const { return over_current + under_voltage + over_voltage + transformer_overload; }
};

TrialMetrics run_trial(const Scenario& sc, int trial, const RunOptions& opt, const SafetyAssignment& assignment);

/// Every trial with its own assignment, on up to `threads` workers (0 = one
/// per hardware thread). Results are in trial order and independent of the
/// worker count.
std::vector<TrialMetrics> run_trials(const Scenario& sc, const RunOptions& opt,
                                     std::span<const SafetyAssignment> per_trial, unsigned threads = 0);

/// Calls fn(0..count-1) on up to `threads` workers.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

/// sqrt(mean(e^2)) / baseline * 100.
double rms_percent(std::span<const double> errors_kw, double baseline_kw);

/// FNV-1a over a canonical byte string.
std::uint64_t fnv1a(const std::string& bytes);

} // namespace tclsafe
