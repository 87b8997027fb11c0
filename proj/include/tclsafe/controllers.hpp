#pragma once

// Aggregator tracking controllers.

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "tclsafe/aggregate_model.hpp"
#include "tclsafe/random.hpp"
#include "tclsafe/tcl.hpp"

namespace tclsafe {

/// Per-unit directive slot; nullopt means no command this tick.
using Directives = std::vector<std::optional<SwitchDirective>>;

/// Switch probabilities for the 2N unlocked bins. At most one half is nonzero.
struct ProbabilisticCommand {
    std::vector<double> u;

    static ProbabilisticCommand zero(const BinConfig& cfg) {
        return {std::vector<double>(static_cast<std::size_t>(cfg.unlocked_bins()), 0.0)};
    }
    bool switches_on() const;
    bool switches_off() const;
};

/// One-step model-predictive choice of bin switch probabilities. Bins closest
/// to an internal switch are filled first; the marginal bin gets the fractional
/// probability that makes the predicted power hit the gain-scaled target.
ProbabilisticCommand aggregate_policy(const Eigen::VectorXd& x_hat, const Eigen::MatrixXd& As,
                                      double p_on_total, double p_target_next, double gain,
                                      const BinConfig& cfg);

/// Bernoulli dispatch of a bin command. Units flagged in `unresponsive` and
/// locked units are skipped.
Directives apply_probabilistic_command(std::span<const TclState> states,
                                       std::span<const TclParams> params,
                                       const ProbabilisticCommand& cmd,
                                       std::span<const bool> unresponsive, const BinConfig& cfg,
                                       Rng& rng);

/// Signed scalar broadcast: s > 0 switches units that are off on with probability s,
/// s < 0 switches units that are on off with probability |s|.
Directives apply_scalar_command(std::span<const TclState> states, double command,
                                std::span<const bool> unresponsive, Rng& rng);

struct PriorityStackInput {
    std::span<const TclState> states;
    std::span<const TclParams> params;
    AmbientConditions amb;
    double p_target_next = 0.0;
    double p_total = 0.0;
    std::optional<double> delta_p_safety; // set with direct communication
    std::span<const bool> operator_controlled;
    double p_small = 1.0;
};

struct PriorityStackResult {
    Directives directives;
    double delta_p_internal = 0.0;
    double delta_p_track = 0.0;
    double delta_p_commanded = 0.0;
    bool saturated = false;
};

/// Change in power from units the thermostat will switch on the next step.
double predicted_internal_change(std::span<const TclState> states, std::span<const TclParams> params);

/// Index j* (0-based, inclusive) of the prefix of `ratings` whose sum is
/// closest to `target`; ties go to the shorter prefix.
std::size_t best_prefix(std::span<const double> ratings, double target);

/// Individual-model tracking: per-unit on/off stacks ordered by time to the
/// next internal switch.
PriorityStackResult priority_stack_policy(const PriorityStackInput& in);

struct PiGains {
    double kp = 1.0;
    double ti = 100.0; // seconds
};

/// Discrete PI with back-calculation anti-windup (tracking time constant = ti).
class PiController {
public:
    PiController(PiGains gains, double h_seconds);

    /// Returns the clamped command in [-1, 1].
    double step(double error);

    void set_gains(PiGains g) { gains_ = g; }
    const PiGains& gains() const { return gains_; }
    double integral() const { return integral_; }

private:
    PiGains gains_;
    double h_;
    double integral_ = 0.0;
};

/// Piecewise-linear lookup on blocking fraction knots.
class GainSchedule {
public:
    GainSchedule() = default;
    GainSchedule(std::vector<double> fractions, std::vector<double> values);

    static GainSchedule constant(double v) { return GainSchedule({0.0}, {v}); }

    double at(double blocked_fraction) const;
    bool empty() const { return knots_.empty(); }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> knots_;
    std::vector<double> values_;
};

/// Default blocking levels of the lookup tables (0, 10, ..., 40 %).
std::vector<double> default_blocking_levels();

} // namespace tclsafe
