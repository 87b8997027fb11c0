#pragma once

// Plant model for a population of cooling thermostatically controlled loads:
// first-order thermal dynamics, thermostat hysteresis and compressor lockout.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace tclsafe {

class Rng;

/// Requested power status for a unit. Issued by the aggregator or the operator.
enum class SwitchDirective : std::uint8_t { TurnOff = 0, TurnOn = 1 };

struct TclParams {
    double r = 2.0;          // thermal resistance, degC/kW
    double c = 2.0;          // thermal capacitance, kWh/degC
    double p_theta = 14.0;   // thermal energy transfer rate, kW
    double theta_set = 22.5; // setpoint, degC
    double delta = 0.5;      // deadband half-width, degC
    double zeta = 2.5;       // coefficient of performance
    double p = 5.6;          // electric rating, kW (p_theta / zeta)
    int tau_lock = 60;       // lockout period, steps
    double pf = 0.97;        // power factor

    double lower() const { return theta_set - delta; }
    double upper() const { return theta_set + delta; }
    /// Time constant r*c in hours.
    double time_constant() const { return r * c; }
    /// Steady temperature the unit approaches while running.
    double on_equilibrium(double theta_a) const { return theta_a - r * p_theta; }
    /// Per-step decay factor exp(-h/(c r)) with h in hours.
    double decay(double h_hours) const;

    /// Throws std::invalid_argument if any invariant is broken.
    void validate() const;

    static TclParams make(double r, double c, double p_theta, double theta_set, double delta,
                          double zeta, int tau_lock = 60, double pf = 0.97);
};

struct TclState {
    double theta = 22.5;
    bool on = false;
    int lock_remaining = 0; // steps until an external switch is accepted

    bool locked() const { return lock_remaining > 0; }
};

struct AmbientConditions {
    double theta_a = 32.0; // outdoor temperature, degC
    double h = 2.0 / 3600.0; // step, hours

    double step_seconds() const { return h * 3600.0; }
    static AmbientConditions with_step_seconds(double theta_a, double seconds);
};

/// What happened to a unit during one step.
enum class SwitchEvent : std::uint8_t { None, Internal, External };

struct StepOutcome {
    TclState state;
    SwitchEvent event = SwitchEvent::None;
};

/// Advances one unit by one step.
///
/// Order within the step: thermostat check on the current temperature, then the
/// external directive (only when unlocked and the thermostat did not act), then
/// the temperature update with the post-switch status. Every switch, internal or
/// external, restarts the lockout counter; internal switches ignore it.
StepOutcome step_tcl_detailed(const TclState& state, const TclParams& params,
                              const AmbientConditions& amb,
                              std::optional<SwitchDirective> ext_cmd);

inline TclState step_tcl(const TclState& state, const TclParams& params,
                         const AmbientConditions& amb,
                         std::optional<SwitchDirective> ext_cmd = std::nullopt) {
    return step_tcl_detailed(state, params, amb, ext_cmd).state;
}

/// Whether the thermostat will force a switch on the next step.
bool thermostat_will_switch(const TclState& state, const TclParams& params);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

/// Uniform sampling ranges for heterogeneous air conditioners.
struct ParameterRanges {
    Range r{1.2, 2.5};
    Range c{1.5, 2.5};
    Range p_theta{10.0, 18.0};
    Range theta_set{18.0, 27.0};
    Range delta{0.25, 1.0};
    Range zeta{2.5, 2.5};

    void validate() const;
};

struct PopulationSpec {
    std::size_t n = 200;
    std::uint64_t seed = 1;
    ParameterRanges ranges{};
    int tau_lock = 60;
    double pf = 0.97;
};

struct Population {
    std::vector<TclParams> params;
    std::vector<TclState> states;

    std::size_t size() const { return params.size(); }
};

/// Long-run on-fraction estimate (theta_a - theta_set)/(r p_theta), clamped to [0,1].
double duty_cycle_estimate(const TclParams& params, double theta_a);

/// Draws i.i.d. uniform parameters, uniform temperatures within each deadband and
/// an initial status with on-probability equal to the duty-cycle estimate.
Population generate_population(const PopulationSpec& spec, const AmbientConditions& amb);

/// Fresh initial states for existing parameters, drawn like generate_population.
std::vector<TclState> random_states(std::span<const TclParams> params, const AmbientConditions& amb, Rng& rng);

double total_power(std::span<const TclState> states, std::span<const TclParams> params);

enum class Limit : std::uint8_t { Lower, Upper };

class DeadbandError : public std::runtime_error {
public:
    DeadbandError(Limit which, double theta);
    Limit which() const { return which_; }
    double theta() const { return theta_; }

private:
    Limit which_;
    double theta_;
};

struct TimeToLimits {
    double t_ul = std::numeric_limits<double>::infinity(); // hours, off trajectory
    double t_ll = std::numeric_limits<double>::infinity(); // hours, on trajectory
};

/// Continuous-time solution of the thermal dynamics for the time to reach each
/// deadband edge. Temperatures beyond an edge by less than `tolerance` count as
/// sitting on it; further out throws DeadbandError.
TimeToLimits time_to_limits(const TclState& state, const TclParams& params,
                            const AmbientConditions& amb, double tolerance = 0.05);

/// Temperature above which an off unit is inside its upper margin. The lesser of
/// the temperature that takes tau_lock off-steps to reach the upper limit and the
/// temperature reached tau_lock on-steps after leaving it.
double upper_margin_temperature(const TclParams& params, const AmbientConditions& amb);

/// Mirror of upper_margin_temperature for the lower deadband edge.
double lower_margin_temperature(const TclParams& params, const AmbientConditions& amb);

} // namespace tclsafe
