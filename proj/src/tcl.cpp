#include "tclsafe/tcl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tclsafe/random.hpp"

namespace tclsafe {

double TclParams::decay(double h_hours) const { return std::exp(-h_hours / (c * r)); }

void TclParams::validate() const {
    if (!(r > 0 && c > 0 && p_theta > 0 && delta > 0 && zeta > 0))
        throw std::invalid_argument("TclParams: r, c, p_theta, delta and zeta must be positive");
    if (p != p_theta / zeta)
        throw std::invalid_argument("TclParams: p must equal p_theta / zeta");
    if (tau_lock < 0) throw std::invalid_argument("TclParams: negative lockout");
    if (!(pf > 0 && pf <= 1)) throw std::invalid_argument("TclParams: power factor outside (0,1]");
}

TclParams TclParams::make(double r, double c, double p_theta, double theta_set, double delta,
                          double zeta, int tau_lock, double pf) {
    TclParams out;
    out.r = r;
    out.c = c;
    out.p_theta = p_theta;
    out.theta_set = theta_set;
    out.delta = delta;
    out.zeta = zeta;
    out.p = p_theta / zeta;
    out.tau_lock = tau_lock;
    out.pf = pf;
    out.validate();
    return out;
}

AmbientConditions AmbientConditions::with_step_seconds(double theta_a, double seconds) {
    if (!(seconds > 0)) throw std::invalid_argument("AmbientConditions: step must be positive");
    return AmbientConditions{theta_a, seconds / 3600.0};
}

bool thermostat_will_switch(const TclState& state, const TclParams& params) {
    return (!state.on && state.theta >= params.upper()) || (state.on && state.theta <= params.lower());
}

StepOutcome step_tcl_detailed(const TclState& state, const TclParams& params,
                              const AmbientConditions& amb,
                              std::optional<SwitchDirective> ext_cmd) {
    if (!std::isfinite(state.theta))
        throw std::invalid_argument("step_tcl: non-finite temperature");

    StepOutcome out{state, SwitchEvent::None};
    TclState& next = out.state;

    bool thermostat_acted = false;
    if (state.theta >= params.upper()) {
        thermostat_acted = true;
        if (!state.on) {
            next.on = true;
            out.event = SwitchEvent::Internal;
        }
    } else if (state.theta <= params.lower()) {
        thermostat_acted = true;
        if (state.on) {
            next.on = false;
            out.event = SwitchEvent::Internal;
        }
    }

    if (!thermostat_acted && ext_cmd && state.lock_remaining == 0) {
        const bool want_on = *ext_cmd == SwitchDirective::TurnOn;
        if (want_on != state.on) {
            next.on = want_on;
            out.event = SwitchEvent::External;
        }
    }

    if (out.event != SwitchEvent::None)
        next.lock_remaining = params.tau_lock;
    else if (next.lock_remaining > 0)
        --next.lock_remaining;

    const double a = params.decay(amb.h);
    const double target = next.on ? params.on_equilibrium(amb.theta_a) : amb.theta_a;
    next.theta = a * state.theta + (1.0 - a) * target;
    return out;
}

void ParameterRanges::validate() const {
    for (const Range* rg : {&r, &c, &p_theta, &theta_set, &delta, &zeta}) {
        if (!(rg->hi >= rg->lo) || !std::isfinite(rg->lo) || !std::isfinite(rg->hi))
            throw std::invalid_argument("ParameterRanges: empty or invalid range");
    }
    if (!(r.lo > 0 && c.lo > 0 && p_theta.lo > 0 && delta.lo > 0 && zeta.lo > 0))
        throw std::invalid_argument("ParameterRanges: physical parameters must be positive");
}

double duty_cycle_estimate(const TclParams& params, double theta_a) {
    return std::clamp((theta_a - params.theta_set) / (params.r * params.p_theta), 0.0, 1.0);
}

Population generate_population(const PopulationSpec& spec, const AmbientConditions& amb) {
    if (spec.n == 0) throw std::invalid_argument("generate_population: n must be at least 1");
    spec.ranges.validate();

    Rng rng(spec.seed);
    Population pop;
    pop.params.reserve(spec.n);
    pop.states.reserve(spec.n);
    const auto& rg = spec.ranges;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double r = rng.uniform(rg.r.lo, rg.r.hi);
        const double c = rng.uniform(rg.c.lo, rg.c.hi);
        const double p_theta = rng.uniform(rg.p_theta.lo, rg.p_theta.hi);
        const double theta_set = rng.uniform(rg.theta_set.lo, rg.theta_set.hi);
        const double delta = rng.uniform(rg.delta.lo, rg.delta.hi);
        const double zeta = rng.uniform(rg.zeta.lo, rg.zeta.hi);
        TclParams p = TclParams::make(r, c, p_theta, theta_set, delta, zeta, spec.tau_lock, spec.pf);

        TclState s;
        s.theta = rng.uniform(p.lower(), p.upper());
        s.on = rng.bernoulli(duty_cycle_estimate(p, amb.theta_a));
        s.lock_remaining = 0;
        pop.params.push_back(p);
        pop.states.push_back(s);
    }
    return pop;
}

std::vector<TclState> random_states(std::span<const TclParams> params, const AmbientConditions& amb, Rng& rng) {
    std::vector<TclState> out;
    out.reserve(params.size());
    for (const TclParams& p : params) {
        TclState s;
        s.theta = rng.uniform(p.lower(), p.upper());
        s.on = rng.bernoulli(duty_cycle_estimate(p, amb.theta_a));
        out.push_back(s);
    }
    return out;
}

double total_power(std::span<const TclState> states, std::span<const TclParams> params) {
    if (states.size() != params.size())
        throw std::invalid_argument("total_power: states and params are not aligned");
    double sum = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i].on) sum += params[i].p;
    return sum;
}

DeadbandError::DeadbandError(Limit which, double theta)
    : std::runtime_error(std::string("temperature ") + std::to_string(theta) +
                         (which == Limit::Upper ? " exceeds the upper limit" : " is below the lower limit")),
      which_(which), theta_(theta) {}

TimeToLimits time_to_limits(const TclState& state, const TclParams& params,
                            const AmbientConditions& amb, double tolerance) {
    const double lo = params.lower();
    const double hi = params.upper();
    if (state.theta > hi + tolerance) throw DeadbandError(Limit::Upper, state.theta);
    if (state.theta < lo - tolerance) throw DeadbandError(Limit::Lower, state.theta);
    const double theta = std::clamp(state.theta, lo, hi);
    const double tc = params.time_constant();

    TimeToLimits out;
    if (amb.theta_a > hi) out.t_ul = tc * std::log((amb.theta_a - theta) / (amb.theta_a - hi));
    const double eq = params.on_equilibrium(amb.theta_a);
    if (eq < lo) out.t_ll = tc * std::log((theta - eq) / (lo - eq));
    return out;
}

double upper_margin_temperature(const TclParams& params, const AmbientConditions& amb) {
    const double hi = params.upper();
    if (params.tau_lock == 0) return hi;
    const double a_tau = std::pow(params.decay(amb.h), params.tau_lock);

    double from_off = std::numeric_limits<double>::infinity();
    if (amb.theta_a > hi) from_off = amb.theta_a - (amb.theta_a - hi) / a_tau;
    const double eq = params.on_equilibrium(amb.theta_a);
    const double after_on = eq + (hi - eq) * a_tau;
    return std::min(from_off, after_on);
}

double lower_margin_temperature(const TclParams& params, const AmbientConditions& amb) {
    const double lo = params.lower();
    if (params.tau_lock == 0) return lo;
    const double a_tau = std::pow(params.decay(amb.h), params.tau_lock);

    const double eq = params.on_equilibrium(amb.theta_a);
    double from_on = -std::numeric_limits<double>::infinity();
    if (eq < lo) from_on = eq + (lo - eq) / a_tau;
    const double after_off = amb.theta_a + (lo - amb.theta_a) * a_tau;
    return std::max(from_on, after_off);
}

} // namespace tclsafe
