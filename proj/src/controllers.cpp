#include "tclsafe/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace tclsafe {

bool ProbabilisticCommand::switches_on() const {
    const std::size_t n = u.size() / 2;
    return std::any_of(u.begin(), u.begin() + static_cast<std::ptrdiff_t>(n), [](double v) { return v > 0; });
}

bool ProbabilisticCommand::switches_off() const {
    const std::size_t n = u.size() / 2;
    return std::any_of(u.begin() + static_cast<std::ptrdiff_t>(n), u.end(), [](double v) { return v > 0; });
}

ProbabilisticCommand aggregate_policy(const Eigen::VectorXd& x_hat, const Eigen::MatrixXd& As,
                                      double p_on_total, double p_target_next, double gain,
                                      const BinConfig& cfg) {
    if (!(p_on_total > 0)) throw std::invalid_argument("aggregate_policy: p_on_total must be positive");
    const int n = cfg.n_intervals;
    const Eigen::VectorXd x_pred = As * x_hat;
    const Eigen::MatrixXd C = output_matrix(p_on_total, cfg);
    const double predicted = C.row(0).dot(x_pred);
    const double rhs = gain * (p_target_next - predicted) / p_on_total;

    ProbabilisticCommand cmd = ProbabilisticCommand::zero(cfg);
    if (rhs == 0.0) return cmd;

    // Priority: off bins from hottest (n-1) down, on bins from coolest (2n-1) down.
    const int first = rhs > 0 ? n - 1 : 2 * n - 1;
    const int last = rhs > 0 ? 0 : n;
    double need = std::abs(rhs);
    for (int j = first; j >= last && need > 0.0; --j) {
        const double avail = std::max(x_pred(j), 0.0);
        if (avail <= need) {
            cmd.u[static_cast<std::size_t>(j)] = 1.0;
            need -= avail;
        } else {
            cmd.u[static_cast<std::size_t>(j)] = need / avail;
            need = 0.0;
        }
    }
    return cmd;
}

Directives apply_probabilistic_command(std::span<const TclState> states,
                                       std::span<const TclParams> params,
                                       const ProbabilisticCommand& cmd,
                                       std::span<const bool> unresponsive, const BinConfig& cfg,
                                       Rng& rng) {
    if (static_cast<int>(cmd.u.size()) != cfg.unlocked_bins())
        throw std::invalid_argument("apply_probabilistic_command: command has wrong length");
    Directives out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!unresponsive.empty() && unresponsive[i]) continue;
        const TclState& s = states[i];
        if (s.locked()) continue;
        const int bin = bin_index(s, params[i], cfg);
        const double prob = cmd.u[static_cast<std::size_t>(bin)];
        if (prob <= 0.0) continue;
        // Draw only for units with a nonzero probability so unrelated bins do
        // not perturb the random stream.
        if (prob >= 1.0 || rng.bernoulli(prob))
            out[i] = s.on ? SwitchDirective::TurnOff : SwitchDirective::TurnOn;
    }
    return out;
}

Directives apply_scalar_command(std::span<const TclState> states, double command,
                                std::span<const bool> unresponsive, Rng& rng) {
    Directives out(states.size());
    const double prob = std::min(std::abs(command), 1.0);
    if (prob == 0.0) return out;
    const bool target_on = command > 0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!unresponsive.empty() && unresponsive[i]) continue;
        const TclState& s = states[i];
        if (s.locked() || s.on == target_on) continue;
        if (prob >= 1.0 || rng.bernoulli(prob))
            out[i] = target_on ? SwitchDirective::TurnOn : SwitchDirective::TurnOff;
    }
    return out;
}

double predicted_internal_change(std::span<const TclState> states, std::span<const TclParams> params) {
    double dp = 0.0;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!thermostat_will_switch(states[i], params[i])) continue;
        dp += states[i].on ? -params[i].p : params[i].p;
    }
    return dp;
}

std::size_t best_prefix(std::span<const double> ratings, double target) {
    if (ratings.empty()) throw std::invalid_argument("best_prefix: empty stack");
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t j = 0; j < ratings.size(); ++j) {
        sum += ratings[j];
        const double err = std::abs(sum - target);
        if (err < best_err) {
            best_err = err;
            best = j;
        }
        // Sums only grow, so once past the target the error only grows too.
        if (sum > target) break;
    }
    return best;
}

namespace {

struct StackEntry {
    double time;
    std::size_t unit;
};

} // namespace

PriorityStackResult priority_stack_policy(const PriorityStackInput& in) {
    const std::size_t n = in.states.size();
    if (in.params.size() != n) throw std::invalid_argument("priority_stack_policy: misaligned inputs");

    PriorityStackResult res;
    res.directives.assign(n, std::nullopt);
    res.delta_p_internal = predicted_internal_change(in.states, in.params);
    res.delta_p_track = in.p_target_next - (in.p_total + res.delta_p_internal);
    if (in.delta_p_safety) res.delta_p_track -= *in.delta_p_safety;

    const bool up = res.delta_p_track >= in.p_small;
    const bool down = res.delta_p_track <= -in.p_small;
    if (!up && !down) return res;

    std::vector<StackEntry> stack;
    for (std::size_t i = 0; i < n; ++i) {
        const TclState& s = in.states[i];
        if (s.locked() || s.on != down) continue;
        if (!in.operator_controlled.empty() && in.operator_controlled[i]) continue;
        if (thermostat_will_switch(s, in.params[i])) continue;
        const TimeToLimits ttl = time_to_limits(s, in.params[i], in.amb);
        stack.push_back({up ? ttl.t_ul : ttl.t_ll, i});
    }
    if (stack.empty()) {
        res.saturated = true;
        return res;
    }
    std::sort(stack.begin(), stack.end(), [](const StackEntry& a, const StackEntry& b) {
        return a.time < b.time || (a.time == b.time && a.unit < b.unit);
    });

    std::vector<double> ratings;
    ratings.reserve(stack.size());
    for (const auto& e : stack) ratings.push_back(in.params[e.unit].p);
    const double target = std::abs(res.delta_p_track);
    const std::size_t jstar = best_prefix(ratings, target);
    double switched = 0.0;
    for (std::size_t k = 0; k <= jstar; ++k) {
        res.directives[stack[k].unit] = up ? SwitchDirective::TurnOn : SwitchDirective::TurnOff;
        switched += ratings[k];
    }
    res.delta_p_commanded = up ? switched : -switched;
    res.saturated = jstar + 1 == stack.size() && switched < target - in.p_small;
    return res;
}

PiController::PiController(PiGains gains, double h_seconds) : gains_(gains), h_(h_seconds) {
    if (!(h_ > 0) || !(gains_.ti > 0)) throw std::invalid_argument("PiController: step and ti must be positive");
}

double PiController::step(double error) {
    const double v = gains_.kp * error + integral_;
    const double u = std::clamp(v, -1.0, 1.0);
    integral_ += gains_.kp * h_ / gains_.ti * error + h_ / gains_.ti * (u - v);
    return u;
}

GainSchedule::GainSchedule(std::vector<double> fractions, std::vector<double> values)
    : knots_(std::move(fractions)), values_(std::move(values)) {
    if (knots_.empty() || knots_.size() != values_.size())
        throw std::invalid_argument("GainSchedule: need matching, nonempty knots and values");
    if (!std::is_sorted(knots_.begin(), knots_.end()) ||
        std::adjacent_find(knots_.begin(), knots_.end()) != knots_.end())
        throw std::invalid_argument("GainSchedule: knots must be strictly increasing");
}

double GainSchedule::at(double blocked_fraction) const {
    if (knots_.empty()) throw std::logic_error("GainSchedule: empty schedule");
    const double f = std::clamp(blocked_fraction, knots_.front(), knots_.back());
    auto it = std::upper_bound(knots_.begin(), knots_.end(), f);
    if (it == knots_.end()) return values_.back();
    if (it == knots_.begin()) return values_.front();
    const std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
    const std::size_t lo = hi - 1;
    const double w = (f - knots_[lo]) / (knots_[hi] - knots_[lo]);
    return values_[lo] + w * (values_[hi] - values_[lo]);
}

std::vector<double> default_blocking_levels() { return {0.0, 0.1, 0.2, 0.3, 0.4}; }

} // namespace tclsafe
