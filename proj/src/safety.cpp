#include "tclsafe/safety.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace tclsafe {

std::size_t SafetyAssignment::blocked_count() const {
    return static_cast<std::size_t>(
        std::count_if(tags.begin(), tags.end(), [](const SafetyTag& t) { return t.kind == SafetyKind::Blocked; }));
}

std::size_t SafetyAssignment::grouped_count() const {
    return static_cast<std::size_t>(
        std::count_if(tags.begin(), tags.end(), [](const SafetyTag& t) { return t.kind == SafetyKind::Group; }));
}

double SafetyAssignment::controlled_fraction() const {
    return tags.empty() ? 0.0 : static_cast<double>(controlled_count()) / static_cast<double>(tags.size());
}

void SafetyAssignment::validate() const {
    std::vector<int> seen(tags.size(), -1);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& grp = groups[g];
        if (grp.id != static_cast<int>(g)) throw std::invalid_argument("SafetyAssignment: group ids must be 0..G-1");
        for (std::size_t m : grp.members) {
            if (m >= tags.size()) throw std::invalid_argument("SafetyAssignment: group member out of range");
            if (seen[m] != -1) throw std::invalid_argument("SafetyAssignment: unit in more than one group");
            seen[m] = grp.id;
            if (tags[m].kind != SafetyKind::Group || tags[m].group != grp.id)
                throw std::invalid_argument("SafetyAssignment: member tag does not name its group");
        }
        const int n = static_cast<int>(grp.members.size());
        if (grp.bound < 0 || grp.bound > n) throw std::invalid_argument("SafetyAssignment: bound outside [0, members]");
    }
    for (std::size_t i = 0; i < tags.size(); ++i)
        if (tags[i].kind == SafetyKind::Group && seen[i] != tags[i].group)
            throw std::invalid_argument("SafetyAssignment: group tag without membership");
}

std::vector<bool> blocking_step(const SafetyAssignment& assignment) {
    std::vector<bool> drop(assignment.size(), false);
    for (std::size_t i = 0; i < assignment.size(); ++i) drop[i] = assignment.tags[i].kind == SafetyKind::Blocked;
    return drop;
}

std::vector<bool> operator_controlled_mask(const SafetyAssignment& assignment) {
    std::vector<bool> mask(assignment.size(), false);
    for (std::size_t i = 0; i < assignment.size(); ++i) mask[i] = assignment.tags[i].kind != SafetyKind::Free;
    return mask;
}

namespace {

// Upper-bound logic written once; the lower bound is the same algorithm with
// on and off exchanged (bounding the off-count by n - H_lower).
struct GroupView {
    bool mirror;
    std::span<const TclState> states;
    std::span<const TclParams> params;
    const AmbientConditions& amb;

    bool active(std::size_t i) const { return states[i].on != mirror; }
    double theta(std::size_t i) const { return states[i].theta; }
    double margin(std::size_t i) const {
        return mirror ? lower_margin_temperature(params[i], amb) : upper_margin_temperature(params[i], amb);
    }
    bool in_margin(std::size_t i) const { return mirror ? theta(i) <= margin(i) : theta(i) >= margin(i); }
    TimeToLimits ttl(std::size_t i) const { return time_to_limits(states[i], params[i], amb, 0.5); }
    double time_to_activation(std::size_t i) const { return mirror ? ttl(i).t_ll : ttl(i).t_ul; }
    double time_to_deactivation(std::size_t i) const { return mirror ? ttl(i).t_ul : ttl(i).t_ll; }
    SwitchDirective activate() const { return mirror ? SwitchDirective::TurnOff : SwitchDirective::TurnOn; }
    SwitchDirective deactivate() const { return mirror ? SwitchDirective::TurnOn : SwitchDirective::TurnOff; }
    bool forced(std::size_t i) const { return thermostat_will_switch(states[i], params[i]); }
};

} // namespace

ModeCountStep ModeCountController::step(std::span<const TclState> states, std::span<const TclParams> params,
                                        const AmbientConditions& amb) {
    const bool mirror = group_.kind == BoundKind::Lower;
    const GroupView v{mirror, states, params, amb};
    const auto& members = group_.members;
    const int n = static_cast<int>(members.size());
    const int bound = mirror ? n - group_.bound : group_.bound;

    ModeCountStep out;
    int active = 0;
    for (std::size_t m : members) {
        if (states[m].on) ++out.on_count;
        if (v.active(m)) ++active;
    }
    int dH = bound - active;

    std::set<std::size_t> member_set(members.begin(), members.end());
    for (auto it = reservations_.begin(); it != reservations_.end();) {
        const std::size_t g = it->first, s = it->second;
        const bool drop = v.active(g) || !member_set.count(s) || !v.active(s) || v.in_margin(s) || v.forced(s);
        it = drop ? reservations_.erase(it) : std::next(it);
    }
    std::set<std::size_t> reserved_partners;
    for (const auto& [g, s] : reservations_) reserved_partners.insert(s);

    std::set<std::size_t> used;
    auto issue = [&](std::size_t i, SwitchDirective d) {
        out.directives.emplace_back(i, d);
        used.insert(i);
    };

    // Over the bound (initial conditions or thermostat forcing): deactivate
    // units farthest from their own deactivation edge first.
    if (dH < 0) {
        std::vector<std::pair<double, std::size_t>> cand;
        for (std::size_t m : members)
            if (v.active(m) && !states[m].locked() && !v.forced(m) && !reserved_partners.count(m))
                cand.emplace_back(-v.time_to_deactivation(m), m);
        std::sort(cand.begin(), cand.end());
        for (const auto& [key, m] : cand) {
            if (dH >= 0) break;
            issue(m, v.deactivate());
            ++dH;
        }
    }

    auto partner_ok = [&](std::size_t s, std::size_t g) {
        if (used.count(s) || !v.active(s) || states[s].locked() || v.in_margin(s) || v.forced(s)) return false;
        if (reserved_partners.count(s)) {
            auto it = reservations_.find(g);
            return it != reservations_.end() && it->second == s;
        }
        return true;
    };
    auto find_partner = [&](std::size_t g) -> std::optional<std::size_t> {
        std::optional<std::size_t> best;
        double best_t = -1.0;
        for (std::size_t s : members) {
            if (s == g || !partner_ok(s, g)) continue;
            const double t = v.time_to_activation(s);
            if (!best || t > best_t) {
                best = s;
                best_t = t;
            }
        }
        return best;
    };

    std::vector<std::pair<double, std::size_t>> margin_units;
    for (std::size_t m : members)
        if (!v.active(m) && !used.count(m) && v.in_margin(m)) margin_units.emplace_back(v.time_to_activation(m), m);
    std::sort(margin_units.begin(), margin_units.end());

    for (const auto& [t, g] : margin_units) {
        if (!states[g].locked()) {
            if (dH > 0) {
                issue(g, v.activate());
                --dH;
                reservations_.erase(g);
                continue;
            }
            std::optional<std::size_t> s;
            if (auto it = reservations_.find(g); it != reservations_.end() && partner_ok(it->second, g))
                s = it->second;
            else
                s = find_partner(g);
            if (s) {
                issue(g, v.activate());
                issue(*s, v.deactivate());
                reserved_partners.erase(*s);
                reservations_.erase(g);
            }
        } else {
            if (reservations_.count(g)) continue;
            if (auto s = find_partner(g)) {
                reservations_[g] = *s;
                reserved_partners.insert(*s);
            } else if (dH > 0) {
                --dH;
            }
        }
    }

    // Predicted active count after this tick, thermostat included.
    int next_active = active;
    std::set<std::size_t> directed;
    for (const auto& [i, d] : out.directives) {
        directed.insert(i);
        if (states[i].locked() || v.forced(i)) continue;
        next_active += d == v.activate() ? 1 : -1;
    }
    for (std::size_t m : members) {
        if (!v.forced(m)) continue;
        next_active += v.active(m) ? -1 : 1;
    }
    out.infeasible = active <= bound && next_active > bound;
    return out;
}

BoundSearchResult find_feasible_bound(std::span<const std::size_t> members, BoundKind kind,
                                      std::span<const TclState> initial,
                                      std::span<const TclParams> params,
                                      const AmbientConditions& amb, int horizon_steps) {
    const int n = static_cast<int>(members.size());
    BoundSearchResult res{kind == BoundKind::Upper ? n : 0, 0};
    if (n == 0) return res;

    std::vector<TclState> local0;
    std::vector<TclParams> local_params;
    std::vector<double> drift;
    for (std::size_t m : members) {
        local0.push_back(initial[m]);
        local_params.push_back(params[m]);
        const TclParams& p = params[m];
        drift.push_back((1.0 - p.decay(amb.h)) * (std::abs(amb.theta_a - p.lower()) + p.r * p.p_theta) + 1e-9);
    }
    std::vector<std::size_t> local_members(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) local_members[k] = k;

    auto feasible = [&](int bound) {
        ++res.simulations;
        ModeCountController ctrl({0, local_members, kind, bound});
        std::vector<TclState> st = local0;
        bool settled = false;
        for (int t = 0; t < horizon_steps; ++t) {
            int h = 0;
            for (const auto& s : st) h += s.on ? 1 : 0;
            const bool within = kind == BoundKind::Upper ? h <= bound : h >= bound;
            if (within) settled = true;
            else if (settled) return false;

            ModeCountStep step = ctrl.step(st, local_params, amb);
            if (settled && step.infeasible) return false;
            Directives d(st.size());
            for (const auto& [i, dir] : step.directives) d[i] = dir;
            for (std::size_t k = 0; k < st.size(); ++k) {
                st[k] = step_tcl(st[k], local_params[k], amb, d[k]);
                const TclParams& p = local_params[k];
                if (st[k].theta > p.upper() + drift[k] || st[k].theta < p.lower() - drift[k]) return false;
            }
        }
        int h = 0;
        for (const auto& s : st) h += s.on ? 1 : 0;
        return settled && (kind == BoundKind::Upper ? h <= bound : h >= bound);
    };

    if (kind == BoundKind::Upper) {
        for (int b = n - 1; b >= 0; --b) {
            if (!feasible(b)) break;
            res.bound = b;
        }
    } else {
        for (int b = 1; b <= n; ++b) {
            if (!feasible(b)) break;
            res.bound = b;
        }
    }
    return res;
}

CommPayload comm_payload(const SafetyAssignment& assignment,
                         std::span<const std::pair<std::size_t, SwitchDirective>> pending,
                         std::span<const TclState> states, std::span<const TclParams> params) {
    CommPayload out;
    out.blocked_count = assignment.blocked_count();
    out.blocked_fraction = assignment.size() ? static_cast<double>(out.blocked_count) / assignment.size() : 0.0;
    for (const auto& [i, d] : pending) {
        const TclState& s = states[i];
        if (s.locked() || thermostat_will_switch(s, params[i])) continue;
        const bool want_on = d == SwitchDirective::TurnOn;
        if (want_on == s.on) continue;
        out.delta_p_safety += want_on ? params[i].p : -params[i].p;
    }
    return out;
}

} // namespace tclsafe
