#include "tclsafe/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace tclsafe {

void Feeder::validate() const {
    if (nodes.empty()) throw std::invalid_argument("Feeder: no nodes");
    if (nodes[0].parent != -1) throw std::invalid_argument("Feeder: node 0 must be the substation");
    if (!(base_kv > 0)) throw std::invalid_argument("Feeder: base voltage must be positive");
    const int n = static_cast<int>(nodes.size());
    for (int i = 1; i < n; ++i) {
        const int p = nodes[i].parent;
        if (p < 0 || p >= n || p == i) throw std::invalid_argument("Feeder: node " + std::to_string(i) + " has no valid parent");
    }
    // Every node must reach the root without revisiting.
    for (int i = 1; i < n; ++i) {
        int cur = i;
        for (int steps = 0; cur != 0; ++steps) {
            if (steps > n) throw std::invalid_argument("Feeder: cycle through node " + std::to_string(i));
            cur = nodes[cur].parent;
        }
    }
    for (int node : house_node)
        if (node < 0 || node >= n) throw std::invalid_argument("Feeder: house attached to unknown node");
}

std::vector<std::vector<int>> Feeder::children() const {
    std::vector<std::vector<int>> ch(nodes.size());
    for (int i = 1; i < static_cast<int>(nodes.size()); ++i) ch[nodes[i].parent].push_back(i);
    return ch;
}

std::vector<int> Feeder::topological_order() const {
    const auto ch = children();
    std::vector<int> order{0};
    order.reserve(nodes.size());
    for (std::size_t k = 0; k < order.size(); ++k)
        for (int c : ch[order[k]]) order.push_back(c);
    return order;
}

std::vector<double> Feeder::distance_from_root() const {
    std::vector<double> d(nodes.size(), 0.0);
    for (int i : topological_order())
        if (i != 0) d[i] = d[nodes[i].parent] + nodes[i].length_km;
    return d;
}

bool Feeder::in_subtree(int node, int ancestor) const {
    for (int cur = node; cur != -1; cur = nodes[cur].parent)
        if (cur == ancestor) return true;
    return false;
}

double reactive_power(double p_kw, double pf) { return p_kw * std::tan(std::acos(pf)); }

std::vector<Complex> node_loads(const Feeder& feeder, std::span<const TclState> states,
                                std::span<const TclParams> params) {
    std::vector<Complex> s(feeder.nodes.size(), Complex{});
    const Complex base{feeder.baseload_kw, reactive_power(feeder.baseload_kw, feeder.baseload_pf)};
    for (std::size_t h = 0; h < feeder.house_node.size(); ++h) {
        Complex load = base;
        if (h < states.size() && states[h].on)
            load += Complex{params[h].p, reactive_power(params[h].p, params[h].pf)};
        s[static_cast<std::size_t>(feeder.house_node[h])] += load;
    }
    return s;
}

PowerFlowResult power_flow(const Feeder& feeder, std::span<const Complex> loads_kva, double tol_pu,
                           int max_iterations) {
    const std::size_t n = feeder.nodes.size();
    if (loads_kva.size() != n) throw std::invalid_argument("power_flow: one load per node required");
    for (const Complex& s : loads_kva)
        if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) throw std::invalid_argument("power_flow: non-finite load");

    const std::vector<int> order = feeder.topological_order();
    const double v0 = feeder.substation_vpu * feeder.base_kv;

    PowerFlowResult res;
    res.voltage_kv.assign(n, Complex{v0, 0.0});
    res.branch_current.assign(n, Complex{});

    for (int it = 1; it <= max_iterations; ++it) {
        // Backward sweep: injections then downstream sums.
        for (std::size_t i = 0; i < n; ++i) res.branch_current[i] = std::conj(loads_kva[i] / res.voltage_kv[i]);
        for (auto k = order.rbegin(); k != order.rend(); ++k) {
            const int i = *k;
            if (i != 0) res.branch_current[feeder.nodes[i].parent] += res.branch_current[i];
        }
        // Forward sweep.
        double max_dv = 0.0;
        for (int i : order) {
            if (i == 0) continue;
            const FeederNode& nd = feeder.nodes[i];
            const Complex z{nd.r_ohm, nd.x_ohm};
            // kV = kV - ohm * A / 1000
            const Complex v = res.voltage_kv[nd.parent] - z * res.branch_current[i] / 1000.0;
            max_dv = std::max(max_dv, std::abs(v - res.voltage_kv[i]) / feeder.base_kv);
            res.voltage_kv[i] = v;
        }
        res.iterations = it;
        if (!std::isfinite(max_dv)) break;
        if (max_dv < tol_pu) {
            // Currents consistent with the converged voltages.
            for (std::size_t i = 0; i < n; ++i) res.branch_current[i] = std::conj(loads_kva[i] / res.voltage_kv[i]);
            for (auto k = order.rbegin(); k != order.rend(); ++k) {
                const int i = *k;
                if (i != 0) res.branch_current[feeder.nodes[i].parent] += res.branch_current[i];
            }
            res.voltage_pu.resize(n);
            for (std::size_t i = 0; i < n; ++i) res.voltage_pu[i] = std::abs(res.voltage_kv[i]) / feeder.base_kv;
            res.substation_power = res.voltage_kv[0] * std::conj(res.branch_current[0]);
            double losses = 0.0;
            for (std::size_t i = 1; i < n; ++i) losses += std::norm(res.branch_current[i]) * feeder.nodes[i].r_ohm / 1000.0;
            res.losses_kw = losses;
            return res;
        }
    }
    throw PowerFlowCollapse("power_flow: no convergence within " + std::to_string(max_iterations) +
                            " iterations (voltage collapse)");
}

const char* to_string(ViolationType t) {
    switch (t) {
    case ViolationType::OverCurrent: return "over_current";
    case ViolationType::UnderVoltage: return "under_voltage";
    case ViolationType::OverVoltage: return "over_voltage";
    case ViolationType::TransformerOverload: return "transformer_overload";
    }
    return "unknown";
}

std::size_t ConstraintReport::count(ViolationType t) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [t](const Violation& v) { return v.type == t; }));
}

ConstraintMonitor::ConstraintMonitor(const Feeder& feeder, double h_hours, ConstraintLimits limits)
    : feeder_(&feeder), limits_(limits) {
    if (!(h_hours > 0)) throw std::invalid_argument("ConstraintMonitor: step must be positive");
    window_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(limits_.transformer_window_hours / h_hours)));
    for (int i = 1; i < static_cast<int>(feeder.nodes.size()); ++i)
        if (feeder.nodes[i].transformer_kva > 0) transformers_.push_back(i);
    history_.resize(transformers_.size());
    sums_.assign(transformers_.size(), 0.0);
}

std::vector<double> ConstraintMonitor::transformer_power(const Feeder& feeder, const PowerFlowResult& flow) {
    std::vector<double> s(feeder.nodes.size(), 0.0);
    for (std::size_t i = 1; i < feeder.nodes.size(); ++i)
        s[i] = std::abs(flow.voltage_kv[feeder.nodes[i].parent]) * std::abs(flow.branch_current[i]);
    return s;
}

ConstraintReport ConstraintMonitor::check(const PowerFlowResult& flow) {
    const Feeder& f = *feeder_;
    ConstraintReport rep;
    rep.tick = tick_++;
    for (int i = 0; i < static_cast<int>(f.nodes.size()); ++i) {
        const FeederNode& nd = f.nodes[i];
        if (nd.service) {
            const double v = flow.voltage_pu[i];
            if (v < limits_.v_min_pu)
                rep.violations.push_back({ViolationType::UnderVoltage, i, v, limits_.v_min_pu, (limits_.v_min_pu - v) / limits_.v_min_pu});
            else if (v > limits_.v_max_pu)
                rep.violations.push_back({ViolationType::OverVoltage, i, v, limits_.v_max_pu, (v - limits_.v_max_pu) / limits_.v_max_pu});
        }
        if (i > 0 && nd.ampacity_a > 0) {
            const double amps = std::abs(flow.branch_current[i]);
            const double lim = limits_.line_fraction * nd.ampacity_a;
            if (amps > lim) rep.violations.push_back({ViolationType::OverCurrent, i, amps, lim, (amps - lim) / lim});
        }
    }
    for (std::size_t k = 0; k < transformers_.size(); ++k) {
        const int i = transformers_[k];
        const double s = std::abs(flow.voltage_kv[f.nodes[i].parent]) * std::abs(flow.branch_current[i]);
        history_[k].push_back(s);
        sums_[k] += s;
        if (history_[k].size() > window_) {
            sums_[k] -= history_[k].front();
            history_[k].pop_front();
        }
        const double avg = sums_[k] / static_cast<double>(history_[k].size());
        const double lim = limits_.transformer_fraction * f.nodes[i].transformer_kva;
        if (avg > lim) rep.violations.push_back({ViolationType::TransformerOverload, i, avg, lim, (avg - lim) / lim});
    }
    return rep;
}

CandidateOrder downstream_order(const Feeder& feeder, ComponentKind kind, int component) {
    const int n = static_cast<int>(feeder.nodes.size());
    if (component < 0 || component >= n || (kind == ComponentKind::Edge && component == 0))
        throw std::invalid_argument("downstream_order: component " + std::to_string(component) + " is not on the feeder");
    const std::vector<double> dist = feeder.distance_from_root();

    CandidateOrder out;
    std::vector<std::tuple<double, double, std::size_t>> below, rest;
    for (std::size_t h = 0; h < feeder.house_node.size(); ++h) {
        const int node = feeder.house_node[h];
        if (feeder.in_subtree(node, component)) {
            below.emplace_back(-dist[node], 0.0, h);
        } else if (kind == ComponentKind::Node) {
            // Branch point: deepest ancestor of `node` on the substation path of `component`.
            int bp = node;
            while (!feeder.in_subtree(component, bp)) bp = feeder.nodes[bp].parent;
            rest.emplace_back(-dist[bp], -dist[node], h);
        }
    }
    std::sort(below.begin(), below.end());
    std::sort(rest.begin(), rest.end());
    for (const auto& e : below) out.units.push_back(std::get<2>(e));
    out.first_stage = out.units.size();
    for (const auto& e : rest) out.units.push_back(std::get<2>(e));
    return out;
}

} // namespace tclsafe
