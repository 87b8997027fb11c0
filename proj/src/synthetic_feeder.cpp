#include "tclsafe/synthetic_feeder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tclsafe/random.hpp"

namespace tclsafe {

namespace {

int add_node(Feeder& f, std::string name, int parent, double km, Complex z) {
    FeederNode nd;
    nd.name = std::move(name);
    nd.parent = parent;
    nd.length_km = km;
    nd.r_ohm = z.real();
    nd.x_ohm = z.imag();
    f.nodes.push_back(nd);
    return static_cast<int>(f.nodes.size()) - 1;
}

} // namespace

FeederLayout build_synthetic_feeder(const SyntheticFeederSpec& spec, std::span<const double> duty) {
    if (spec.trunk_nodes < 1 || spec.lateral_nodes < 0) throw std::invalid_argument("synthetic feeder: bad topology");
    if (spec.houses_min < 1 || spec.houses_max < spec.houses_min)
        throw std::invalid_argument("synthetic feeder: bad houses per service node");
    if (spec.heavy_laterals < 1 || spec.heavy_laterals > spec.trunk_nodes || spec.lateral_nodes < 1)
        throw std::invalid_argument("synthetic feeder: heavy laterals must exist");
    if (!(spec.heavy_weight > 0)) throw std::invalid_argument("synthetic feeder: heavy weight must be positive");
    const std::size_t n = duty.size();
    const std::size_t weak_total = static_cast<std::size_t>(spec.weak_nodes) * spec.weak_houses;
    if (n < weak_total + static_cast<std::size_t>(spec.houses_min))
        throw std::invalid_argument("synthetic feeder: too few houses");

    FeederLayout out;
    Feeder& f = out.feeder;
    f.base_kv = spec.base_kv;
    f.substation_vpu = spec.substation_vpu;
    f.baseload_kw = spec.baseload_kw;
    f.baseload_pf = spec.baseload_pf;
    add_node(f, "substation", -1, 0.0, {});

    std::vector<int> primary;
    std::vector<double> weight;
    std::vector<int> lateral_end;
    int prev = 0;
    for (int t = 0; t < spec.trunk_nodes; ++t) {
        prev = add_node(f, "T" + std::to_string(t + 1), prev, spec.trunk_km, spec.trunk_z_per_km * spec.trunk_km);
        primary.push_back(prev);
        weight.push_back(1.0);
        const bool heavy = t >= spec.trunk_nodes - spec.heavy_laterals;
        int lat = prev;
        for (int l = 0; l < spec.lateral_nodes; ++l) {
            lat = add_node(f, "L" + std::to_string(t + 1) + "." + std::to_string(l + 1), lat, spec.lateral_km,
                           spec.lateral_z_per_km * spec.lateral_km);
            primary.push_back(lat);
            weight.push_back(heavy ? spec.heavy_weight : 1.0);
        }
        lateral_end.push_back(lat);
    }

    for (int w = 0; w < spec.weak_nodes; ++w) {
        const int parent = lateral_end[static_cast<std::size_t>(spec.trunk_nodes - 1 - w % spec.heavy_laterals)];
        const int id = add_node(f, "W" + std::to_string(w + 1), parent, spec.service_km, spec.weak_service_z_unit);
        f.nodes[id].service = true;
        out.weak_nodes.push_back(id);
    }

    const std::size_t regular_houses = n - weak_total;
    const double mean_houses = 0.5 * (spec.houses_min + spec.houses_max);
    std::size_t services = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(regular_houses) / mean_houses)));
    services = std::clamp(services, (regular_houses + spec.houses_max - 1) / spec.houses_max,
                          regular_houses / spec.houses_min);
    // Largest-remainder split of the service nodes by weight.
    const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
    std::vector<std::size_t> per_node(primary.size());
    std::vector<std::pair<double, std::size_t>> remainder;
    std::size_t given = 0;
    for (std::size_t i = 0; i < primary.size(); ++i) {
        const double share = static_cast<double>(services) * weight[i] / wsum;
        per_node[i] = static_cast<std::size_t>(share);
        given += per_node[i];
        remainder.emplace_back(-(share - std::floor(share)), i);
    }
    std::sort(remainder.begin(), remainder.end());
    for (std::size_t k = 0; given < services; ++k, ++given) ++per_node[remainder[k % remainder.size()].second];
    std::vector<int> service_parent;
    for (std::size_t i = 0; i < primary.size(); ++i)
        for (std::size_t k = 0; k < per_node[i]; ++k) service_parent.push_back(primary[i]);

    std::vector<int> service_ids;
    for (std::size_t s = 0; s < services; ++s) {
        const int parent = service_parent[s];
        const int id = add_node(f, "S" + std::to_string(s + 1), parent, spec.service_km, spec.service_z);
        f.nodes[id].service = true;
        service_ids.push_back(id);
    }

    Rng rng(spec.seed);
    // Houses per regular service node: start at the minimum, spread the rest.
    std::vector<std::size_t> count(services, static_cast<std::size_t>(spec.houses_min));
    std::size_t left = regular_houses - services * static_cast<std::size_t>(spec.houses_min);
    while (left > 0) {
        const std::size_t s = static_cast<std::size_t>(rng.next() % services);
        if (count[s] < static_cast<std::size_t>(spec.houses_max)) {
            ++count[s];
            --left;
        }
    }

    // Weak nodes take the houses whose duty cycle is nearest the target.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(duty[a] - spec.weak_duty) < std::abs(duty[b] - spec.weak_duty);
    });
    f.house_node.assign(n, -1);
    for (std::size_t k = 0; k < weak_total; ++k) f.house_node[order[k]] = out.weak_nodes[k / spec.weak_houses];

    std::vector<std::size_t> rest(order.begin() + static_cast<std::ptrdiff_t>(weak_total), order.end());
    std::sort(rest.begin(), rest.end());
    for (std::size_t i = rest.size(); i > 1; --i) std::swap(rest[i - 1], rest[static_cast<std::size_t>(rng.next() % i)]);
    std::size_t k = 0;
    for (std::size_t s = 0; s < services; ++s)
        for (std::size_t c = 0; c < count[s]; ++c) f.house_node[rest[k++]] = service_ids[s];

    f.validate();
    return out;
}

namespace {

// Receiving-end voltage magnitude of a single impedance feeding a constant
// power load from a source of magnitude v1 (all SI).
double two_bus_voltage(double v1, Complex z, Complex s) {
    const double a = v1 * v1 - 2.0 * (z.real() * s.real() + z.imag() * s.imag());
    const double disc = a * a - 4.0 * std::norm(z) * std::norm(s);
    if (disc < 0) return 0.0;
    return std::sqrt(0.5 * (a + std::sqrt(disc)));
}

} // namespace

CalibrationResult calibrate_feeder(FeederLayout& layout, const SyntheticFeederSpec& spec,
                                   std::span<const std::vector<Complex>> snapshots, double v_min_pu,
                                   std::span<const Complex> peak_kva) {
    Feeder& f = layout.feeder;
    if (snapshots.empty()) throw std::invalid_argument("calibrate_feeder: no load snapshots");
    for (const auto& s : snapshots)
        if (s.size() != f.nodes.size()) throw std::invalid_argument("calibrate_feeder: snapshot size mismatch");
    if (!peak_kva.empty() && peak_kva.size() != f.nodes.size())
        throw std::invalid_argument("calibrate_feeder: peak load size mismatch");

    const double target = (v_min_pu + spec.weak_margin_pu) * f.base_kv * 1000.0;
    CalibrationResult res;
    res.weak_scale.assign(layout.weak_nodes.size(), 0.0);
    for (int w : layout.weak_nodes) {
        f.nodes[w].r_ohm = 0.0;
        f.nodes[w].x_ohm = 0.0;
    }

    // Parent voltages barely depend on the weak impedances, so a few passes of
    // "solve flows, fit each weak node against its parent" converge.
    for (int pass = 0; pass < 4; ++pass) {
        std::vector<std::vector<double>> parent_v(layout.weak_nodes.size());
        for (const auto& loads : snapshots) {
            const PowerFlowResult flow = power_flow(f, loads);
            for (std::size_t w = 0; w < layout.weak_nodes.size(); ++w)
                parent_v[w].push_back(std::abs(flow.voltage_kv[f.nodes[layout.weak_nodes[w]].parent]) * 1000.0);
        }
        for (std::size_t w = 0; w < layout.weak_nodes.size(); ++w) {
            const int node = layout.weak_nodes[w];
            auto min_v = [&](double scale) {
                double m = std::numeric_limits<double>::infinity();
                for (std::size_t t = 0; t < snapshots.size(); ++t)
                    m = std::min(m, two_bus_voltage(parent_v[w][t], spec.weak_service_z_unit * scale,
                                                    snapshots[t][node] * 1000.0));
                return m;
            };
            if (min_v(0.0) <= target) throw std::runtime_error("calibrate_feeder: weak node parent already below target");
            double lo = 0.0, hi = 1.0;
            while (min_v(hi) > target) hi *= 2.0;
            for (int it = 0; it < 100; ++it) {
                const double mid = 0.5 * (lo + hi);
                (min_v(mid) > target ? lo : hi) = mid;
            }
            if (!peak_kva.empty()) {
                // Parent at its lowest snapshot voltage, every unit on.
                const double v_par = *std::min_element(parent_v[w].begin(), parent_v[w].end());
                const double floor_v = spec.peak_floor_pu * f.base_kv * 1000.0;
                auto peak_v = [&](double scale) {
                    return two_bus_voltage(v_par, spec.weak_service_z_unit * scale, peak_kva[node] * 1000.0);
                };
                if (peak_v(lo) < floor_v) {
                    double a = 0.0, b = lo;
                    for (int it = 0; it < 100; ++it) {
                        const double mid = 0.5 * (a + b);
                        (peak_v(mid) >= floor_v ? a : b) = mid;
                    }
                    lo = a;
                }
            }
            res.weak_scale[w] = lo;
            f.nodes[node].r_ohm = spec.weak_service_z_unit.real() * lo;
            f.nodes[node].x_ohm = spec.weak_service_z_unit.imag() * lo;
        }
    }

    // Ratings from the largest uncontrolled loading, then certify.
    std::vector<double> max_amps(f.nodes.size(), 0.0), max_kva(f.nodes.size(), 0.0);
    res.min_voltage_pu = std::numeric_limits<double>::infinity();
    for (const auto& loads : snapshots) {
        const PowerFlowResult flow = power_flow(f, loads);
        const std::vector<double> kva = ConstraintMonitor::transformer_power(f, flow);
        for (std::size_t i = 1; i < f.nodes.size(); ++i) {
            max_amps[i] = std::max(max_amps[i], std::abs(flow.branch_current[i]));
            max_kva[i] = std::max(max_kva[i], kva[i]);
            if (f.nodes[i].service) res.min_voltage_pu = std::min(res.min_voltage_pu, flow.voltage_pu[i]);
        }
    }
    for (std::size_t i = 1; i < f.nodes.size(); ++i) {
        FeederNode& nd = f.nodes[i];
        if (nd.service) nd.transformer_kva = spec.rating_factor * max_kva[i];
        else nd.ampacity_a = spec.rating_factor * max_amps[i];
    }
    res.snapshots = snapshots.size();
    if (res.min_voltage_pu < v_min_pu)
        throw std::runtime_error("calibrate_feeder: uncontrolled loading violates the voltage limit");
    return res;
}

} // namespace tclsafe
