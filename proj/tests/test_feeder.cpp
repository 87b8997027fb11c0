#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tclsafe/feeder.hpp"
#include "tclsafe/random.hpp"
#include "tclsafe/synthetic_feeder.hpp"

using namespace tclsafe;

namespace {

Feeder two_bus(double r, double x) {
    Feeder f;
    f.nodes.push_back({"sub", -1});
    f.nodes.push_back({"load", 0, r, x, 1.0, 0.0, 0.0, true});
    return f;
}

// 0 - 1 - 2 - 3 chain with a side branch 1 - 4 - 5.
Feeder branching() {
    Feeder f;
    f.nodes.push_back({"sub", -1});
    f.nodes.push_back({"a", 0, 0.5, 0.5, 1.0, 0, 0, true});
    f.nodes.push_back({"b", 1, 0.5, 0.5, 1.0, 0, 0, true});
    f.nodes.push_back({"c", 2, 0.5, 0.5, 1.0, 0, 0, true});
    f.nodes.push_back({"d", 1, 0.5, 0.5, 0.5, 0, 0, true});
    f.nodes.push_back({"e", 4, 0.5, 0.5, 0.5, 0, 0, true});
    f.house_node = {3, 2, 5, 1, 4, 3};
    return f;
}

} // namespace

TEST_SUITE("feeder") {

TEST_CASE("zero load: flat voltage, no current") {
    Feeder f = branching();
    std::vector<Complex> s(f.nodes.size());
    PowerFlowResult r = power_flow(f, s);
    for (double v : r.voltage_pu) CHECK(v == doctest::Approx(f.substation_vpu));
    for (const Complex& i : r.branch_current) CHECK(std::abs(i) == doctest::Approx(0.0));
    CHECK(r.losses_kw == doctest::Approx(0.0));
}

TEST_CASE("two-bus system matches the closed-form solution") {
    const double r = 3.0, x = 2.0, p = 400.0, q = 150.0; // ohm, kW, kvar
    Feeder f = two_bus(r, x);
    std::vector<Complex> s{Complex{}, Complex{p, q}};
    PowerFlowResult res = power_flow(f, s, 1e-12);
    const double v0 = f.substation_vpu * f.base_kv;
    const double rk = r / 1000.0, xk = x / 1000.0; // kV and A units
    const double b = v0 * v0 - 2.0 * (rk * p + xk * q);
    const double v2 = (b + std::sqrt(b * b - 4.0 * (rk * rk + xk * xk) * (p * p + q * q))) / 2.0;
    CHECK(res.voltage_pu[1] == doctest::Approx(std::sqrt(v2) / f.base_kv).epsilon(1e-6));
    CHECK(std::abs(res.branch_current[1]) == doctest::Approx(std::hypot(p, q) / std::sqrt(v2)).epsilon(1e-6));
}

TEST_CASE("doubling every load lowers every voltage") {
    Feeder f = branching();
    Rng rng(2);
    std::vector<Complex> s(f.nodes.size());
    for (std::size_t i = 1; i < s.size(); ++i) s[i] = {rng.uniform(20.0, 80.0), rng.uniform(0.0, 20.0)};
    PowerFlowResult a = power_flow(f, s);
    for (auto& x : s) x *= 2.0;
    PowerFlowResult b = power_flow(f, s);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(b.voltage_pu[i] < a.voltage_pu[i]);
}

TEST_CASE("power balance: substation injection equals loads plus losses") {
    Feeder f = branching();
    Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<Complex> s(f.nodes.size());
        for (std::size_t i = 1; i < s.size(); ++i) s[i] = {rng.uniform(0.0, 150.0), rng.uniform(0.0, 40.0)};
        PowerFlowResult r = power_flow(f, s);
        const double load = std::accumulate(s.begin(), s.end(), Complex{}).real();
        CHECK(r.substation_power.real() == doctest::Approx(load + r.losses_kw).epsilon(1e-3));
    }
}

TEST_CASE("too much load does not converge") {
    Feeder f = two_bus(30.0, 30.0);
    std::vector<Complex> s{Complex{}, Complex{5000.0, 2000.0}};
    CHECK_THROWS_AS(power_flow(f, s), PowerFlowCollapse);
}

TEST_CASE("constraint limits") {
    Feeder f = two_bus(1.0, 1.0);
    f.nodes[1].ampacity_a = 100.0;
    ConstraintMonitor mon(f, 2.0 / 3600.0);
    PowerFlowResult flow;
    flow.voltage_kv = {Complex{7.2}, Complex{7.0}};
    flow.branch_current = {Complex{}, Complex{}};

    SUBCASE("0.95 p.u. exactly is inside the band") {
        flow.voltage_pu = {1.0, 0.95};
        CHECK(mon.check(flow).ok());
    }
    SUBCASE("below 0.95 is flagged with its location") {
        flow.voltage_pu = {1.0, 0.9499};
        ConstraintReport r = mon.check(flow);
        REQUIRE(r.count(ViolationType::UnderVoltage) == 1);
        CHECK(r.violations[0].node == 1);
        CHECK(r.violations[0].severity > 0.0);
    }
    SUBCASE("1.05 is inside, above is over-voltage") {
        flow.voltage_pu = {1.0, 1.05};
        CHECK(mon.check(flow).ok());
        flow.voltage_pu = {1.0, 1.0501};
        CHECK(mon.check(flow).count(ViolationType::OverVoltage) == 1);
    }
    SUBCASE("101% of ampacity is an over-current") {
        flow.voltage_pu = {1.0, 1.0};
        flow.branch_current[1] = Complex{101.0};
        ConstraintReport r = mon.check(flow);
        REQUIRE(r.count(ViolationType::OverCurrent) == 1);
        CHECK(r.violations[0].severity == doctest::Approx(0.01));
        flow.branch_current[1] = Complex{100.0};
        CHECK(mon.check(flow).ok());
    }
}

TEST_CASE("transformer check uses the trailing hourly average") {
    Feeder f = two_bus(0.1, 0.1);
    f.nodes[1].transformer_kva = 100.0;
    ConstraintMonitor mon(f, 1.0 / 60.0); // one-minute ticks
    PowerFlowResult flow;
    flow.voltage_kv = {Complex{1.0}, Complex{1.0}};
    flow.voltage_pu = {1.0, 1.0};
    flow.branch_current = {Complex{}, Complex{120.0}};
    ConstraintReport r;
    for (int k = 0; k < 20; ++k) r = mon.check(flow);
    // Average over the elapsed 20 minutes.
    CHECK(r.count(ViolationType::TransformerOverload) == 1);
    flow.branch_current[1] = Complex{80.0};
    for (int k = 0; k < 40; ++k) r = mon.check(flow);
    CHECK(r.ok()); // (20 * 120 + 40 * 80) / 60 = 93.3
    CHECK(ConstraintMonitor::transformer_power(f, flow)[1] == doctest::Approx(80.0));

    SUBCASE("the window slides") {
        flow.branch_current[1] = Complex{125.0};
        // After 60 more minutes only the 125 kVA samples remain.
        for (int k = 0; k < 60; ++k) r = mon.check(flow);
        REQUIRE(r.count(ViolationType::TransformerOverload) == 1);
        CHECK(r.violations[0].value == doctest::Approx(125.0));
    }
}

TEST_CASE("downstream order") {
    SUBCASE("chain: farthest first") {
        Feeder f = branching();
        CandidateOrder o = downstream_order(f, ComponentKind::Edge, 2);
        // Houses at nodes 3 (houses 0 and 5) then node 2 (house 1).
        REQUIRE(o.units.size() == 3);
        CHECK(o.first_stage == 3);
        CHECK(f.house_node[o.units[0]] == 3);
        CHECK(f.house_node[o.units[1]] == 3);
        CHECK(o.units[2] == 1);
    }
    SUBCASE("voltage mode appends the rest by branch point depth") {
        Feeder f = branching();
        CandidateOrder o = downstream_order(f, ComponentKind::Node, 3);
        REQUIRE(o.units.size() == f.house_node.size());
        CHECK(o.first_stage == 2);
        // House 1 (node 2) branches off closest to node 3. The houses at
        // nodes 5, 4 and 1 share branch point 1 and go farthest first.
        CHECK(o.units[2] == 1);
        CHECK(o.units[3] == 2);
        CHECK(o.units[4] == 4);
        CHECK(o.units[5] == 3);
    }
    SUBCASE("edge mode matches a brute-force subtree scan on random trees") {
        Rng rng(12);
        for (int rep = 0; rep < 30; ++rep) {
            Feeder f;
            f.nodes.push_back({"sub", -1});
            const int n = 2 + static_cast<int>(rng.uniform() * 15);
            for (int i = 1; i < n; ++i)
                f.nodes.push_back({"n", static_cast<int>(rng.uniform() * i), 0.1, 0.1, rng.uniform(0.1, 2.0), 0, 0, true});
            for (int h = 0; h < 25; ++h) f.house_node.push_back(static_cast<int>(rng.uniform() * n));
            const int edge = 1 + static_cast<int>(rng.uniform() * (n - 1));
            CandidateOrder o = downstream_order(f, ComponentKind::Edge, edge);
            const std::vector<double> d = f.distance_from_root();
            std::vector<std::size_t> expect;
            for (std::size_t h = 0; h < f.house_node.size(); ++h) {
                int cur = f.house_node[h];
                while (cur != -1 && cur != edge) cur = f.nodes[cur].parent;
                if (cur == edge) expect.push_back(h);
            }
            std::vector<std::size_t> got = o.units;
            CHECK(got.size() == expect.size());
            for (std::size_t k = 1; k < got.size(); ++k)
                CHECK(d[f.house_node[got[k - 1]]] >= d[f.house_node[got[k]]]);
            std::sort(got.begin(), got.end());
            CHECK(got == expect);
        }
    }
    SUBCASE("the substation is not an edge") {
        CHECK_THROWS(downstream_order(branching(), ComponentKind::Edge, 0));
    }
}

TEST_CASE("synthetic feeder is radial, calibrated and clean under its own snapshots") {
    SyntheticFeederSpec spec;
    Rng rng(4);
    std::vector<double> duty(200);
    for (double& d : duty) d = rng.uniform(0.2, 0.8);
    FeederLayout layout = build_synthetic_feeder(spec, duty);
    CHECK_NOTHROW(layout.feeder.validate());
    CHECK(layout.feeder.house_node.size() == duty.size());
    CHECK(static_cast<int>(layout.weak_nodes.size()) == spec.weak_nodes);

    // Snapshots: random on/off patterns at the duty cycles.
    std::vector<std::vector<Complex>> snaps;
    TclParams p = TclParams::make(2.0, 2.0, 14.0, 22.5, 0.5, 2.5);
    std::vector<TclParams> params(duty.size(), p);
    for (int k = 0; k < 40; ++k) {
        std::vector<TclState> st(duty.size());
        for (std::size_t i = 0; i < st.size(); ++i) st[i].on = rng.bernoulli(duty[i]);
        snaps.push_back(node_loads(layout.feeder, st, params));
    }
    CalibrationResult cal = calibrate_feeder(layout, spec, snaps);
    CHECK(cal.snapshots == snaps.size());
    CHECK(cal.min_voltage_pu == doctest::Approx(0.95 + spec.weak_margin_pu).epsilon(1e-4));
    ConstraintMonitor mon(layout.feeder, 2.0 / 3600.0);
    for (const auto& s : snaps) CHECK(mon.check(power_flow(layout.feeder, s)).ok());
}

} // TEST_SUITE
