#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "tclsafe/random.hpp"
#include "tclsafe/tcl.hpp"

using namespace tclsafe;

namespace {

const AmbientConditions kAmb = AmbientConditions::with_step_seconds(32.0, 2.0);

TclParams unit(double theta_set = 22.5, double delta = 1.0, int tau = 60) {
    return TclParams::make(2.0, 2.0, 14.0, theta_set, delta, 2.5, tau);
}

} // namespace

TEST_SUITE("tcl") {

TEST_CASE("off unit at ambient stays at ambient") {
    TclParams p = unit(31.5, 1.0); // deadband [30.5, 32.5], 32 inside
    TclState s{32.0, false, 0};
    CHECK(step_tcl(s, p, kAmb).theta == doctest::Approx(32.0).epsilon(1e-12));
}

TEST_CASE("one on step matches the scalar update") {
    TclParams p = unit(22.5, 1.0);
    TclState s{22.0, true, 0};
    const double a = std::exp(-1.0 / 7200.0);
    const double expected = a * 22.0 + (1.0 - a) * (32.0 - 28.0);
    const TclState n = step_tcl(s, p, kAmb);
    CHECK(n.on);
    CHECK(n.theta == doctest::Approx(expected).epsilon(1e-12));
    CHECK(n.theta == doctest::Approx(21.9975).epsilon(1e-4));
}

TEST_CASE("thermostat overrides lockout and external commands") {
    TclParams p = unit();
    TclState s{p.upper() + 0.01, false, 30};
    StepOutcome o = step_tcl_detailed(s, p, kAmb, SwitchDirective::TurnOff);
    CHECK(o.state.on);
    CHECK(o.event == SwitchEvent::Internal);
    CHECK(o.state.lock_remaining == p.tau_lock);
}

TEST_CASE("external command is ignored while locked and applied when unlocked") {
    TclParams p = unit();
    TclState s{22.5, false, 5};
    TclState n = step_tcl(s, p, kAmb, SwitchDirective::TurnOn);
    CHECK_FALSE(n.on);
    CHECK(n.lock_remaining == 4);

    s.lock_remaining = 0;
    StepOutcome o = step_tcl_detailed(s, p, kAmb, SwitchDirective::TurnOn);
    CHECK(o.state.on);
    CHECK(o.event == SwitchEvent::External);
    CHECK(o.state.lock_remaining == p.tau_lock);
}

TEST_CASE("non-finite temperature is rejected") {
    TclParams p = unit();
    TclState s{std::numeric_limits<double>::quiet_NaN(), false, 0};
    CHECK_THROWS(step_tcl(s, p, kAmb));
}

TEST_CASE("parameter invariants") {
    CHECK_THROWS(TclParams::make(-1.0, 2.0, 14.0, 22.5, 0.5, 2.5));
    CHECK_THROWS(TclParams::make(2.0, 2.0, 14.0, 22.5, 0.0, 2.5));
    TclParams p = TclParams::make(2.0, 2.0, 14.0, 22.5, 0.5, 2.5);
    CHECK(p.p == p.p_theta / p.zeta);
}

TEST_CASE("population parameters fall in the default ranges") {
    PopulationSpec spec;
    spec.n = 1;
    Population pop = generate_population(spec, kAmb);
    REQUIRE(pop.size() == 1);
    const TclParams& p = pop.params[0];
    CHECK(p.r >= 1.2);
    CHECK(p.r <= 2.5);
    CHECK(p.theta_set >= 18.0);
    CHECK(p.theta_set <= 27.0);
    CHECK(p.zeta == 2.5);
    CHECK(pop.states[0].theta >= p.lower());
    CHECK(pop.states[0].theta <= p.upper());
}

TEST_CASE("population generation is deterministic") {
    PopulationSpec spec;
    spec.n = 50;
    spec.seed = 99;
    Population a = generate_population(spec, kAmb), b = generate_population(spec, kAmb);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.params[i].r == b.params[i].r);
        CHECK(a.states[i].theta == b.states[i].theta);
        CHECK(a.states[i].on == b.states[i].on);
    }
}

TEST_CASE("empty parameter range is rejected") {
    PopulationSpec spec;
    spec.ranges.r = {2.0, 1.0};
    CHECK_THROWS(generate_population(spec, kAmb));
}

TEST_CASE("long-run baseline of a large population follows the duty-cycle estimate") {
    PopulationSpec spec;
    spec.n = 2265;
    spec.seed = 5;
    Population pop = generate_population(spec, kAmb);
    double expected = 0.0;
    for (const auto& p : pop.params) expected += p.p * duty_cycle_estimate(p, kAmb.theta_a);

    std::vector<TclState> st = pop.states;
    double sum = 0.0;
    const int steps = 1800;
    for (int t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < st.size(); ++i) st[i] = step_tcl(st[i], pop.params[i], kAmb);
        sum += total_power(st, pop.params);
    }
    CHECK(sum / steps == doctest::Approx(expected).epsilon(0.10));
}

TEST_CASE("total power") {
    std::vector<TclParams> p(3, TclParams::make(2.0, 2.0, 12.5, 22.5, 0.5, 2.5));
    std::vector<TclState> s(3);
    CHECK(total_power(s, p) == 0.0);
    for (auto& x : s) x.on = true;
    CHECK(total_power(s, p) == doctest::Approx(15.0));

    Rng rng(3);
    PopulationSpec spec;
    spec.n = 40;
    Population pop = generate_population(spec, kAmb);
    double brute = 0.0;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        pop.states[i].on = rng.bernoulli(0.5);
        if (pop.states[i].on) brute += pop.params[i].p;
    }
    CHECK(total_power(pop.states, pop.params) == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("time to limits") {
    TclParams p = TclParams::make(2.0, 2.0, 14.0, 24.0, 1.0, 2.5); // [23, 25]
    SUBCASE("at the upper limit") {
        CHECK(time_to_limits({25.0, false, 0}, p, kAmb).t_ul == doctest::Approx(0.0));
    }
    SUBCASE("ambient below the upper limit never reaches it") {
        TclParams q = TclParams::make(2.0, 2.0, 14.0, 32.0, 1.0, 2.5); // upper 33
        CHECK(std::isinf(time_to_limits({32.0, false, 0}, q, kAmb).t_ul));
    }
    SUBCASE("closed form, cross-checked by stepping") {
        const double t = time_to_limits({24.0, false, 0}, p, kAmb).t_ul;
        CHECK(t == doctest::Approx(4.0 * std::log(8.0 / 7.0)).epsilon(1e-12));
        CHECK(t == doctest::Approx(0.534).epsilon(1e-3));
        const double a = p.decay(kAmb.h);
        double theta = 24.0;
        int steps = 0;
        while (theta < 25.0) {
            theta = a * theta + (1 - a) * kAmb.theta_a;
            ++steps;
        }
        CHECK(std::abs(steps * kAmb.h - t) <= kAmb.h);
    }
    SUBCASE("on equilibrium above the lower limit never reaches it") {
        TclParams weak = TclParams::make(2.0, 2.0, 4.0, 24.0, 1.0, 2.5); // equilibrium 24
        CHECK(std::isinf(time_to_limits({24.0, true, 0}, weak, kAmb).t_ll));
    }
    SUBCASE("outside the deadband reports the limit") {
        try {
            time_to_limits({26.0, false, 0}, p, kAmb);
            FAIL("expected DeadbandError");
        } catch (const DeadbandError& e) {
            CHECK(e.which() == Limit::Upper);
        }
    }
}

TEST_CASE("upper margin temperature") {
    SUBCASE("no lockout gives the upper limit") {
        TclParams p = unit(22.5, 1.0, 0);
        CHECK(upper_margin_temperature(p, kAmb) == doctest::Approx(p.upper()));
    }
    SUBCASE("off branch: tau_lock off steps from the margin reach the upper limit") {
        // Slow on-dynamics so the off branch is the lesser one.
        TclParams p = TclParams::make(2.0, 2.0, 4.0, 22.5, 1.0, 2.5, 60);
        const double m = upper_margin_temperature(p, kAmb);
        const double a = p.decay(kAmb.h);
        double theta = m;
        for (int k = 0; k < p.tau_lock; ++k) theta = a * theta + (1 - a) * kAmb.theta_a;
        CHECK(theta == doctest::Approx(p.upper()).epsilon(1e-9));
    }
    SUBCASE("on branch dominates for fast on-dynamics") {
        TclParams p = TclParams::make(2.0, 0.2, 40.0, 22.5, 1.0, 2.5, 60);
        const double a = p.decay(kAmb.h);
        double on_branch = p.upper();
        for (int k = 0; k < p.tau_lock; ++k) on_branch = a * on_branch + (1 - a) * p.on_equilibrium(kAmb.theta_a);
        double off_branch = p.upper();
        for (int k = 0; k < p.tau_lock; ++k) off_branch = (off_branch - (1 - a) * kAmb.theta_a) / a;
        REQUIRE(on_branch < off_branch);
        CHECK(upper_margin_temperature(p, kAmb) == doctest::Approx(on_branch).epsilon(1e-9));
    }
}

TEST_CASE("trace invariants under random external commands") {
    PopulationSpec spec;
    spec.n = 60;
    spec.seed = 21;
    Population pop = generate_population(spec, kAmb);
    Rng rng(8);
    std::vector<TclState> st = pop.states;
    std::vector<int> last_external(st.size(), -1000000);
    for (int t = 0; t < 3000; ++t) {
        for (std::size_t i = 0; i < st.size(); ++i) {
            const TclParams& p = pop.params[i];
            std::optional<SwitchDirective> cmd;
            if (rng.bernoulli(0.2)) cmd = rng.bernoulli(0.5) ? SwitchDirective::TurnOn : SwitchDirective::TurnOff;
            const bool at_upper = st[i].theta >= p.upper();
            const bool at_lower = st[i].theta <= p.lower();
            StepOutcome o = step_tcl_detailed(st[i], p, kAmb, cmd);
            // Thermostat priority.
            if (at_upper) CHECK(o.state.on);
            if (at_lower) CHECK_FALSE(o.state.on);
            // Lockout.
            if (o.event == SwitchEvent::External) {
                CHECK(t - last_external[i] >= p.tau_lock);
                last_external[i] = t;
            }
            CHECK(o.state.lock_remaining <= p.tau_lock);
            // Deadband within one step's drift.
            const double a = p.decay(kAmb.h);
            const double eps = (1 - a) * std::max(std::abs(kAmb.theta_a - st[i].theta), p.r * p.p_theta) + 1e-12;
            CHECK(o.state.theta <= p.upper() + eps);
            CHECK(o.state.theta >= p.lower() - eps);
            st[i] = o.state;
        }
    }
}

TEST_CASE("single-unit duty cycle matches the estimate") {
    TclParams p = TclParams::make(2.0, 2.0, 14.0, 24.0, 0.5, 2.5);
    const double d = duty_cycle_estimate(p, kAmb.theta_a);
    TclState s{24.0, false, 0};
    long on = 0;
    const long steps = 200000;
    for (long t = 0; t < steps; ++t) {
        s = step_tcl(s, p, kAmb);
        on += s.on ? 1 : 0;
    }
    CHECK(static_cast<double>(on) / steps == doctest::Approx(d).epsilon(0.05));
}

} // TEST_SUITE
