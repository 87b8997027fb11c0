// End-to-end acceptance run on the default desk-scale scenario. Prints one
// PASS/FAIL line per criterion and exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tclsafe/io.hpp"
#include "tclsafe/selection.hpp"
#include "tclsafe/tuning.hpp"

using namespace tclsafe;

namespace {

// Tolerances.
constexpr double kMaxStrategy2Rms = 1.0;        // percent
constexpr double kStrategy1Lead = 0.2;          // percentage points below the benchmark
constexpr double kModeCountRatio = 0.25;        // of the blocking assignment size
constexpr double kBinTolerance = 0.01;          // occupancy fraction per bin
constexpr std::size_t kMonteCarloUnits = 100000;
constexpr double kEstimatorBlocked = 0.38;
constexpr double kEstimatorTolerance = 0.20;    // relative to the responsive count
constexpr double kPowerBalance = 1e-3;          // relative
constexpr double kTwoBusTolerance = 1e-6;       // p.u.

constexpr Strategy kStrategies[] = {Strategy::Benchmark, Strategy::Strategy1, Strategy::Strategy2};

struct Outcome {
    bool pass = true;
    std::string detail;
};

void report(int id, const char* title, const Outcome& o, int& failures) {
    std::printf("criterion %d %-28s %s  %s\n", id, title, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream o;
    o.precision(prec);
    o << v;
    return o.str();
}

// Protected and matched unprotected runs of every strategy and comm setting.
struct Campaign {
    Scenario sc;
    // [strategy][trial]
    std::vector<std::vector<SelectionResult>> selection;
    // [strategy][comm][trial]
    std::vector<std::vector<std::vector<TrialMetrics>>> protected_runs, unprotected_runs;

    double mean(const std::vector<TrialMetrics>& runs, double TrialMetrics::*field) const {
        double s = 0.0;
        for (const auto& m : runs) s += m.*field;
        return runs.empty() ? 0.0 : s / static_cast<double>(runs.size());
    }
    double rms(int s, int c) const { return mean(protected_runs[s][c], &TrialMetrics::rms_pct); }
    double fraction(int s) const { return mean(protected_runs[s][0], &TrialMetrics::safety_fraction_pct); }
};

Campaign run_campaign() {
    Campaign cp;
    cp.sc = prepare_scenario(ScenarioConfig{});
    const Scenario& sc = cp.sc;
    const std::size_t trials = sc.trials.size();
    cp.selection.assign(3, std::vector<SelectionResult>(trials));
    parallel_for(3 * trials, [&](std::size_t job) {
        const std::size_t s = job / trials, k = job % trials;
        cp.selection[s][k] = select_safety_set(sc, static_cast<int>(k), kStrategies[s]);
    });

    const std::vector<SafetyAssignment> free(trials, SafetyAssignment::free(sc.units()));
    cp.protected_runs.assign(3, std::vector<std::vector<TrialMetrics>>(2));
    cp.unprotected_runs = cp.protected_runs;
    for (int s = 0; s < 3; ++s) {
        std::vector<SafetyAssignment> chosen;
        for (const auto& r : cp.selection[s]) chosen.push_back(r.assignment);
        for (int c = 0; c < 2; ++c) {
            cp.protected_runs[s][c] = run_trials(sc, {kStrategies[s], c == 1, false, true}, chosen);
            cp.unprotected_runs[s][c] = run_trials(sc, {kStrategies[s], c == 1, false, false}, free);
        }
    }
    return cp;
}

Outcome strategy_ordering(const Campaign& cp) {
    Outcome o;
    for (int c = 0; c < 2; ++c) {
        const double pi = cp.rms(0, c), s1 = cp.rms(1, c), s2 = cp.rms(2, c);
        const bool ok = s2 < s1 && s1 < pi && s2 <= kMaxStrategy2Rms && s1 <= pi - kStrategy1Lead;
        o.pass = o.pass && ok;
        o.detail += std::string(c ? " comm" : "no-comm") + " rms PI " + fmt(pi) + " S1 " + fmt(s1) + " S2 " + fmt(s2) + "%;";
    }
    return o;
}

Outcome safety_efficiency(const Campaign& cp) {
    const double pi = cp.fraction(0), s1 = cp.fraction(1), s2 = cp.fraction(2);
    Outcome o;
    o.pass = s2 < kModeCountRatio * pi && s2 < kModeCountRatio * s1;
    o.detail = "controlled PI " + fmt(pi) + "% S1 " + fmt(s1) + "% S2 " + fmt(s2) + "% (ratio " +
               fmt(s2 / std::min(pi, s1), 2) + ")";
    return o;
}

Outcome network_safety(const Campaign& cp) {
    Outcome o;
    std::size_t protected_violations = 0, infeasible = 0;
    int clean_unprotected = 0, runs = 0;
    std::set<int> clean_trials;
    for (int s = 0; s < 3; ++s) {
        for (const auto& r : cp.selection[s]) infeasible += r.feasible ? 0 : 1;
        for (int c = 0; c < 2; ++c) {
            for (const auto& m : cp.protected_runs[s][c]) protected_violations += m.total_violations();
            for (const auto& m : cp.unprotected_runs[s][c]) {
                ++runs;
                if (m.total_violations() == 0) {
                    ++clean_unprotected;
                    clean_trials.insert(m.trial);
                }
            }
        }
    }
    o.pass = protected_violations == 0 && infeasible == 0 && clean_unprotected == 0;
    o.detail = "protected violations " + std::to_string(protected_violations) + ", infeasible selections " +
               std::to_string(infeasible) + ", unprotected runs without violation " +
               std::to_string(clean_unprotected) + "/" + std::to_string(runs);
    if (!clean_trials.empty()) {
        o.detail += " (trials";
        for (int t : clean_trials) o.detail += " " + std::to_string(t);
        o.detail += ")";
    }
    return o;
}

Outcome communication_benefit(const Campaign& cp) {
    Outcome o;
    const char* names[] = {"PI", "S1", "S2"};
    for (int s = 0; s < 3; ++s) {
        const double off = cp.rms(s, 0), on = cp.rms(s, 1);
        if (s < 2) o.pass = o.pass && on <= off;
        o.detail += std::string(names[s]) + " " + fmt(off) + " -> " + fmt(on) + "%; ";
    }
    return o;
}

std::vector<double> histogram(std::span<const TclState> st, std::span<const TclParams> params, const BinConfig& bins) {
    std::vector<double> h(static_cast<std::size_t>(bins.total_bins()), 0.0);
    for (std::size_t i = 0; i < st.size(); ++i) h[static_cast<std::size_t>(bin_index(st[i], params[i], bins))] += 1.0;
    for (double& x : h) x /= static_cast<double>(st.size());
    return h;
}

Outcome model_fidelity() {
    const AmbientConditions amb = AmbientConditions::with_step_seconds(32.0, 2.0);
    const BinConfig bins{2};
    PopulationSpec spec;
    spec.n = kMonteCarloUnits;
    spec.seed = 8;
    const Population pop = generate_population(spec, amb);
    Rng rng(81);
    std::vector<TclState> st = free_run(random_states(pop.params, amb, rng), pop.params, amb, 1800).final_state;
    const Eigen::MatrixXd As = identify_with_excitation(st, pop.params, amb, 150, bins, 0.003, rng);
    double p_on_total = 0.0;
    for (const auto& p : pop.params) p_on_total += p.p;
    const Eigen::MatrixXd C = output_matrix(p_on_total, bins);

    const std::vector<std::vector<double>> commands{{0.0, 0.0, 0.0, 0.0}, {0.3, 0.8, 0.0, 0.0}, {0.0, 0.0, 0.5, 0.2}};
    double worst = 0.0;
    for (const auto& u : commands) {
        const std::vector<double> h0 = histogram(st, pop.params, bins);
        const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(h0.data(), static_cast<Eigen::Index>(h0.size()));
        const Prediction p = predict(x, As, u, C, bins);

        const Directives d = apply_probabilistic_command(st, pop.params, {u}, {}, bins, rng);
        std::vector<TclState> next(st.size());
        for (std::size_t i = 0; i < st.size(); ++i) next[i] = step_tcl(st[i], pop.params[i], amb, d[i]);
        const std::vector<double> h1 = histogram(next, pop.params, bins);
        for (std::size_t b = 0; b < h1.size(); ++b) worst = std::max(worst, std::abs(h1[b] - p.x_next(static_cast<Eigen::Index>(b))));
        st = next;
    }
    return {worst <= kBinTolerance, "largest bin gap " + fmt(worst * 100, 3) + "% of " +
                                        std::to_string(kMonteCarloUnits) + " units over " +
                                        std::to_string(commands.size()) + " commands"};
}

Outcome invariant_suites(const Campaign& cp) {
    const Scenario& sc = cp.sc;
    std::vector<std::string> failed;
    Rng rng(606);

    // Column stochasticity and mass conservation.
    bool ok = true;
    for (const auto& tr : sc.trials) {
        ok = ok && check_column_stochastic(tr.As).ok();
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> u(static_cast<std::size_t>(sc.cfg.bins.unlocked_bins()), 0.0);
            const int n = sc.cfg.bins.n_intervals;
            const int first = rep % 2 ? n : 0;
            for (int i = first; i < first + n; ++i) u[static_cast<std::size_t>(i)] = rng.uniform();
            const Eigen::MatrixXd At = build_Au(u, sc.cfg.bins) * tr.As;
            const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(At.cols(), [&] { return rng.uniform(); });
            ok = ok && check_column_stochastic(At).ok() && std::abs((At * x).sum() - x.sum()) <= 1e-9 * x.sum();
        }
    }
    if (!ok) failed.push_back("stochasticity");

    // Lockout, deadband and thermostat priority over full traces.
    ok = true;
    {
        std::vector<TclState> st = sc.trials[0].initial;
        std::vector<int> last(st.size(), -1000000);
        for (int t = 0; t < 5 * sc.ticks; ++t)
            for (std::size_t i = 0; i < st.size(); ++i) {
                const TclParams& p = sc.params[i];
                std::optional<SwitchDirective> cmd;
                if (rng.bernoulli(0.1)) cmd = rng.bernoulli(0.5) ? SwitchDirective::TurnOn : SwitchDirective::TurnOff;
                const StepOutcome o = step_tcl_detailed(st[i], p, sc.amb, cmd);
                if (st[i].theta >= p.upper() && !o.state.on) ok = false;
                if (st[i].theta <= p.lower() && o.state.on) ok = false;
                if (o.event == SwitchEvent::External) {
                    if (t - last[i] < p.tau_lock) ok = false;
                    last[i] = t;
                }
                const double a = p.decay(sc.amb.h);
                const double eps = (1 - a) * std::max(std::abs(sc.amb.theta_a - st[i].theta), p.r * p.p_theta) + 1e-12;
                if (o.state.theta > p.upper() + eps || o.state.theta < p.lower() - eps) ok = false;
                st[i] = o.state;
            }
    }
    if (!ok) failed.push_back("lockout/deadband");

    // Mode-count bounds and reservations for every selected group. Group
    // members only ever receive operator directives, so replaying the group
    // alone reproduces the trial.
    ok = true;
    std::size_t groups = 0;
    for (std::size_t k = 0; k < sc.trials.size(); ++k)
        for (const auto& g : cp.selection[2][k].assignment.groups) {
            ++groups;
            ModeCountController ctrl(g);
            std::vector<TclState> st = sc.trials[k].initial;
            bool settled = false;
            for (int t = 0; t < sc.ticks; ++t) {
                int h = 0;
                for (std::size_t m : g.members) h += st[m].on ? 1 : 0;
                const bool within = g.kind == BoundKind::Upper ? h <= g.bound : h >= g.bound;
                if (within) settled = true;
                else if (settled) ok = false;
                const ModeCountStep s = ctrl.step(st, sc.params, sc.amb);
                std::set<std::size_t> partners;
                for (const auto& [locked, partner] : ctrl.reservations())
                    if (!st[locked].locked() || !partners.insert(partner).second) ok = false;
                Directives d(st.size());
                for (const auto& [i, dir] : s.directives) d[i] = dir;
                for (std::size_t m : g.members) st[m] = step_tcl(st[m], sc.params[m], sc.amb, d[m]);
            }
            if (!settled) ok = false;
        }
    if (!ok) failed.push_back("mode-count");

    // Prefix optimality of the stack dispatch on stacks of up to 12 units.
    ok = true;
    for (int rep = 0; rep < 5000; ++rep) {
        const std::size_t len = 1 + static_cast<std::size_t>(rng.uniform() * 12);
        std::vector<double> r(len);
        for (double& x : r) x = rng.uniform(1.0, 8.0);
        const double target = rng.uniform(0.0, 70.0);
        const std::size_t j = best_prefix(r, target);
        double sum = 0.0, best = std::numeric_limits<double>::infinity(), chosen = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            sum += r[k];
            best = std::min(best, std::abs(sum - target));
            if (k == j) chosen = std::abs(sum - target);
        }
        if (chosen > best + 1e-12) ok = false;
    }
    if (!ok) failed.push_back("prefix");

    // Power balance on the scenario feeder and the two-bus closed form.
    ok = true;
    {
        std::vector<TclState> st = sc.trials[0].initial;
        for (int t = 0; t < sc.ticks; ++t) {
            for (std::size_t i = 0; i < st.size(); ++i) st[i] = step_tcl(st[i], sc.params[i], sc.amb);
            const std::vector<Complex> loads = node_loads(sc.feeder, st, sc.params);
            const PowerFlowResult f = power_flow(sc.feeder, loads);
            double p = 0.0;
            for (const auto& s : loads) p += s.real();
            if (std::abs(f.substation_power.real() - p - f.losses_kw) > kPowerBalance * p) ok = false;
        }
        Feeder two;
        two.nodes.push_back({"sub", -1});
        two.nodes.push_back({"load", 0, 3.0, 2.0, 1.0, 0, 0, true});
        const double p = 400.0, q = 150.0, rk = 3e-3, xk = 2e-3;
        const PowerFlowResult f = power_flow(two, std::vector<Complex>{Complex{}, Complex{p, q}}, 1e-12);
        const double v0 = two.substation_vpu * two.base_kv;
        const double b = v0 * v0 - 2.0 * (rk * p + xk * q);
        const double v = std::sqrt((b + std::sqrt(b * b - 4.0 * (rk * rk + xk * xk) * (p * p + q * q))) / 2.0);
        if (std::abs(f.voltage_pu[1] - v / two.base_kv) > kTwoBusTolerance) ok = false;
    }
    if (!ok) failed.push_back("power flow");

    Outcome o;
    o.pass = failed.empty();
    o.detail = "5 suites, " + std::to_string(groups) + " mode-count groups replayed";
    for (const auto& f : failed) o.detail += "; failed: " + f;
    return o;
}

Outcome estimator_under_blocking(const Scenario& sc) {
    double est = 0.0, responsive = 0.0, total = 0.0, blocked = 0.0;
    for (int k = 0; k < static_cast<int>(sc.trials.size()); ++k) {
        Rng rng(Rng::derive(sc.trials[static_cast<std::size_t>(k)].seed, 38));
        const SafetyAssignment a = random_blocking(sc.units(), kEstimatorBlocked, rng);
        blocked += a.controlled_fraction() / static_cast<double>(sc.trials.size());
        const TrialMetrics m = run_trial(sc, k, {Strategy::Strategy1, false, true, true}, a);
        for (const auto& t : m.trace) {
            est += t.est_hot_off;
            responsive += t.responsive_hot_off;
            total += t.total_hot_off;
        }
    }
    const double err = std::abs(est - responsive) / responsive;
    const double gap = std::abs(est - total) / total;
    Outcome o;
    o.pass = err <= kEstimatorTolerance && gap > kEstimatorTolerance;
    o.detail = "blocked " + fmt(blocked * 100, 3) + "%, hottest-off estimate vs responsive " + fmt(err * 100, 3) +
               "%, vs total " + fmt(gap * 100, 3) + "%";
    return o;
}

Outcome determinism(const Campaign& cp) {
    const Scenario& sc = cp.sc;
    std::vector<std::string> differ;

    const Scenario again = prepare_scenario(ScenarioConfig{});
    for (std::size_t k = 0; k < sc.trials.size(); ++k)
        if (!(again.trials[k].As == sc.trials[k].As) || again.trials[k].target_kw != sc.trials[k].target_kw ||
            feeder_to_json(again.feeder).dump() != feeder_to_json(sc.feeder).dump())
            differ.push_back("scenario " + std::to_string(k));

    for (int s = 0; s < 3; ++s) {
        const SelectionResult r = select_safety_set(again, 0, kStrategies[s]);
        const SelectionResult& ref = cp.selection[s][0];
        std::ostringstream a, b;
        write_selection_audit_csv(a, r);
        write_selection_audit_csv(b, ref);
        if (assignment_to_json(r.assignment).dump() != assignment_to_json(ref.assignment).dump() || a.str() != b.str() ||
            r.scenario_hash != ref.scenario_hash)
            differ.push_back(std::string("selection ") + to_string(kStrategies[s]));

        std::vector<SafetyAssignment> chosen;
        for (const auto& x : cp.selection[s]) chosen.push_back(x.assignment);
        for (int c = 0; c < 2; ++c) {
            const auto runs = run_trials(again, {kStrategies[s], c == 1, true, true}, chosen, 2);
            for (std::size_t k = 0; k < runs.size(); ++k) {
                const TrialMetrics plain = run_trial(sc, static_cast<int>(k), {kStrategies[s], c == 1, true, true}, chosen[k]);
                std::ostringstream ta, tb;
                write_trace_csv(ta, runs[k]);
                write_trace_csv(tb, plain);
                const bool same = metrics_to_json(runs[k]).dump() == metrics_to_json(plain).dump() && ta.str() == tb.str();
                // Traces off must not change the result either.
                TrialMetrics no_trace = cp.protected_runs[s][c][k];
                TrialMetrics stripped = plain;
                stripped.trace.clear();
                if (!same || metrics_to_json(no_trace).dump() != metrics_to_json(stripped).dump())
                    differ.push_back(std::string("run ") + to_string(kStrategies[s]) + (c ? " comm" : "") + " t" +
                                     std::to_string(k));
            }
        }
    }

    Rng r1(5), r2(5);
    const auto& tr = sc.trials[0];
    std::ostringstream m1, m2;
    write_matrix_csv(m1, identify_with_excitation(tr.initial, sc.params, sc.amb, 600, sc.cfg.bins, 0.003, r1));
    write_matrix_csv(m2, identify_with_excitation(tr.initial, sc.params, sc.amb, 600, sc.cfg.bins, 0.003, r2));
    if (m1.str() != m2.str()) differ.push_back("identification");

    Outcome o;
    o.pass = differ.empty();
    o.detail = differ.empty() ? "scenario, selections, 60 runs and identification byte-identical"
                              : std::to_string(differ.size()) + " mismatches, first: " + differ.front();
    return o;
}

} // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    int failures = 0;
    try {
        const Campaign cp = run_campaign();
        report(1, "strategy ordering", strategy_ordering(cp), failures);
        report(2, "safety efficiency", safety_efficiency(cp), failures);
        report(3, "network safety", network_safety(cp), failures);
        report(4, "communication benefit", communication_benefit(cp), failures);
        report(5, "model fidelity", model_fidelity(), failures);
        report(6, "invariant suites", invariant_suites(cp), failures);
        report(7, "estimator under blocking", estimator_under_blocking(cp.sc), failures);
        report(8, "determinism", determinism(cp), failures);
    } catch (const std::exception& e) {
        std::cerr << "acceptance: " << e.what() << '\n';
        return 2;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%d of 8 criteria failed (%.0f s)\n", failures, secs);
    return failures == 0 ? 0 : 1;
}
