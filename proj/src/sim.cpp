#include "tclsafe/sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <thread>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "tclsafe/io.hpp"
#include "tclsafe/random.hpp"

namespace tclsafe {

const char* to_string(Strategy s) {
    switch (s) {
    case Strategy::Benchmark: return "benchmark";
    case Strategy::Strategy1: return "strategy1";
    case Strategy::Strategy2: return "strategy2";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& s) {
    if (s == "benchmark" || s == "pi") return Strategy::Benchmark;
    if (s == "strategy1" || s == "s1") return Strategy::Strategy1;
    if (s == "strategy2" || s == "s2") return Strategy::Strategy2;
    throw std::invalid_argument("unknown strategy '" + s + "' (benchmark, strategy1, strategy2)");
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double rms_percent(std::span<const double> errors_kw, double baseline_kw) {
    if (errors_kw.empty()) return 0.0;
    if (!(baseline_kw > 0)) throw std::invalid_argument("rms_percent: baseline must be positive");
    double ss = 0.0;
    for (double e : errors_kw) ss += e * e;
    return std::sqrt(ss / static_cast<double>(errors_kw.size())) / baseline_kw * 100.0;
}

FreeRun free_run(std::vector<TclState> initial, std::span<const TclParams> params, const AmbientConditions& amb,
                 int ticks, const BinConfig* bins) {
    FreeRun out;
    out.power_kw.reserve(static_cast<std::size_t>(ticks));
    for (int t = 0; t < ticks; ++t) {
        out.power_kw.push_back(total_power(initial, params));
        if (bins) {
            std::vector<int> row(initial.size());
            for (std::size_t i = 0; i < initial.size(); ++i) row[i] = bin_index(initial[i], params[i], *bins);
            out.bins.push_back(std::move(row));
        }
        for (std::size_t i = 0; i < initial.size(); ++i) initial[i] = step_tcl(initial[i], params[i], amb);
    }
    out.final_state = std::move(initial);
    return out;
}

Eigen::MatrixXd identify_with_excitation(std::vector<TclState> st, std::span<const TclParams> params,
                                         const AmbientConditions& amb, int ticks, const BinConfig& bins,
                                         double excitation, Rng& rng) {
    if (!(excitation >= 0.0 && excitation <= 1.0)) throw std::invalid_argument("excitation must be in [0, 1]");
    BinHistory hist;
    SwitchMask skip;
    hist.reserve(static_cast<std::size_t>(ticks) + 1);
    skip.reserve(static_cast<std::size_t>(ticks));
    auto record = [&] {
        std::vector<int> row(st.size());
        for (std::size_t i = 0; i < st.size(); ++i) row[i] = bin_index(st[i], params[i], bins);
        hist.push_back(std::move(row));
    };
    record();
    for (int t = 0; t < ticks; ++t) {
        std::vector<char> switched(st.size(), 0);
        for (std::size_t i = 0; i < st.size(); ++i) {
            std::optional<SwitchDirective> d;
            if (!st[i].locked() && !thermostat_will_switch(st[i], params[i]) && rng.bernoulli(excitation))
                d = st[i].on ? SwitchDirective::TurnOff : SwitchDirective::TurnOn;
            const StepOutcome o = step_tcl_detailed(st[i], params[i], amb, d);
            switched[i] = o.event == SwitchEvent::External;
            st[i] = o.state;
        }
        skip.push_back(std::move(switched));
        record();
    }
    return identify_As(hist, bins, &skip);
}

namespace {

std::vector<double> u_prev_zero(const BinConfig& bins) { return std::vector<double>(static_cast<std::size_t>(bins.unlocked_bins()), 0.0); }

int steps_for(double seconds, double h_seconds, const char* what) {
    const double k = seconds / h_seconds;
    const double r = std::round(k);
    if (r < 1 || std::abs(k - r) > 1e-9) throw std::invalid_argument(std::string(what) + " must be a positive multiple of the step");
    return static_cast<int>(r);
}

} // namespace

Scenario prepare_scenario(const ScenarioConfig& cfg) {
    if (cfg.trials < 1) throw std::invalid_argument("scenario: need at least one trial");
    if (!(cfg.amplitude >= 0 && cfg.amplitude < 1)) throw std::invalid_argument("scenario: amplitude must be in [0, 1)");
    cfg.bins.validate();

    Scenario sc;
    sc.cfg = cfg;
    sc.amb = AmbientConditions::with_step_seconds(cfg.theta_a, cfg.h_seconds);
    sc.ticks = steps_for(cfg.horizon_s, cfg.h_seconds, "horizon");
    const int prerun = steps_for(cfg.prerun_s, cfg.h_seconds, "pre-run");

    sc.params = generate_population(cfg.population, sc.amb).params;
    const std::size_t n = sc.params.size();
    double pmin = std::numeric_limits<double>::infinity();
    for (const auto& p : sc.params) {
        sc.p_on_total += p.p;
        pmin = std::min(pmin, p.p);
    }
    sc.p_small = cfg.tuning.p_small_fraction * pmin;

    std::vector<std::vector<Complex>> csv_values;
    RegulationSignal csv_signal;
    if (cfg.signal.csv_path) {
        std::vector<std::string> warnings;
        csv_signal = read_signal_csv_file(*cfg.signal.csv_path, cfg.h_seconds, &warnings);
        for (const auto& w : warnings) std::clog << "signal: " << w << '\n';
        if (csv_signal.size() < static_cast<std::size_t>(cfg.trials) * static_cast<std::size_t>(sc.ticks) + 1)
            throw std::runtime_error("signal CSV is shorter than trials x horizon");
    }

    for (int k = 0; k < cfg.trials; ++k) {
        TrialScenario tr;
        tr.index = k;
        tr.seed = Rng::derive(cfg.seed, static_cast<std::uint64_t>(k));
        Rng rng(tr.seed);
        const std::vector<TclState> start = random_states(sc.params, sc.amb, rng);
        FreeRun pre = free_run(start, sc.params, sc.amb, prerun);
        tr.As = identify_with_excitation(start, sc.params, sc.amb, prerun, cfg.bins, cfg.identification_excitation, rng);
        tr.baseline_kw = std::accumulate(pre.power_kw.begin(), pre.power_kw.end(), 0.0) / static_cast<double>(prerun);
        tr.initial = std::move(pre.final_state);
        const int warm = cfg.estimator_warmup_s > 0 ? steps_for(cfg.estimator_warmup_s, cfg.h_seconds, "estimator warm-up") : 0;
        if (warm > prerun) throw std::invalid_argument("estimator warm-up longer than the pre-run");
        tr.warmup_kw.assign(pre.power_kw.end() - warm, pre.power_kw.end());

        if (cfg.signal.csv_path) {
            tr.signal.dt_s = cfg.h_seconds;
            const auto first = csv_signal.values.begin() + static_cast<std::ptrdiff_t>(k) * sc.ticks;
            tr.signal.values.assign(first, first + sc.ticks + 1);
        } else {
            SignalSynthesis syn;
            syn.seed = Rng::derive(cfg.signal.seed, static_cast<std::uint64_t>(k));
            syn.cutoff_hz = cfg.signal.cutoff_hz;
            syn.target_std = cfg.signal.target_std;
            syn.dt_s = cfg.h_seconds;
            tr.signal = synthesize_signal(syn, static_cast<std::size_t>(sc.ticks) + 1);
        }
        tr.target_kw.resize(static_cast<std::size_t>(sc.ticks));
        for (int t = 0; t < sc.ticks; ++t)
            tr.target_kw[t] = tr.baseline_kw * (1.0 + cfg.amplitude * tr.signal.at(static_cast<std::size_t>(t) + 1));
        sc.trials.push_back(std::move(tr));
    }

    if (cfg.feeder_path) {
        sc.feeder = read_feeder_file(*cfg.feeder_path);
        if (sc.feeder.house_node.size() != n) throw std::runtime_error("feeder file attaches a different number of houses");
    } else {
        std::vector<double> duty(n);
        for (std::size_t i = 0; i < n; ++i) duty[i] = duty_cycle_estimate(sc.params[i], sc.amb.theta_a);
        FeederLayout layout = build_synthetic_feeder(cfg.feeder, duty);
        std::vector<std::vector<Complex>> snapshots;
        for (const auto& tr : sc.trials) {
            std::vector<TclState> st = tr.initial;
            snapshots.push_back(node_loads(layout.feeder, st, sc.params));
            for (int t = 0; t < sc.ticks; ++t) {
                for (std::size_t i = 0; i < n; ++i) st[i] = step_tcl(st[i], sc.params[i], sc.amb);
                snapshots.push_back(node_loads(layout.feeder, st, sc.params));
            }
        }
        std::vector<TclState> all_on(n);
        for (auto& st : all_on) st.on = true;
        const std::vector<Complex> peak = node_loads(layout.feeder, all_on, sc.params);
        calibrate_feeder(layout, cfg.feeder, snapshots, cfg.limits.v_min_pu, peak);
        sc.feeder = std::move(layout.feeder);
        sc.weak_nodes = std::move(layout.weak_nodes);
    }
    sc.feeder.validate();
    return sc;
}

TrialMetrics run_trial(const Scenario& sc, int trial, const RunOptions& opt, const SafetyAssignment& assignment) {
    if (trial < 0 || trial >= static_cast<int>(sc.trials.size())) throw std::out_of_range("run_trial: no such trial");
    const TrialScenario& tr = sc.trials[static_cast<std::size_t>(trial)];
    const std::size_t n = sc.units();
    if (assignment.size() != n) throw std::invalid_argument("run_trial: assignment does not cover the population");
    assignment.validate();

    const ScenarioConfig& cfg = sc.cfg;
    const BinConfig& bins = cfg.bins;
    std::vector<TclState> states = tr.initial;
    const std::vector<bool> controlled_v = operator_controlled_mask(assignment);
    // std::span<const bool> needs contiguous bools.
    const std::unique_ptr<bool[]> controlled(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) controlled[i] = controlled_v[i];
    const std::span<const bool> controlled_span(controlled.get(), n);

    std::vector<ModeCountController> groups;
    for (const auto& g : assignment.groups) groups.emplace_back(g);

    Rng rng(Rng::derive(tr.seed, 100 + static_cast<std::uint64_t>(opt.strategy)));
    ConstraintMonitor monitor(sc.feeder, sc.amb.h, cfg.limits);

    const double blocked_fraction = assignment.size() ? static_cast<double>(assignment.blocked_count()) / n : 0.0;
    const ControllerTuning& tun = cfg.tuning;

    std::optional<AggregateEstimator> est;
    if (opt.strategy == Strategy::Strategy1) {
        EstimatorTuning t = cfg.tuning.estimator;
        const double n2 = static_cast<double>(n) * static_cast<double>(n);
        t.q_unlocked /= n2;
        t.q_locked /= n2;
        est.emplace(bins, tr.As, sc.p_on_total, t);
        for (double p : tr.warmup_kw) est->update(u_prev_zero(bins), p);
    }
    const PiGains pi_gains =
        opt.comm ? PiGains{tun.kp_schedule.at(blocked_fraction), tun.ti_schedule.at(blocked_fraction)} : tun.pi;
    PiController pi(pi_gains, cfg.h_seconds);
    const double pi_scale = tun.pi_error == PiErrorUnits::Normalized ? 1.0 / sc.p_on_total : 1.0;
    const double k_gain = opt.comm ? tun.k_schedule.at(blocked_fraction) : tun.k;
    std::vector<double> u_prev(static_cast<std::size_t>(bins.unlocked_bins()), 0.0);

    TrialMetrics m;
    m.strategy = opt.strategy;
    m.comm = opt.comm;
    m.safety = opt.safety;
    m.trial = trial;
    m.baseline_kw = tr.baseline_kw;
    m.blocked = assignment.blocked_count();
    m.grouped = assignment.grouped_count();
    m.safety_fraction_pct = assignment.controlled_fraction() * 100.0;
    m.min_voltage_pu = std::numeric_limits<double>::infinity();

    std::map<std::pair<int, int>, ComponentViolation> comp;
    std::vector<double> errors;
    errors.reserve(static_cast<std::size_t>(sc.ticks));
    const int hot_off = bins.n_intervals - 1;

    for (int t = 0; t < sc.ticks; ++t) {
        const double p_now = total_power(states, sc.params);
        const double target = tr.target_kw[static_cast<std::size_t>(t)];

        // Operator.
        std::vector<std::pair<std::size_t, SwitchDirective>> safety;
        for (auto& g : groups) {
            ModeCountStep s = g.step(states, sc.params, sc.amb);
            if (s.infeasible) ++m.infeasible_events;
            safety.insert(safety.end(), s.directives.begin(), s.directives.end());
        }
        const CommPayload payload = comm_payload(assignment, safety, states, sc.params);

        // Aggregator.
        TickTrace tick;
        Directives dirs(n);
        switch (opt.strategy) {
        case Strategy::Benchmark: {
            const double cmd = pi.step((target - p_now) * pi_scale);
            dirs = apply_scalar_command(states, cmd, controlled_span, rng);
            tick.command = cmd;
            break;
        }
        case Strategy::Strategy1: {
            est->update(u_prev, p_now);
            const ProbabilisticCommand cmd =
                aggregate_policy(est->estimate(), est->As(), sc.p_on_total, target, k_gain, bins);
            dirs = apply_probabilistic_command(states, sc.params, cmd, controlled_span, bins, rng);
            u_prev = cmd.u;
            const double mass = std::accumulate(cmd.u.begin(), cmd.u.end(), 0.0);
            tick.command = cmd.switches_off() ? -mass : mass;
            tick.est_hot_off = est->estimate()(hot_off) * static_cast<double>(n);
            break;
        }
        case Strategy::Strategy2: {
            PriorityStackInput in;
            in.states = states;
            in.params = sc.params;
            in.amb = sc.amb;
            in.p_target_next = target;
            in.p_total = p_now;
            if (opt.comm) in.delta_p_safety = payload.delta_p_safety;
            in.operator_controlled = controlled_span;
            in.p_small = sc.p_small;
            PriorityStackResult r = priority_stack_policy(in);
            if (r.saturated) ++m.saturation_events;
            dirs = std::move(r.directives);
            tick.command = r.delta_p_commanded;
            break;
        }
        }
        if (opt.traces) {
            for (std::size_t i = 0; i < n; ++i) {
                if (bin_index(states[i], sc.params[i], bins) != hot_off) continue;
                ++tick.total_hot_off;
                if (!controlled[i]) ++tick.responsive_hot_off;
            }
        }

        // Dispatch: operator directives preempt the aggregator.
        for (std::size_t i = 0; i < n; ++i)
            if (controlled[i]) dirs[i].reset();
        for (const auto& [i, d] : safety) dirs[i] = d;

        for (std::size_t i = 0; i < n; ++i) states[i] = step_tcl(states[i], sc.params[i], sc.amb, dirs[i]);
        const double p_next = total_power(states, sc.params);
        errors.push_back(p_next - target);

        PowerFlowResult flow;
        try {
            flow = power_flow(sc.feeder, node_loads(sc.feeder, states, sc.params));
        } catch (const PowerFlowCollapse& e) {
            throw PowerFlowCollapse("trial " + std::to_string(trial) + " tick " + std::to_string(t + 1) + ": " + e.what());
        }
        const ConstraintReport rep = monitor.check(flow);
        double vmin = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sc.feeder.nodes.size(); ++i)
            if (sc.feeder.nodes[i].service) vmin = std::min(vmin, flow.voltage_pu[i]);
        m.min_voltage_pu = std::min(m.min_voltage_pu, vmin);
        if (!rep.ok()) ++m.violation_ticks;
        for (const Violation& v : rep.violations) {
            switch (v.type) {
            case ViolationType::OverCurrent: ++m.over_current; break;
            case ViolationType::UnderVoltage: ++m.under_voltage; break;
            case ViolationType::OverVoltage: ++m.over_voltage; break;
            case ViolationType::TransformerOverload: ++m.transformer_overload; break;
            }
            auto& c = comp[{static_cast<int>(v.type), v.node}];
            c.type = v.type;
            c.node = v.node;
            ++c.ticks;
            c.max_severity = std::max(c.max_severity, v.severity);
        }

        if (opt.traces) {
            tick.t_s = (t + 1) * cfg.h_seconds;
            tick.p_kw = p_next;
            tick.target_kw = target;
            tick.min_voltage_pu = vmin;
            tick.violations = static_cast<int>(rep.violations.size());
            tick.delta_p_safety = payload.delta_p_safety;
            m.trace.push_back(tick);
        }
    }
    if (est) m.estimator_jitter = est->jitter_count();
    m.rms_pct = rms_percent(errors, tr.baseline_kw);
    for (const auto& [key, c] : comp) m.components.push_back(c);
    return m;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, unsigned threads) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<void>> running;
    for (std::size_t i = 0; i < count; ++i) {
        running.push_back(std::async(std::launch::async, fn, i));
        if (running.size() >= threads) {
            for (auto& f : running) f.get();
            running.clear();
        }
    }
    for (auto& f : running) f.get();
}

std::vector<TrialMetrics> run_trials(const Scenario& sc, const RunOptions& opt,
                                     std::span<const SafetyAssignment> per_trial, unsigned threads) {
    if (per_trial.size() != sc.trials.size()) throw std::invalid_argument("run_trials: one assignment per trial");
    std::vector<TrialMetrics> out(sc.trials.size());
    parallel_for(
        out.size(), [&](std::size_t k) { out[k] = run_trial(sc, static_cast<int>(k), opt, per_trial[k]); }, threads);
    return out;
}

} // namespace tclsafe
