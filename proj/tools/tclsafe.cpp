// tclsafe: command-line front end for trials, safety selection, A_s
// identification, gain tuning and reports.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tclsafe/io.hpp"
#include "tclsafe/report.hpp"
#include "tclsafe/selection.hpp"
#include "tclsafe/sim.hpp"
#include "tclsafe/tuning.hpp"

namespace fs = std::filesystem;
using namespace tclsafe;

namespace {

constexpr int kExitViolation = 2;
constexpr int kExitInfeasible = 3;

std::vector<Strategy> strategies_from(const std::string& s) {
    if (s == "all") return {Strategy::Benchmark, Strategy::Strategy1, Strategy::Strategy2};
    return {parse_strategy(s)};
}

std::vector<bool> comm_variants(bool comm, bool both) {
    if (both) return {false, true};
    return {comm};
}

ScenarioConfig load_config(const std::string& path, std::optional<std::uint64_t> seed) {
    ScenarioConfig cfg = path.empty() ? ScenarioConfig{} : read_scenario_file(path);
    if (seed) {
        cfg.seed = *seed;
        cfg.signal.seed = Rng::derive(*seed, 7);
    }
    return cfg;
}

std::string selection_file(const std::string& dir, Strategy s, int trial) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "selection_%s_t%02d.json", to_string(s), trial);
    return (fs::path(dir) / buf).string();
}

json selection_to_json(const SelectionResult& r, int trial, Strategy s) {
    return {{"trial", trial},
            {"strategy", to_string(s)},
            {"scenario_hash", r.scenario_hash},
            {"feasible", r.feasible},
            {"infeasible_reason", r.infeasible_reason},
            {"iterations", r.audit.size()},
            {"backoff_violations", r.backoff_violations},
            {"assignment", assignment_to_json(r.assignment)}};
}

SafetyAssignment assignment_from_file(const std::string& path) {
    const json j = read_json_file(path);
    if (j.contains("feasible") && !j.at("feasible").get<bool>())
        throw std::runtime_error(path + ": selection was infeasible");
    return assignment_from_json(j.contains("assignment") ? j.at("assignment") : j);
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) fs::create_directories(dir);
}

// ---- run ------------------------------------------------------------------

struct RunArgs {
    std::string config;
    std::string strategy = "all";
    bool comm = false;
    bool both = false;
    bool no_safety = false;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::string assignments; // directory of select-safety output
    bool traces = false;
    unsigned threads = 0;
};

int cmd_run(const RunArgs& a) {
    const Scenario sc = prepare_scenario(load_config(a.config, a.seed));
    ensure_dir(a.out);
    const int trials = static_cast<int>(sc.trials.size());
    std::size_t protected_violations = 0;
    bool infeasible = false;

    for (Strategy s : strategies_from(a.strategy)) {
        std::vector<SafetyAssignment> per_trial(static_cast<std::size_t>(trials), SafetyAssignment::free(sc.units()));
        if (!a.no_safety) {
            if (!a.assignments.empty()) {
                for (int k = 0; k < trials; ++k)
                    per_trial[static_cast<std::size_t>(k)] = assignment_from_file(selection_file(a.assignments, s, k));
            } else {
                std::vector<SelectionResult> sel(static_cast<std::size_t>(trials));
                parallel_for(
                    sel.size(), [&](std::size_t k) { sel[k] = select_safety_set(sc, static_cast<int>(k), s); },
                    a.threads);
                for (int k = 0; k < trials; ++k) {
                    const SelectionResult& r = sel[static_cast<std::size_t>(k)];
                    if (!r.feasible) {
                        std::cerr << to_string(s) << " trial " << k << ": " << r.infeasible_reason << '\n';
                        infeasible = true;
                    }
                    per_trial[static_cast<std::size_t>(k)] = r.assignment;
                }
            }
        }
        for (bool comm : comm_variants(a.comm, a.both)) {
            RunOptions opt{s, comm, a.traces, !a.no_safety};
            const std::vector<TrialMetrics> ms = run_trials(sc, opt, per_trial, a.threads);
            for (const TrialMetrics& m : ms) {
                const std::string stem = metrics_stem(m);
                write_text_file((fs::path(a.out) / ("metrics_" + stem + ".json")).string(),
                                metrics_to_json(m).dump(2) + "\n");
                if (a.traces) {
                    std::ofstream f(fs::path(a.out) / ("trace_" + stem + ".csv"));
                    write_trace_csv(f, m);
                }
                std::printf("%-10s %-7s trial %2d  rms %6.3f%%  safety %5.1f%%  violations %zu\n", to_string(s),
                            comm ? "comm" : "no-comm", m.trial, m.rms_pct, m.safety_fraction_pct,
                            m.total_violations());
                if (m.safety) protected_violations += m.total_violations();
            }
        }
    }
    if (protected_violations > 0) {
        std::cerr << "protected runs had " << protected_violations << " constraint violations\n";
        return kExitViolation;
    }
    return infeasible ? kExitInfeasible : 0;
}

// ---- select-safety ----------------------------------------------------------

struct SelectArgs {
    std::string config;
    std::string strategy = "all";
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    double increment = 0.05;
    int trial = -1; // all
    unsigned threads = 0;
};

int cmd_select(const SelectArgs& a) {
    const Scenario sc = prepare_scenario(load_config(a.config, a.seed));
    ensure_dir(a.out);
    SelectionOptions opt;
    opt.increment_fraction = a.increment;

    std::vector<int> trials;
    if (a.trial >= 0) trials.push_back(a.trial);
    else
        for (int k = 0; k < static_cast<int>(sc.trials.size()); ++k) trials.push_back(k);

    bool all_feasible = true;
    for (Strategy s : strategies_from(a.strategy)) {
        std::vector<SelectionResult> sel(trials.size());
        parallel_for(
            trials.size(), [&](std::size_t i) { sel[i] = select_safety_set(sc, trials[i], s, opt); }, a.threads);
        for (std::size_t i = 0; i < trials.size(); ++i) {
            const SelectionResult& r = sel[i];
            const std::string path = selection_file(a.out, s, trials[i]);
            write_text_file(path, selection_to_json(r, trials[i], s).dump(2) + "\n");
            std::ofstream audit(fs::path(path).replace_extension(".audit.csv"));
            write_selection_audit_csv(audit, r);
            std::printf("%-10s trial %2d  blocked %3zu  grouped %3zu  iterations %3zu  %s\n", to_string(s), trials[i],
                        r.assignment.blocked_count(), r.assignment.grouped_count(), r.audit.size(),
                        r.feasible ? "ok" : r.infeasible_reason.c_str());
            all_feasible = all_feasible && r.feasible;
        }
    }
    return all_feasible ? 0 : kExitInfeasible;
}

// ---- identify-as --------------------------------------------------------------

int cmd_identify(const std::string& history, const std::string& config, const std::string& out) {
    const ScenarioConfig cfg = config.empty() ? ScenarioConfig{} : read_scenario_file(config);
    std::ifstream in(history);
    if (!in) throw std::runtime_error("cannot open " + history);
    const BinHistory h = read_bin_history_csv(in);
    const Eigen::MatrixXd As = identify_As(h, cfg.bins);
    std::ostringstream s;
    write_matrix_csv(s, As);
    if (out.empty() || out == "-") std::cout << s.str();
    else write_text_file(out, s.str());
    return 0;
}

// ---- report -------------------------------------------------------------------

int cmd_report(const std::string& dir, const std::string& out) {
    const std::vector<TrialMetrics> ms = read_metrics_dir(dir);
    if (ms.empty()) throw std::runtime_error("no metrics files in " + dir);
    const Summary s = summarize(ms);
    const std::string target = out.empty() ? dir : out;
    ensure_dir(target);
    {
        std::ofstream f(fs::path(target) / "summary.csv");
        write_summary_csv(f, s);
    }
    write_text_file((fs::path(target) / "summary.json").string(), summary_to_json(s).dump(2) + "\n");

    std::printf("%-10s %-7s %7s %10s %9s %12s %12s\n", "strategy", "comm", "trials", "safety %", "rms %",
                "violations", "unprot. viol");
    for (const SummaryRow& r : s.rows) {
        std::printf("%-10s %-7s %7d %10.2f %9.3f %12zu %8d/%-3d\n", to_string(r.strategy),
                    r.comm ? "comm" : "no-comm", r.trials, r.safety_fraction_pct, r.rms_pct, r.violations,
                    r.unprotected_violating_trials, r.unprotected_trials);
    }
    return 0;
}

// ---- tune-gains ------------------------------------------------------------------

int cmd_tune(const std::string& config, int trials, std::uint64_t seed, const std::string& out) {
    const ScenarioConfig cfg = config.empty() ? ScenarioConfig{} : read_scenario_file(config);
    TuningOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const TuningResult r = tune_gains(cfg, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    ScenarioConfig tuned = cfg;
    tuned.tuning = r.tuning;
    const json tuning = scenario_to_json(tuned).at("tuning");
    ensure_dir(out);
    write_text_file((fs::path(out) / "tuning.json").string(), json{{"tuning", tuning}}.dump(2) + "\n");
    std::ofstream grid(fs::path(out) / "tuning_grid.csv");
    grid << "strategy,comm,level,k,kp,ti,rms_pct\n";
    for (const TuningRow& row : r.rows)
        grid << to_string(row.strategy) << ',' << (row.comm ? "comm" : "no-comm") << ',' << row.level << ','
             << row.k << ',' << row.kp << ',' << row.ti << ',' << row.rms_pct << '\n';
    std::cout << tuning.dump(2) << '\n';
    std::fprintf(stderr, "%zu grid points in %.1f s\n", r.rows.size(), secs);
    return 0;
}

// ---- feeder ----------------------------------------------------------------------

int cmd_feeder(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out) {
    const Scenario sc = prepare_scenario(load_config(config, seed));
    const std::string text = feeder_to_json(sc.feeder).dump(2) + "\n";
    if (out.empty() || out == "-") std::cout << text;
    else write_text_file(out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Network-safe aggregation of thermostatically controlled loads"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run trials and write metrics_*.json (and traces) to --out");
    run_cmd->add_option("config", run.config, "Scenario JSON (defaults when omitted)");
    run_cmd->add_option("--strategy", run.strategy, "benchmark, strategy1, strategy2 or all");
    run_cmd->add_flag("--comm", run.comm, "Direct communication between operator and aggregator");
    run_cmd->add_flag("--both", run.both, "Run without and with communication");
    run_cmd->add_flag("--no-safety", run.no_safety, "Disable operator safety control");
    run_cmd->add_option("--seed", run.seed, "Override the scenario and signal seeds");
    run_cmd->add_option("--out", run.out, "Output directory");
    run_cmd->add_option("--assignments", run.assignments, "Directory written by select-safety");
    run_cmd->add_flag("--traces", run.traces, "Write per-tick trace CSVs");
    run_cmd->add_option("--threads", run.threads, "Worker threads (0 = hardware)");

    SelectArgs sel;
    auto* sel_cmd = app.add_subcommand("select-safety", "Choose the operator-controlled units per trial");
    sel_cmd->add_option("config", sel.config, "Scenario JSON (defaults when omitted)");
    sel_cmd->add_option("--strategy", sel.strategy, "benchmark, strategy1, strategy2 or all");
    sel_cmd->add_option("--seed", sel.seed, "Override the scenario and signal seeds");
    sel_cmd->add_option("--out", sel.out, "Output directory");
    sel_cmd->add_option("--increment", sel.increment, "Fraction of a constraint's candidates added per iteration")
        ->check(CLI::Range(1e-6, 1.0));
    sel_cmd->add_option("--trial", sel.trial, "Only this trial");
    sel_cmd->add_option("--threads", sel.threads, "Worker threads (0 = hardware)");

    std::string history, id_config, id_out;
    auto* id_cmd = app.add_subcommand("identify-as", "Estimate A_s from a bin history CSV");
    id_cmd->add_option("history", history, "One row per tick, one column per unit")->required();
    id_cmd->add_option("--config", id_config, "Scenario JSON for the bin layout");
    id_cmd->add_option("--out", id_out, "Matrix CSV (stdout when omitted)");

    std::string rep_dir, rep_out;
    auto* rep_cmd = app.add_subcommand("report", "Summarize a directory of metrics files");
    rep_cmd->add_option("dir", rep_dir, "Directory with metrics_*.json")->required();
    rep_cmd->add_option("--out", rep_out, "Where summary.csv/json go (default: dir)");

    std::string tune_config, tune_out = "tuning";
    int tune_trials = TuningOptions{}.trials;
    std::uint64_t tune_seed = TuningOptions{}.seed;
    auto* tune_cmd = app.add_subcommand("tune-gains", "Grid-search tracking gains on tuning trials");
    tune_cmd->add_option("config", tune_config, "Scenario JSON (defaults when omitted)");
    tune_cmd->add_option("--trials", tune_trials, "Tuning trials")->check(CLI::PositiveNumber);
    tune_cmd->add_option("--seed", tune_seed, "Tuning seed");
    tune_cmd->add_option("--out", tune_out, "Output directory");

    std::string f_config, f_out;
    std::optional<std::uint64_t> f_seed;
    auto* f_cmd = app.add_subcommand("feeder", "Write the scenario's calibrated feeder as JSON");
    f_cmd->add_option("config", f_config, "Scenario JSON (defaults when omitted)");
    f_cmd->add_option("--seed", f_seed, "Override the scenario and signal seeds");
    f_cmd->add_option("--out", f_out, "Feeder JSON (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*sel_cmd) return cmd_select(sel);
        if (*id_cmd) return cmd_identify(history, id_config, id_out);
        if (*rep_cmd) return cmd_report(rep_dir, rep_out);
        if (*tune_cmd) return cmd_tune(tune_config, tune_trials, tune_seed, tune_out);
        if (*f_cmd) return cmd_feeder(f_config, f_seed, f_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
