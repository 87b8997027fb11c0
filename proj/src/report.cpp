#include "tclsafe/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "tclsafe/io.hpp"

namespace tclsafe {

Summary summarize(std::span<const TrialMetrics> metrics) {
    Summary out;
    for (Strategy s : {Strategy::Benchmark, Strategy::Strategy1, Strategy::Strategy2})
        for (bool comm : {false, true}) {
            SummaryRow r;
            r.strategy = s;
            r.comm = comm;
            for (const TrialMetrics& m : metrics) {
                if (m.strategy != s || m.comm != comm) continue;
                if (m.safety) {
                    ++r.trials;
                    r.safety_fraction_pct += m.safety_fraction_pct;
                    r.rms_pct += m.rms_pct;
                    r.violations += m.total_violations();
                    continue;
                }
                ++r.unprotected_trials;
                r.unprotected_rms_pct += m.rms_pct;
                if (m.total_violations() > 0) ++r.unprotected_violating_trials;
                for (const auto& c : m.components) {
                    switch (c.type) {
                    case ViolationType::UnderVoltage: r.under_voltage_nodes += 1; break;
                    case ViolationType::OverVoltage: r.over_voltage_nodes += 1; break;
                    case ViolationType::OverCurrent: r.overloaded_lines += 1; break;
                    case ViolationType::TransformerOverload: r.overloaded_transformers += 1; break;
                    }
                }
            }
            if (r.trials == 0 && r.unprotected_trials == 0) continue;
            if (r.trials) {
                r.safety_fraction_pct /= r.trials;
                r.rms_pct /= r.trials;
            }
            if (r.unprotected_trials) {
                const double k = r.unprotected_trials;
                r.unprotected_rms_pct /= k;
                r.under_voltage_nodes /= k;
                r.over_voltage_nodes /= k;
                r.overloaded_lines /= k;
                r.overloaded_transformers /= k;
            }
            out.rows.push_back(r);
        }
    return out;
}

void write_summary_csv(std::ostream& out, const Summary& s) {
    out << "strategy,comm,trials,safety_fraction_pct,rms_pct,violations,unprotected_trials,unprotected_rms_pct,"
           "unprotected_violating_trials,under_voltage_nodes,over_voltage_nodes,overloaded_lines,"
           "overloaded_transformers\n";
    char buf[512];
    for (const auto& r : s.rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%.2f,%.2f,%zu,%d,%.2f,%d,%.2f,%.2f,%.2f,%.2f\n", to_string(r.strategy),
                      r.comm ? "comm" : "no-comm", r.trials, r.safety_fraction_pct, r.rms_pct, r.violations,
                      r.unprotected_trials, r.unprotected_rms_pct, r.unprotected_violating_trials,
                      r.under_voltage_nodes, r.over_voltage_nodes, r.overloaded_lines, r.overloaded_transformers);
        out << buf;
    }
}

nlohmann::json summary_to_json(const Summary& s) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"strategy", to_string(r.strategy)},
                        {"comm", r.comm},
                        {"trials", r.trials},
                        {"safety_fraction_pct", r.safety_fraction_pct},
                        {"rms_pct", r.rms_pct},
                        {"violations", r.violations},
                        {"no_safety",
                         {{"trials", r.unprotected_trials},
                          {"rms_pct", r.unprotected_rms_pct},
                          {"violating_trials", r.unprotected_violating_trials},
                          {"under_voltage_nodes", r.under_voltage_nodes},
                          {"over_voltage_nodes", r.over_voltage_nodes},
                          {"overloaded_lines", r.overloaded_lines},
                          {"overloaded_transformers", r.overloaded_transformers}}}});
    return {{"rows", rows}};
}

std::vector<TrialMetrics> read_metrics_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error(dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json" && e.path().filename().string().rfind("metrics_", 0) == 0)
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::vector<TrialMetrics> out;
    for (const auto& f : files) out.push_back(metrics_from_json(read_json_file(f.string())));
    return out;
}

std::string metrics_stem(const TrialMetrics& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s_%s_%s_t%02d", to_string(m.strategy), m.comm ? "comm" : "nocomm",
                  m.safety ? "safety" : "nosafety", m.trial);
    return buf;
}

} // namespace tclsafe
