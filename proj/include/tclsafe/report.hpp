#pragma once

// Summary tables over trial metrics: one row per strategy and communication
// setting, protected results next to the matched unprotected runs.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tclsafe/sim.hpp"

namespace tclsafe {

struct SummaryRow {
    Strategy strategy = Strategy::Strategy2;
    bool comm = false;
    // Protected runs.
    int trials = 0;
    double safety_fraction_pct = 0.0;
    double rms_pct = 0.0;
    std::size_t violations = 0; // summed over trials, should be 0
    // Matched runs without safety control.
    int unprotected_trials = 0;
    double unprotected_rms_pct = 0.0;
    int unprotected_violating_trials = 0;
    // Distinct violated components per trial, averaged.
    double under_voltage_nodes = 0.0;
    double over_voltage_nodes = 0.0;
    double overloaded_lines = 0.0;
    double overloaded_transformers = 0.0;
};

struct Summary {
    std::vector<SummaryRow> rows; // strategy order, no-comm before comm
};

/// Averages per (strategy, comm); rows without any metrics are omitted.
Summary summarize(std::span<const TrialMetrics> metrics);

void write_summary_csv(std::ostream& out, const Summary& s);
nlohmann::json summary_to_json(const Summary& s);

/// Metrics files (*.json written by `run`) in `dir`, sorted by file name.
std::vector<TrialMetrics> read_metrics_dir(const std::string& dir);

/// Canonical file stem of a run, e.g. "strategy2_comm_safety_t03".
std::string metrics_stem(const TrialMetrics& m);

} // namespace tclsafe
