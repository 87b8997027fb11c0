#pragma once

// Offline, oracle-assisted choice of the units the operator takes over: rerun
// the trial with growing assignments until it is violation-free.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tclsafe/safety.hpp"
#include "tclsafe/sim.hpp"

namespace tclsafe {

struct SelectionOptions {
    double increment_fraction = 0.05; // of each constraint's candidate list
    int max_iterations = 1000;
    /// Communication variants the assignment must keep violation-free. The
    /// default covers both so comm and no-comm runs share one assignment.
    std::vector<bool> comm{false, true};
};

struct SelectionAuditRow {
    int iteration = 0;
    std::size_t violations = 0;  // violation-ticks summed over components and variants
    std::size_t components = 0;  // distinct violated components
    std::size_t blocked = 0;
    std::size_t grouped = 0;
    std::size_t added = 0;       // units assigned after this run
    std::string worst;           // most severe component, "type@node"
};

struct SelectionResult {
    SafetyAssignment assignment;
    bool feasible = true;
    std::string infeasible_reason;
    std::vector<SelectionAuditRow> audit;
    std::uint64_t scenario_hash = 0;
    /// Violations when the final iteration's additions are withdrawn (0 when
    /// nothing was added).
    std::size_t backoff_violations = 0;
};

/// Hash of everything a trial replay depends on.
std::uint64_t scenario_hash(const Scenario& sc, int trial, Strategy strategy, const std::vector<bool>& comm);

/// Preliminary runs (one per comm variant), then per violated component (most
/// severe over the variants first) the next
/// increment of its downstream order is assigned: blocked for the benchmark
/// and Strategy I, mode-count groups per service node for Strategy II with
/// bounds from the feasible-bound search (lower bounds for over-voltage).
/// Repeats until every run is violation-free or the candidates run out.
SelectionResult select_safety_set(const Scenario& sc, int trial, Strategy strategy, const SelectionOptions& opt = {});

/// Mode-count groups, one per (service node, bound kind), with the tightest
/// bound each holds from the trial's initial state. `kinds[i]` is used for
/// units with `selected[i]`.
SafetyAssignment build_mode_count_assignment(const Scenario& sc, int trial, const std::vector<bool>& selected,
                                             const std::vector<BoundKind>& kinds);

struct VerifyReport {
    std::size_t violations = 0;
    std::vector<ComponentViolation> components;
    std::size_t blocked = 0;
    std::size_t grouped = 0;
    double safety_fraction_pct = 0.0;
};

/// Full re-simulation of the trial under `assignment`.
VerifyReport verify_assignment(const Scenario& sc, int trial, Strategy strategy, bool comm,
                               const SafetyAssignment& assignment);

void write_selection_audit_csv(std::ostream& out, const SelectionResult& r);

} // namespace tclsafe
