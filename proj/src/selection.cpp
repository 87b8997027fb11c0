#include "tclsafe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <tuple>

#include "tclsafe/io.hpp"

namespace tclsafe {

std::uint64_t scenario_hash(const Scenario& sc, int trial, Strategy strategy, const std::vector<bool>& comm) {
    std::string bytes = scenario_to_json(sc.cfg).dump();
    bytes += feeder_to_json(sc.feeder).dump();
    bytes += "|" + std::to_string(trial) + "|" + to_string(strategy);
    for (bool c : comm) bytes += c ? "|comm" : "|no-comm";
    return fnv1a(bytes);
}

SafetyAssignment build_mode_count_assignment(const Scenario& sc, int trial, const std::vector<bool>& selected,
                                             const std::vector<BoundKind>& kinds) {
    const std::size_t n = sc.units();
    if (selected.size() != n || kinds.size() != n) throw std::invalid_argument("mode-count assignment: size mismatch");
    const TrialScenario& tr = sc.trials.at(static_cast<std::size_t>(trial));

    std::map<std::pair<int, int>, std::vector<std::size_t>> by_node;
    for (std::size_t i = 0; i < n; ++i)
        if (selected[i]) by_node[{sc.feeder.house_node[i], static_cast<int>(kinds[i])}].push_back(i);

    SafetyAssignment a = SafetyAssignment::free(n);
    for (auto& [key, members] : by_node) {
        const BoundKind kind = static_cast<BoundKind>(key.second);
        const int id = static_cast<int>(a.groups.size());
        const BoundSearchResult b = find_feasible_bound(members, kind, tr.initial, sc.params, sc.amb, sc.ticks);
        for (std::size_t m : members) a.tags[m] = {SafetyKind::Group, id};
        a.groups.push_back({id, members, kind, b.bound});
    }
    return a;
}

VerifyReport verify_assignment(const Scenario& sc, int trial, Strategy strategy, bool comm,
                               const SafetyAssignment& assignment) {
    const TrialMetrics m = run_trial(sc, trial, {strategy, comm, false}, assignment);
    VerifyReport r;
    r.violations = m.total_violations();
    r.components = m.components;
    r.blocked = m.blocked;
    r.grouped = m.grouped;
    r.safety_fraction_pct = m.safety_fraction_pct;
    return r;
}

namespace {

ComponentKind kind_for(ViolationType t) {
    return t == ViolationType::OverCurrent || t == ViolationType::TransformerOverload ? ComponentKind::Edge
                                                                                       : ComponentKind::Node;
}

struct Cursor {
    CandidateOrder order;
    std::size_t next = 0;
};

// Runs every variant and merges the violated components, keeping the worst
// severity and longest duration of each.
VerifyReport verify_variants(const Scenario& sc, int trial, Strategy strategy, const std::vector<bool>& comm,
                             const SafetyAssignment& assignment) {
    VerifyReport out;
    std::map<std::pair<int, int>, ComponentViolation> merged;
    for (bool c : comm) {
        VerifyReport r = verify_assignment(sc, trial, strategy, c, assignment);
        out.violations += r.violations;
        out.blocked = r.blocked;
        out.grouped = r.grouped;
        out.safety_fraction_pct = r.safety_fraction_pct;
        for (const auto& v : r.components) {
            auto [it, fresh] = merged.try_emplace({static_cast<int>(v.type), v.node}, v);
            if (fresh) continue;
            it->second.ticks = std::max(it->second.ticks, v.ticks);
            it->second.max_severity = std::max(it->second.max_severity, v.max_severity);
        }
    }
    for (const auto& [key, v] : merged) out.components.push_back(v);
    return out;
}

} // namespace

SelectionResult select_safety_set(const Scenario& sc, int trial, Strategy strategy, const SelectionOptions& opt) {
    if (!(opt.increment_fraction > 0.0 && opt.increment_fraction <= 1.0))
        throw std::invalid_argument("select_safety_set: increment fraction must be in (0, 1]");
    if (opt.comm.empty()) throw std::invalid_argument("select_safety_set: no communication variant to verify");
    const std::vector<bool>& comm = opt.comm;
    const std::size_t n = sc.units();
    const bool mode_count = strategy == Strategy::Strategy2;

    SelectionResult res;
    res.scenario_hash = scenario_hash(sc, trial, strategy, comm);
    res.assignment = SafetyAssignment::free(n);

    std::vector<bool> selected(n, false);
    std::vector<BoundKind> kinds(n, BoundKind::Upper);
    std::map<std::pair<int, int>, Cursor> cursors;
    SafetyAssignment previous = res.assignment;
    bool added_any = false;

    for (int it = 0;; ++it) {
        const VerifyReport run = verify_variants(sc, trial, strategy, comm, res.assignment);
        SelectionAuditRow row;
        row.iteration = it;
        row.violations = run.violations;
        row.components = run.components.size();
        row.blocked = run.blocked;
        row.grouped = run.grouped;
        if (run.violations == 0) {
            res.audit.push_back(row);
            break;
        }
        if (it >= opt.max_iterations) {
            res.audit.push_back(row);
            res.feasible = false;
            res.infeasible_reason = "no violation-free assignment within " + std::to_string(opt.max_iterations) + " iterations";
            return res;
        }

        // Most severe first; ties by type then node.
        std::vector<ComponentViolation> comps = run.components;
        std::sort(comps.begin(), comps.end(), [](const ComponentViolation& a, const ComponentViolation& b) {
            return std::tie(b.max_severity, a.type, a.node) < std::tie(a.max_severity, b.type, b.node);
        });
        row.worst = std::string(to_string(comps.front().type)) + "@" + std::to_string(comps.front().node);

        std::size_t added = 0;
        for (const auto& c : comps) {
            const auto key = std::make_pair(static_cast<int>(c.type), c.node);
            auto cit = cursors.find(key);
            if (cit == cursors.end())
                cit = cursors.emplace(key, Cursor{downstream_order(sc.feeder, kind_for(c.type), c.node), 0}).first;
            Cursor& cur = cit->second;
            const std::size_t total = cur.order.units.size();
            const auto step = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(opt.increment_fraction * static_cast<double>(total))));
            // An increment never straddles the two stages of the order.
            const std::size_t stop_at = cur.next < cur.order.first_stage ? cur.order.first_stage : total;
            std::size_t taken = 0;
            while (cur.next < stop_at && taken < step) {
                const std::size_t u = cur.order.units[cur.next++];
                if (selected[u]) continue;
                selected[u] = true;
                kinds[u] = c.type == ViolationType::OverVoltage ? BoundKind::Lower : BoundKind::Upper;
                ++taken;
            }
            added += taken;
        }
        row.added = added;
        res.audit.push_back(row);
        if (added == 0) {
            res.feasible = false;
            res.infeasible_reason = "violations remain after every candidate of the violated constraints was assigned";
            return res;
        }

        previous = res.assignment;
        added_any = true;
        if (mode_count) {
            res.assignment = build_mode_count_assignment(sc, trial, selected, kinds);
        } else {
            for (std::size_t i = 0; i < n; ++i)
                if (selected[i]) res.assignment.tags[i] = {SafetyKind::Blocked, -1};
        }
    }
    if (added_any) res.backoff_violations = verify_variants(sc, trial, strategy, comm, previous).violations;
    return res;
}

void write_selection_audit_csv(std::ostream& out, const SelectionResult& r) {
    out << "iteration,violations,components,blocked,grouped,added,worst\n";
    for (const auto& a : r.audit)
        out << a.iteration << ',' << a.violations << ',' << a.components << ',' << a.blocked << ',' << a.grouped << ','
            << a.added << ',' << a.worst << '\n';
}

} // namespace tclsafe
