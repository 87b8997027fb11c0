#pragma once

// Operator safety control: blocking and mode-count groups.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "tclsafe/controllers.hpp"
#include "tclsafe/tcl.hpp"

namespace tclsafe {

enum class SafetyKind : std::uint8_t { Free, Blocked, Group };

struct SafetyTag {
    SafetyKind kind = SafetyKind::Free;
    int group = -1;

    bool operator==(const SafetyTag&) const = default;
};

/// Upper: on-count never above the bound. Lower: on-count never below it.
enum class BoundKind : std::uint8_t { Upper, Lower };

struct ModeCountGroup {
    int id = 0;
    std::vector<std::size_t> members;
    BoundKind kind = BoundKind::Upper;
    int bound = 0;

    bool operator==(const ModeCountGroup&) const = default;
};

struct SafetyAssignment {
    std::vector<SafetyTag> tags;
    std::vector<ModeCountGroup> groups;

    static SafetyAssignment free(std::size_t n) { return {std::vector<SafetyTag>(n), {}}; }

    std::size_t size() const { return tags.size(); }
    std::size_t blocked_count() const;
    std::size_t grouped_count() const;
    /// Units under any form of operator control.
    std::size_t controlled_count() const { return blocked_count() + grouped_count(); }
    double controlled_fraction() const;
    /// Throws std::invalid_argument when tags and groups disagree.
    void validate() const;

    bool operator==(const SafetyAssignment&) const = default;
};

/// Pass/drop mask for aggregator commands: true = drop (blocked unit).
std::vector<bool> blocking_step(const SafetyAssignment& assignment);

/// Units the aggregator must leave alone (blocked or in a mode-count group).
std::vector<bool> operator_controlled_mask(const SafetyAssignment& assignment);

struct ModeCountStep {
    std::vector<std::pair<std::size_t, SwitchDirective>> directives;
    int on_count = 0;
    /// An unlocked unit at its limit could not be counter-switched, or a
    /// locked unit will be forced across the bound by its thermostat.
    bool infeasible = false;
};

/// Mode-count controller for one group. Keeps counter-switch reservations
/// between ticks.
class ModeCountController {
public:
    explicit ModeCountController(ModeCountGroup group) : group_(std::move(group)) {}

    ModeCountStep step(std::span<const TclState> states, std::span<const TclParams> params,
                       const AmbientConditions& amb);

    const ModeCountGroup& group() const { return group_; }
    /// locked unit -> reserved counter-switch partner
    const std::map<std::size_t, std::size_t>& reservations() const { return reservations_; }

private:
    ModeCountGroup group_;
    std::map<std::size_t, std::size_t> reservations_;
};

struct BoundSearchResult {
    int bound = 0;
    int simulations = 0;
};

/// Descending search (ascending for lower bounds) for the tightest bound the
/// group holds on its own over `horizon_steps`: after the on-count first
/// meets the bound it never crosses it again, no infeasible instants occur and
/// every temperature stays within one step's drift of the deadband.
BoundSearchResult find_feasible_bound(std::span<const std::size_t> members, BoundKind kind,
                                      std::span<const TclState> initial,
                                      std::span<const TclParams> params,
                                      const AmbientConditions& amb, int horizon_steps);

/// Message from the operator to the aggregator.
struct CommPayload {
    std::size_t blocked_count = 0;
    double blocked_fraction = 0.0;
    double delta_p_safety = 0.0; // kW change the safety directives cause next tick
};

/// Blocked count and fraction plus the signed power change of the pending
/// safety directives that the thermostat would not have made anyway.
CommPayload comm_payload(const SafetyAssignment& assignment,
                         std::span<const std::pair<std::size_t, SwitchDirective>> pending,
                         std::span<const TclState> states, std::span<const TclParams> params);

} // namespace tclsafe
