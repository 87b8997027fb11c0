#pragma once

// Radial distribution feeder: balanced single-phase-equivalent power flow and
// constraint monitoring.

#include <complex>
#include <cstdint>
#include <deque>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tclsafe/tcl.hpp"

namespace tclsafe {

using Complex = std::complex<double>;

struct FeederNode {
    std::string name;
    int parent = -1; // -1 for the substation bus
    // Edge from the parent into this node.
    double r_ohm = 0.0;
    double x_ohm = 0.0;
    double length_km = 0.0;
    double ampacity_a = 0.0;      // 0 = not monitored
    double transformer_kva = 0.0; // 0 = not a transformer
    bool service = false;         // voltage monitored (meter)
};

struct Feeder {
    double base_kv = 7.2; // line-to-neutral
    double substation_vpu = 1.02;
    std::vector<FeederNode> nodes;
    std::vector<int> house_node; // house (unit) -> node
    double baseload_kw = 0.9;    // constant-power non-AC load per house
    double baseload_pf = 0.95;

    std::size_t node_count() const { return nodes.size(); }
    /// Throws std::invalid_argument unless the nodes form a tree rooted at node 0
    /// and every house maps to a node.
    void validate() const;
    /// Parent-before-child order starting at the root.
    std::vector<int> topological_order() const;
    std::vector<std::vector<int>> children() const;
    /// Line length from the substation to each node, km.
    std::vector<double> distance_from_root() const;
    /// Whether `node` lies in the subtree rooted at `ancestor`.
    bool in_subtree(int node, int ancestor) const;
};

/// Q = P tan(acos(pf)).
double reactive_power(double p_kw, double pf);

/// Complex load (kVA) at every node from AC status and baseload.
std::vector<Complex> node_loads(const Feeder& feeder, std::span<const TclState> states,
                                std::span<const TclParams> params);

struct PowerFlowResult {
    std::vector<Complex> voltage_kv;     // per node
    std::vector<double> voltage_pu;      // per node
    std::vector<Complex> branch_current; // A, edge into each node (root: injection)
    Complex substation_power;            // kVA
    double losses_kw = 0.0;
    int iterations = 0;
};

class PowerFlowCollapse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Forward-backward sweep with constant-power loads, iterated until the
/// largest voltage update is below `tol_pu`.
PowerFlowResult power_flow(const Feeder& feeder, std::span<const Complex> loads_kva, double tol_pu = 1e-6,
                           int max_iterations = 100);

enum class ViolationType : std::uint8_t { OverCurrent, UnderVoltage, OverVoltage, TransformerOverload };

const char* to_string(ViolationType t);

struct Violation {
    ViolationType type;
    int node;        // node index (edge into it for lines/transformers)
    double value;    // A, p.u. or kVA
    double limit;
    double severity; // relative excess over the limit
};

struct ConstraintReport {
    long tick = 0;
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    std::size_t count(ViolationType t) const;
};

struct ConstraintLimits {
    double v_min_pu = 0.95;
    double v_max_pu = 1.05;
    double line_fraction = 1.0;
    double transformer_fraction = 1.0;
    double transformer_window_hours = 1.0;
};

/// Table-style limit checks with a trailing average of transformer apparent power.
class ConstraintMonitor {
public:
    ConstraintMonitor(const Feeder& feeder, double h_hours, ConstraintLimits limits = {});

    ConstraintReport check(const PowerFlowResult& flow);

    /// Apparent power seen by each transformer edge, kVA.
    static std::vector<double> transformer_power(const Feeder& feeder, const PowerFlowResult& flow);

private:
    const Feeder* feeder_;
    ConstraintLimits limits_;
    std::size_t window_;
    std::vector<int> transformers_;
    std::vector<std::deque<double>> history_;
    std::vector<double> sums_;
    long tick_ = 0;
};

enum class ComponentKind : std::uint8_t { Edge, Node };

struct CandidateOrder {
    std::vector<std::size_t> units;
    std::size_t first_stage = 0; // units at/below the constrained component
};

/// Units ordered by blocking priority for a constraint. Edge (overload): units
/// downstream of the edge, farthest first. Node (voltage): units at or below
/// the node farthest first, then the remaining units by how far from the
/// substation their branch point on the substation path lies.
CandidateOrder downstream_order(const Feeder& feeder, ComponentKind kind, int component);

} // namespace tclsafe
