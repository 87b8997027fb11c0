#pragma once

// Desk-scale radial feeder: a trunk with one lateral per trunk node, service
// transformers hanging off every primary node, and a few weak service nodes
// at the ends of the heavily loaded laterals. The weak nodes' impedance is
// fitted to the uncontrolled load.

#include <cstdint>
#include <span>
#include <vector>

#include "tclsafe/feeder.hpp"

namespace tclsafe {

struct SyntheticFeederSpec {
    std::uint64_t seed = 7;
    double base_kv = 7.2;
    double substation_vpu = 1.02;
    int trunk_nodes = 5;
    int lateral_nodes = 3;
    double trunk_km = 0.8;
    double lateral_km = 0.6;
    double service_km = 0.05;
    Complex trunk_z_per_km{0.05, 0.10};
    Complex lateral_z_per_km{3.0, 3.0};
    Complex service_z{2.0, 1.0};
    Complex weak_service_z_unit{1.0, 0.5}; // scaled during calibration
    int houses_min = 3;
    int houses_max = 8;
    int heavy_laterals = 1;     // the last laterals carry more service nodes
    double heavy_weight = 4.0;  // service-node share of a heavy lateral node vs a normal one
    int weak_nodes = 12;        // hung off the ends of the heavy laterals
    std::size_t weak_houses = 2;
    double weak_duty = 0.40;       // houses nearest this duty cycle go to weak nodes
    double weak_margin_pu = 0.0;   // lowest uncontrolled voltage = v_min + margin
    double rating_factor = 2.0;    // ratings relative to the largest uncontrolled loading
    double peak_floor_pu = 0.85;   // weak node voltage with every attached unit on, at most
    double baseload_kw = 0.9;
    double baseload_pf = 0.95;
};

struct FeederLayout {
    Feeder feeder;
    std::vector<int> weak_nodes;
};

/// Topology and house attachment. `duty` is each house's duty-cycle estimate.
FeederLayout build_synthetic_feeder(const SyntheticFeederSpec& spec, std::span<const double> duty);

struct CalibrationResult {
    std::vector<double> weak_scale; // impedance multiplier per weak node
    double min_voltage_pu = 0.0;    // over all snapshots after calibration
    std::size_t snapshots = 0;
};

/// Fits each weak node's service impedance so the lowest voltage over the
/// snapshots is v_min + margin, then sets line ampacities and transformer
/// ratings to `rating_factor` times the largest loading seen. Throws if a
/// snapshot still violates a limit afterwards.
///
/// `peak_kva` (per node, optional) is the load with every unit on. The fitted
/// impedance is capped so that load still leaves the node at
/// `peak_floor_pu` or above; otherwise a node whose units happened to stay off
/// in every snapshot could collapse the first time they switch on together.
CalibrationResult calibrate_feeder(FeederLayout& layout, const SyntheticFeederSpec& spec,
                                   std::span<const std::vector<Complex>> snapshots, double v_min_pu = 0.95,
                                   std::span<const Complex> peak_kva = {});

} // namespace tclsafe
