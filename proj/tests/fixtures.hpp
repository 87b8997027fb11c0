#pragma once

// Small scenarios shared by the selection and simulation tests. Built once
// per process; tests copy before modifying.

#include "tclsafe/sim.hpp"

namespace tclsafe::testing {

inline ScenarioConfig small_config() {
    ScenarioConfig cfg;
    cfg.trials = 2;
    cfg.horizon_s = 300.0;
    cfg.prerun_s = 1800.0;
    return cfg;
}

inline const Scenario& small_scenario() {
    static const Scenario sc = prepare_scenario(small_config());
    return sc;
}

} // namespace tclsafe::testing
