#pragma once

// JSON and CSV serialization of configs, feeders, assignments and matrices.

#include <Eigen/Dense>
#include <iosfwd>
#include <json.hpp>
#include <string>

#include "tclsafe/aggregate_model.hpp"
#include "tclsafe/feeder.hpp"
#include "tclsafe/safety.hpp"
#include "tclsafe/sim.hpp"

namespace tclsafe {

using json = nlohmann::json;

nlohmann::json feeder_to_json(const Feeder& f);
Feeder feeder_from_json(const nlohmann::json& j);
Feeder read_feeder_file(const std::string& path);

nlohmann::json assignment_to_json(const SafetyAssignment& a);
SafetyAssignment assignment_from_json(const nlohmann::json& j);
SafetyAssignment read_assignment_file(const std::string& path);

/// Missing keys keep their defaults; unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig read_scenario_file(const std::string& path);

nlohmann::json metrics_to_json(const TrialMetrics& m);
TrialMetrics metrics_from_json(const nlohmann::json& j);
void write_trace_csv(std::ostream& out, const TrialMetrics& m);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(std::istream& in);

/// One row per tick, one column per unit, bin ids (0-based).
void write_bin_history_csv(std::ostream& out, const BinHistory& h);
BinHistory read_bin_history_csv(std::istream& in);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

} // namespace tclsafe
