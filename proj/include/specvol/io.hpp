#pragma once

// Text formats: observation CSV, scenario JSON, estimate and Monte Carlo
// reports. Malformed input raises ConfigError.

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

#include "specvol/estimators_1d.hpp"
#include "specvol/estimators_md.hpp"
#include "specvol/montecarlo.hpp"
#include "specvol/observations.hpp"
#include "specvol/simulator.hpp"

namespace specvol {

/// Header `component,time,value`, one row per observation, components 0-based.
void write_observations_csv(std::ostream& out, const ObservationSet& obs);
ObservationSet read_observations_csv(std::istream& in);
ObservationSet read_observations_csv_file(const std::string& path);

/// Matrices as {"rows", "cols", "data"} with data row-major. Nested arrays
/// of rows are accepted on input.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const ScenarioConfig& config);
/// Keys follow the ScenarioConfig field names; unknown keys are rejected.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::string& path);

/// Columns time, x_<p>..., spot_<p><q>... on the fine grid.
void write_paths_csv(std::ostream& out, const PathBundle& paths);

nlohmann::json report_to_json(const EstimateReport& report, double level = 0.95);
/// Columns t, estimate, variance, ci_lo, ci_hi.
void write_report_csv(std::ostream& out, const EstimateReport& report, double level = 0.95);

nlohmann::json lmm_report_to_json(const LmmReport& report);
/// Columns t, p, q, estimate, variance, ci_lo, ci_hi for every entry.
void write_lmm_report_csv(std::ostream& out, const LmmReport& report, double level = 0.95);

nlohmann::json mc_report_to_json(const McReport& report, bool include_records = true);
/// One line per estimator with mean, bias, RMSE, RE and coverage.
void write_mc_summary(std::ostream& out, const McReport& report);

nlohmann::json table1_to_json(const std::vector<Table1Result>& rows);
void write_table1(std::ostream& out, const std::vector<Table1Result>& rows);
void write_table1_csv(std::ostream& out, const std::vector<Table1Result>& rows);

}  // namespace specvol
