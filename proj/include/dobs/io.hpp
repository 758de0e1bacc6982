#pragma once

#include "dobs/model.hpp"
#include "dobs/observer.hpp"
#include "dobs/synthesis.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace dobs {

/// Model plus initial-state prior as stored in a scenario file.
struct Scenario {
  NetworkModel model;
  Matrix P0;
  Vector x0_mean;
};

/// Scenario JSON:
///   {"A": [[..]], "Q": [[..]], "nodes": [{"C": [[..]], "R": [[..]]}],
///    "edges": [[j, i], ..], "P0": [[..]] | {"scaled_identity": s},
///    "x0_mean": [..] (optional)}
/// Node indices in "edges" are one-based; [j, i] means i receives from j.
/// Throws Parse (malformed, ragged rows) or DimensionMismatch.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const Scenario& scenario);

/// Gain file JSON (one-based indices, lossless doubles).
std::string gains_to_json(const GainSet& gains);
GainSet parse_gains(std::string_view json_text);
GainSet load_gains(const std::filesystem::path& path);

/// Throws InvalidArgument unless the gains fit the model (sizes and
/// neighborhoods).
void check_gains_match(const GainSet& gains, const NetworkModel& model);

/// "t,estimator,avg_error_norm"
std::string trace_csv(const SimulationTrace& trace);
/// "t,node,estimator,err_norm"
std::string trace_nodes_csv(const SimulationTrace& trace);
/// One avg-error-norm value per line, no header.
std::string trace_dat(const SimulationTrace& trace, EstimatorKind estimator);

/// Lossless decimal form of a double (shortest round-trip representation).
std::string format_double(double value);

/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace dobs
