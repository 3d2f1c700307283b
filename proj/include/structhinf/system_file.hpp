#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "structhinf/saddle.hpp"
#include "structhinf/system.hpp"

namespace structhinf {

/// Contents of a JSON system description.
struct SystemFile {
    ParamSystem sys;
    std::shared_ptr<const BasisSet> eta;
    std::optional<std::vector<MatrixXd>> gamma0;
    std::optional<VectorXd> alpha0;
    // Solver settings recorded with the fixture; absent keys keep the library defaults.
    std::optional<double> eps_inner;
    std::optional<double> eps_outer;
    std::optional<double> step_c;
    // Alternative design graphs a fixture may carry under "design_graphs".
    std::vector<std::pair<std::string, Graph>> named_design_graphs;
};

/// Parses and validates dimensions. Throws ValidationError or ParseError.
SystemFile parse_system(const nlohmann::json& j);
SystemFile parse_system_text(const std::string& text);
/// `path` may also be "builtin:<name>" for a bundled fixture.
SystemFile load_system(const std::string& path);

/// Bundled fixtures: "example1", "example1_full", "platoon".
std::vector<std::string> builtin_names();
std::string builtin_text(const std::string& name);

/// Replaces the design graph and recomputes nothing else.
void set_design_graph(SystemFile& f, const Graph& g);
/// `spec` is a name from "design_graphs", "local", "complete", or a JSON list of neighbour lists.
Graph design_graph_from_spec(const SystemFile& f, const std::string& spec);

/// Strategy with masks from the system's design graph. Throws ValidationError
/// when a coefficient has the wrong shape or a nonzero disallowed entry.
GainExpansion make_strategy(const SystemFile& f, const std::vector<MatrixXd>& G);
GainExpansion initial_strategy(const SystemFile& f);  // gamma0, or zero if absent

/// Reads coefficient matrices from a JSON file with key "gamma_star", "gamma" or "gamma0".
std::vector<MatrixXd> load_gamma(const std::string& path);
std::vector<MatrixXd> parse_gamma(const nlohmann::json& j);

nlohmann::json matrix_to_json(const MatrixXd& M);
MatrixXd matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what);
nlohmann::json result_to_json(const SaddleResult& r, const ParamSystem& sys);

/// Shortest round-trip formatting used by every text output.
std::string format_double(double x);

}  // namespace structhinf
