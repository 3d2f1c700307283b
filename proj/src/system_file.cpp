#include "structhinf/system_file.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "structhinf/errors.hpp"

namespace structhinf {

using nlohmann::json;

// Defined in the generated fixtures.cpp.
const char* builtin_fixture_source(const std::string& name);

namespace {

const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
    return j.at(key);
}

std::vector<int> int_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of integers");
    std::vector<int> out;
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw ValidationError(what + ": expected integers");
        out.push_back(v.get<int>());
    }
    return out;
}

std::vector<std::vector<int>> adjacency(const json& j, int n, const std::string& what) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ValidationError(what + ": expected " + std::to_string(n) + " neighbour lists");
    std::vector<std::vector<int>> out;
    for (const auto& row : j) {
        out.push_back(int_list(row, what));
        for (int v : out.back())
            if (v < 0 || v >= n) throw ValidationError(what + ": subsystem index " + std::to_string(v) + " out of range");
    }
    return out;
}

std::vector<std::string> string_list(const json& j, const std::string& what) {
    if (!j.is_array()) throw ValidationError(what + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) throw ValidationError(what + ": expected strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json_text(const std::string& text, const std::string& where) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

json number_or_inf(double x) {
    if (std::isfinite(x)) return x;
    return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
}

}  // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    // A bare 0 stands for the zero matrix of the expected shape.
    if (j.is_number() && j.get<double>() == 0.0) return MatrixXd::Zero(rows, cols);
    if (!j.is_array()) throw ValidationError(what + ": expected a row-major nested array");
    if (j.empty()) {
        if (rows == 0 || cols == 0) return MatrixXd::Zero(rows, cols);
        throw ValidationError(what + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) + ", got empty");
    }
    if (static_cast<Eigen::Index>(j.size()) != rows)
        throw ValidationError(what + ": expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
    MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const json& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
            throw ValidationError(what + ": row " + std::to_string(r) + " should have " + std::to_string(cols) +
                                  " entries");
        for (Eigen::Index c = 0; c < cols; ++c) {
            const json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw ValidationError(what + ": non-numeric entry");
            M(r, c) = v.get<double>();
        }
    }
    return M;
}

json matrix_to_json(const MatrixXd& M) {
    json out = json::array();
    for (Eigen::Index r = 0; r < M.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
        out.push_back(std::move(row));
    }
    return out;
}

SystemFile parse_system(const json& j) {
    if (!j.is_object()) throw ValidationError("system file: top level must be an object");
    SystemFile f;
    ParamSystem& s = f.sys;

    const json& params = require(j, "parameters", "system file");
    if (!params.is_array() || params.empty()) throw ValidationError("parameters: expected a nonempty array");
    std::vector<std::string> names;
    s.box.lo.resize(static_cast<Eigen::Index>(params.size()));
    s.box.hi.resize(static_cast<Eigen::Index>(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
        const json& p = params[k];
        names.push_back(require(p, "name", "parameters").get<std::string>());
        const double lo = require(p, "lo", "parameters").get<double>();
        const double hi = require(p, "hi", "parameters").get<double>();
        if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
            throw ValidationError("parameter '" + names.back() + "': empty or unbounded interval");
        s.box.lo(static_cast<Eigen::Index>(k)) = lo;
        s.box.hi(static_cast<Eigen::Index>(k)) = hi;
    }

    const json& part = require(j, "partition", "system file");
    s.partition.n = int_list(require(part, "n", "partition"), "partition.n");
    s.partition.m_w = int_list(require(part, "m_w", "partition"), "partition.m_w");
    s.partition.m_u = int_list(require(part, "m_u", "partition"), "partition.m_u");
    s.partition.o_y = int_list(require(part, "o_y", "partition"), "partition.o_y");
    s.partition.p = int_list(require(part, "p", "partition"), "partition.p");
    s.partition.check();
    if (s.partition.p_total() != static_cast<int>(names.size()))
        throw ValidationError("partition.p sums to " + std::to_string(s.partition.p_total()) + " but " +
                              std::to_string(names.size()) + " parameters are declared");

    s.xi = std::make_shared<BasisSet>(
        BasisSet::parse(string_list(require(j, "xi_basis", "system file"), "xi_basis"), names, BasisRole::Plant));
    f.eta = std::make_shared<BasisSet>(
        BasisSet::parse(string_list(require(j, "eta_basis", "system file"), "eta_basis"), names, BasisRole::Strategy));
    const auto iv = s.box.intervals();
    s.xi->check_on_box(iv);
    f.eta->check_on_box(iv);

    const int n = s.n(), mw = s.m_w(), mu = s.m_u(), oy = s.o_y();
    const json& mats = require(j, "matrices", "system file");
    if (!mats.is_array() || mats.size() != s.xi->size())
        throw ValidationError("matrices: expected one entry per xi basis function (" + std::to_string(s.xi->size()) +
                              ")");
    for (std::size_t l = 0; l < mats.size(); ++l) {
        const std::string w = "matrices[" + std::to_string(l) + "].";
        const json& m = mats[l];
        PlantCoefficients c;
        c.A = matrix_from_json(require(m, "A", w), n, n, w + "A");
        c.Bw = matrix_from_json(require(m, "Bw", w), n, mw, w + "Bw");
        c.Bu = matrix_from_json(require(m, "Bu", w), n, mu, w + "Bu");
        c.Cy = matrix_from_json(require(m, "Cy", w), oy, n, w + "Cy");
        c.Dyw = matrix_from_json(require(m, "Dyw", w), oy, mw, w + "Dyw");
        s.coeffs.push_back(std::move(c));
    }

    const json& perf = require(j, "performance", "system file");
    const json& cz = require(perf, "Cz", "performance");
    if (!cz.is_array() || cz.empty()) throw ValidationError("performance.Cz: expected a nonempty nested array");
    const auto oz = static_cast<Eigen::Index>(cz.size());
    s.Cz = matrix_from_json(cz, oz, n, "performance.Cz");
    s.Dzw = matrix_from_json(require(perf, "Dzw", "performance"), oz, mw, "performance.Dzw");
    s.Dzu = matrix_from_json(require(perf, "Dzu", "performance"), oz, mu, "performance.Dzu");

    const int N = s.partition.subsystems();
    s.control_graph =
        Graph::from_lists(adjacency(require(j, "control_graph", "system file"), N, "control_graph"), GraphRole::Control);
    s.design_graph =
        Graph::from_lists(adjacency(require(j, "design_graph", "system file"), N, "design_graph"), GraphRole::Design);

    check_dimensions(s);
    if (j.contains("design_graphs")) {
        const json& dg = j.at("design_graphs");
        if (!dg.is_object()) throw ValidationError("design_graphs: expected an object of named graphs");
        for (const auto& [name, lists] : dg.items())
            f.named_design_graphs.emplace_back(
                name, Graph::from_lists(adjacency(lists, N, "design_graphs." + name), GraphRole::Design));
    }

    if (j.contains("gamma0")) f.gamma0 = parse_gamma(json{{"gamma0", j.at("gamma0")}});
    if (j.contains("alpha0")) {
        const auto a = j.at("alpha0").get<std::vector<double>>();
        if (static_cast<int>(a.size()) != s.p()) throw ValidationError("alpha0: wrong length");
        f.alpha0 = Eigen::Map<const VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
        if (!s.box.contains(*f.alpha0)) throw ValidationError("alpha0 lies outside the parameter box");
    }
    if (j.contains("solver")) {
        const json& sv = j.at("solver");
        if (sv.contains("eps_inner")) f.eps_inner = sv.at("eps_inner").get<double>();
        if (sv.contains("eps_outer")) f.eps_outer = sv.at("eps_outer").get<double>();
        if (sv.contains("step_c")) f.step_c = sv.at("step_c").get<double>();
    }
    if (f.gamma0) (void)make_strategy(f, *f.gamma0);  // shape and mask check
    return f;
}

SystemFile parse_system_text(const std::string& text) { return parse_system(parse_json_text(text, "system file")); }

SystemFile load_system(const std::string& path) {
    static const std::string prefix = "builtin:";
    if (path.rfind(prefix, 0) == 0) return parse_system_text(builtin_text(path.substr(prefix.size())));
    return parse_system(parse_json_text(read_file(path), path));
}

std::vector<std::string> builtin_names() { return {"example1", "example1_full", "platoon"}; }

std::string builtin_text(const std::string& name) {
    const char* src = builtin_fixture_source(name);
    if (!src) throw ValidationError("unknown builtin fixture '" + name + "'");
    return src;
}

void set_design_graph(SystemFile& f, const Graph& g) {
    if (g.size() != f.sys.partition.subsystems()) throw ValidationError("design graph has the wrong size");
    f.sys.design_graph = g;
}

Graph design_graph_from_spec(const SystemFile& f, const std::string& spec) {
    const int N = f.sys.partition.subsystems();
    for (const auto& [name, g] : f.named_design_graphs)
        if (name == spec) return g;
    if (spec == "local") return Graph::self_loops(N, GraphRole::Design);
    if (spec == "complete" || spec == "full") return Graph::complete(N, GraphRole::Design);
    return Graph::from_lists(adjacency(parse_json_text(spec, "design graph"), N, "design graph"), GraphRole::Design);
}

GainExpansion make_strategy(const SystemFile& f, const std::vector<MatrixXd>& G) {
    GainExpansion gx;
    gx.eta = f.eta;
    gx.masks = structure_masks(f.sys.partition, f.sys.design_graph, *f.eta);
    if (G.size() != f.eta->size())
        throw ValidationError("strategy has " + std::to_string(G.size()) + " coefficients, eta basis has " +
                              std::to_string(f.eta->size()));
    for (std::size_t l = 0; l < G.size(); ++l) {
        if (G[l].rows() != f.sys.m_u() || G[l].cols() != f.sys.o_y())
            throw ValidationError("strategy coefficient " + std::to_string(l) + " should be " +
                                  std::to_string(f.sys.m_u()) + "x" + std::to_string(f.sys.o_y()));
        const MatrixXd outside = G[l].array() * (1.0 - gx.masks[l].array());
        if (!outside.isZero(0.0))
            throw ValidationError("strategy coefficient " + std::to_string(l) +
                                  " has nonzero entries the design graph does not allow");
    }
    gx.G = G;
    return gx;
}

GainExpansion initial_strategy(const SystemFile& f) {
    if (f.gamma0) return make_strategy(f, *f.gamma0);
    return zero_strategy(f.sys, f.eta);
}

std::vector<MatrixXd> parse_gamma(const json& j) {
    const json* arr = nullptr;
    for (const char* key : {"gamma_star", "gamma", "gamma0"})
        if (j.is_object() && j.contains(key)) {
            arr = &j.at(key);
            break;
        }
    if (!arr) throw ValidationError("gamma file: expected key 'gamma_star', 'gamma' or 'gamma0'");
    if (!arr->is_array()) throw ValidationError("gamma file: expected an array of matrices");
    std::vector<MatrixXd> out;
    for (std::size_t l = 0; l < arr->size(); ++l) {
        const json& m = (*arr)[l];
        const std::string w = "gamma[" + std::to_string(l) + "]";
        if (!m.is_array() || m.empty() || !m[0].is_array()) throw ValidationError(w + ": expected a nested array");
        out.push_back(matrix_from_json(m, static_cast<Eigen::Index>(m.size()),
                                       static_cast<Eigen::Index>(m[0].size()), w));
    }
    return out;
}

std::vector<MatrixXd> load_gamma(const std::string& path) { return parse_gamma(parse_json_text(read_file(path), path)); }

json result_to_json(const SaddleResult& r, const ParamSystem& sys) {
    json out;
    out["status"] = to_string(r.status);
    out["param_subgradient"] =
        r.param_path == ParamSubgradientPath::KroneckerRealization ? "kronecker" : "direct";
    json g = json::array();
    for (const auto& G : r.gamma_star.G) g.push_back(matrix_to_json(G));
    out["gamma_star"] = std::move(g);
    out["parameters"] = sys.param_names();
    out["alpha_star"] = std::vector<double>(r.alpha_star.data(), r.alpha_star.data() + r.alpha_star.size());
    out["J_star"] = number_or_inf(r.J_star);
    json tr = json::array();
    for (const auto& t : r.trace) {
        tr.push_back({{"k", t.k},
                      {"J", number_or_inf(t.J)},
                      {"alpha", std::vector<double>(t.alpha.data(), t.alpha.data() + t.alpha.size())},
                      {"inner_iterations", t.inner_iterations},
                      {"step", t.step},
                      {"gain_step_norm", t.gain_step_norm},
                      {"backtracks", t.backtracks}});
    }
    out["trace"] = std::move(tr);
    out["log"] = r.log;
    return out;
}

}  // namespace structhinf
