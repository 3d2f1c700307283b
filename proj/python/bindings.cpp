#include <cmath>
#include <limits>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "structhinf/errors.hpp"
#include "structhinf/parallel.hpp"
#include "structhinf/ratio.hpp"
#include "structhinf/saddle.hpp"
#include "structhinf/selftest.hpp"
#include "structhinf/system_file.hpp"

namespace py = pybind11;
using namespace structhinf;

namespace {

GainExpansion strategy_of(const SystemFile& f, const std::optional<std::vector<MatrixXd>>& gamma) {
    return gamma ? make_strategy(f, *gamma) : initial_strategy(f);
}

SaddleOptions saddle_options(const SystemFile& f, std::optional<double> eps_inner, std::optional<double> eps_outer,
                             std::optional<double> step_c, int max_outer, int max_inner, const std::string& first) {
    SaddleOptions o;
    o.eps_inner = eps_inner.value_or(f.eps_inner.value_or(o.eps_inner));
    o.eps_outer = eps_outer.value_or(f.eps_outer.value_or(o.eps_outer));
    o.step.c = step_c.value_or(f.step_c.value_or(o.step.c));
    o.max_outer = max_outer;
    o.max_inner = max_inner;
    if (first == "unbounded")
        o.inner_first_step = InnerFirstStep::Unbounded;
    else if (first == "schedule")
        o.inner_first_step = InnerFirstStep::Schedule;
    else
        throw ValidationError("inner_first_step must be 'unbounded' or 'schedule'");
    return o;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Structured parameter-dependent H-infinity static output feedback design";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<SystemFile>(m, "System")
        .def_property_readonly("param_names", [](const SystemFile& f) { return f.sys.param_names(); })
        .def_property_readonly("lower", [](const SystemFile& f) { return f.sys.box.lo; })
        .def_property_readonly("upper", [](const SystemFile& f) { return f.sys.box.hi; })
        .def_property_readonly("n", [](const SystemFile& f) { return f.sys.n(); })
        .def_property_readonly("m_u", [](const SystemFile& f) { return f.sys.m_u(); })
        .def_property_readonly("o_y", [](const SystemFile& f) { return f.sys.o_y(); })
        .def_property_readonly("eta_size", [](const SystemFile& f) { return static_cast<int>(f.eta->size()); })
        .def_property_readonly("gamma0", [](const SystemFile& f) { return f.gamma0; })
        .def_property_readonly("alpha0", [](const SystemFile& f) { return f.alpha0; })
        .def_property_readonly("design_graph", [](const SystemFile& f) { return f.sys.design_graph.to_lists(); })
        .def_property_readonly("masks", [](const SystemFile& f) { return initial_strategy(f).masks; })
        .def(
            "with_design_graph",
            [](const SystemFile& f, const std::string& spec) {
                SystemFile out = f;
                set_design_graph(out, design_graph_from_spec(f, spec));
                return out;
            },
            py::arg("spec"), "Copy with the design graph replaced (a name, 'local', 'complete', or JSON lists).");

    m.def("load_system", &load_system, py::arg("path"), "Load a JSON system file or 'builtin:<name>'.");
    m.def("parse_system", &parse_system_text, py::arg("text"));
    m.def("builtin_names", &builtin_names);

    m.def(
        "validate",
        [](const SystemFile& f, int grid) {
            ValidationOptions vo;
            vo.grid_points = grid;
            const ValidationReport r = validate_system(f.sys, vo);
            py::dict d;
            d["ok"] = r.ok();
            d["errors"] = r.errors;
            d["warnings"] = r.warnings;
            d["notes"] = r.notes;
            return d;
        },
        py::arg("system"), py::arg("grid") = 3);

    m.def(
        "hinf_norm",
        [](const MatrixXd& A, const MatrixXd& B, const MatrixXd& C, const MatrixXd& D, double rel_tol) {
            HinfOptions o;
            o.rel_tol = rel_tol;
            const HinfResult r = hinf_norm(StateSpace{A, B, C, D}, o);
            std::vector<double> omegas;
            for (const Peak& p : r.peaks) omegas.push_back(p.omega);
            return py::make_tuple(r.gamma, omegas);
        },
        py::arg("A"), py::arg("B"), py::arg("C"), py::arg("D"), py::arg("rel_tol") = 1e-7,
        "Norm of C (sI - A)^-1 B + D and its peak frequencies; inf when A is not Hurwitz.");

    m.def(
        "norm",
        [](const SystemFile& f, const VectorXd& alpha, std::optional<std::vector<MatrixXd>> gamma) {
            return objective(f.sys, strategy_of(f, gamma), alpha);
        },
        py::arg("system"), py::arg("alpha"), py::arg("gamma") = py::none(),
        "J(Gamma, alpha); gamma defaults to the system's gamma0.");

    m.def(
        "closed_loop",
        [](const SystemFile& f, const VectorXd& alpha, std::optional<std::vector<MatrixXd>> gamma) {
            const StateSpace s = closed_loop(f.sys, strategy_of(f, gamma), alpha);
            return py::make_tuple(s.A, s.B, s.C, s.D);
        },
        py::arg("system"), py::arg("alpha"), py::arg("gamma") = py::none());

    m.def(
        "eval_strategy",
        [](const SystemFile& f, const std::vector<MatrixXd>& gamma, const VectorXd& alpha) {
            return eval_strategy(make_strategy(f, gamma), alpha);
        },
        py::arg("system"), py::arg("gamma"), py::arg("alpha"));

    m.def(
        "sweep",
        [](const SystemFile& f, int grid, std::optional<std::vector<MatrixXd>> gamma) {
            const GainExpansion g = strategy_of(f, gamma);
            const std::vector<VectorXd> pts = f.sys.box.grid(grid);
            MatrixXd out(static_cast<Eigen::Index>(pts.size()), f.sys.p() + 1);
            {
                py::gil_scoped_release release;
                parallel_for(pts.size(), [&](std::size_t k) {
                    const auto r = static_cast<Eigen::Index>(k);
                    out.row(r).head(f.sys.p()) = pts[k].transpose();
                    out(r, f.sys.p()) = objective(f.sys, g, pts[k]);
                });
            }
            return out;
        },
        py::arg("system"), py::arg("grid"), py::arg("gamma") = py::none(),
        "Rows of (alpha_1, ..., alpha_p, J) over a uniform grid.");

    m.def(
        "worst_case",
        [](const SystemFile& f, int grid, std::optional<std::vector<MatrixXd>> gamma) {
            const GainExpansion g = strategy_of(f, gamma);
            WorstCase wc;
            {
                py::gil_scoped_release release;
                wc = worst_case(f.sys, g, grid, SaddleOptions{});
            }
            return py::make_tuple(wc.J, wc.alpha);
        },
        py::arg("system"), py::arg("grid") = 11, py::arg("gamma") = py::none());

    m.def(
        "design_json",
        [](const SystemFile& f, std::optional<std::vector<MatrixXd>> gamma0, std::optional<VectorXd> alpha0,
           std::optional<double> eps_inner, std::optional<double> eps_outer, std::optional<double> step_c,
           int max_outer, int max_inner, const std::string& inner_first_step) {
            const GainExpansion g = strategy_of(f, gamma0);
            const VectorXd a0 = alpha0 ? *alpha0 : f.alpha0 ? *f.alpha0 : VectorXd(0.5 * (f.sys.box.lo + f.sys.box.hi));
            const SaddleOptions o = saddle_options(f, eps_inner, eps_outer, step_c, max_outer, max_inner, inner_first_step);
            std::string out;
            {
                py::gil_scoped_release release;
                out = result_to_json(solve_saddle(f.sys, g, a0, o), f.sys).dump();
            }
            return out;
        },
        py::arg("system"), py::arg("gamma0") = py::none(), py::arg("alpha0") = py::none(),
        py::arg("eps_inner") = py::none(), py::arg("eps_outer") = py::none(), py::arg("step_c") = py::none(),
        py::arg("max_outer") = 500, py::arg("max_inner") = 200, py::arg("inner_first_step") = "unbounded",
        "Saddle-point design; returns the result as a JSON string.");

    m.def(
        "ratio",
        [](const SystemFile& f, std::optional<std::vector<MatrixXd>> gamma, const SystemFile& full, int grid,
           int restarts, std::uint64_t seed) {
            BaselineOptions o;
            o.restarts = restarts;
            o.seed = seed;
            const GainExpansion g = strategy_of(f, gamma);
            RatioReport r;
            {
                py::gil_scoped_release release;
                r = competitive_ratio(f.sys, g, full.sys, grid, MatrixXd(), o);
            }
            MatrixXd pts(static_cast<Eigen::Index>(r.points.size()), f.sys.p() + 3);
            for (std::size_t k = 0; k < r.points.size(); ++k) {
                const auto i = static_cast<Eigen::Index>(k);
                pts.row(i).head(f.sys.p()) = r.points[k].alpha.transpose();
                pts(i, f.sys.p()) = r.points[k].J_strategy;
                pts(i, f.sys.p() + 1) = r.points[k].J_baseline;
                pts(i, f.sys.p() + 2) = r.points[k].ratio;
            }
            py::dict d;
            d["r"] = r.r;
            d["argmax"] = r.argmax;
            d["points"] = pts;
            d["warnings"] = r.warnings;
            return d;
        },
        py::arg("system"), py::arg("gamma"), py::arg("baseline_system"), py::arg("grid") = 11,
        py::arg("restarts") = 8, py::arg("seed") = 1,
        "Competitive ratio; points has columns (alpha..., J, J_baseline, ratio).");

    m.def(
        "selftest",
        [](unsigned seed) {
            std::vector<py::tuple> out;
            for (const SelftestCase& c : run_selftest(seed)) out.push_back(py::make_tuple(c.name, c.passed, c.detail));
            return out;
        },
        py::arg("seed") = 1);
}
