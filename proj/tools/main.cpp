// structhinf command-line tool.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "structhinf/errors.hpp"
#include "structhinf/parallel.hpp"
#include "structhinf/ratio.hpp"
#include "structhinf/saddle.hpp"
#include "structhinf/selftest.hpp"
#include "structhinf/system_file.hpp"

using namespace structhinf;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct Flags {
    std::string system;
    std::string output;
    unsigned seed = 1;
    double tol_hinf = 1e-7;
    double tol_peak = 1e-6;
    double tol_mult = 1e-6;
    std::optional<double> eps_inner, eps_outer;
    std::string step;
    int max_outer = 500;
    int max_inner = 200;
    double verify_radius = 1e-2;
    int verify_samples = 200;
    std::string design_graph;
    std::string inner_first_step = "unbounded";

    // per-command
    std::string gamma_file;
    bool zero_gain = false;
    std::vector<double> alpha;
    bool worst_case = false;
    int grid = -1;
    bool verify = false;
    std::string baseline_system;
    int restarts = 8;
    int baseline_iter = 100;
    double baseline_step = 0.1;
};

void emit(const Flags& f, const std::string& text) {
    if (f.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(f.output, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + f.output);
    out << text;
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

json number_or_inf(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    return x;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

HinfOptions hinf_options(const Flags& f) {
    HinfOptions h;
    h.rel_tol = f.tol_hinf;
    h.tol_peak = f.tol_peak;
    h.tol_mult = f.tol_mult;
    return h;
}

SystemFile load(const Flags& f) {
    if (f.system.empty()) throw ValidationError("--system is required");
    SystemFile sf = load_system(f.system);
    if (!f.design_graph.empty()) set_design_graph(sf, design_graph_from_spec(sf, f.design_graph));
    return sf;
}

SaddleOptions saddle_options(const Flags& f, const SystemFile& sf) {
    SaddleOptions o;
    o.hinf = hinf_options(f);
    o.eps_inner = f.eps_inner.value_or(sf.eps_inner.value_or(o.eps_inner));
    o.eps_outer = f.eps_outer.value_or(sf.eps_outer.value_or(o.eps_outer));
    o.step.c = sf.step_c.value_or(o.step.c);
    if (!f.step.empty()) o.step = StepSchedule::parse(f.step);
    o.max_outer = f.max_outer;
    o.max_inner = f.max_inner;
    if (f.inner_first_step == "unbounded")
        o.inner_first_step = InnerFirstStep::Unbounded;
    else if (f.inner_first_step == "schedule")
        o.inner_first_step = InnerFirstStep::Schedule;
    else
        throw ValidationError("--inner-first-step must be 'unbounded' or 'schedule'");
    return o;
}

GainExpansion strategy(const Flags& f, const SystemFile& sf) {
    if (f.zero_gain) return make_strategy(sf, std::vector<MatrixXd>(sf.eta->size(), MatrixXd::Zero(sf.sys.m_u(), sf.sys.o_y())));
    if (!f.gamma_file.empty()) return make_strategy(sf, load_gamma(f.gamma_file));
    if (!sf.gamma0) throw ValidationError("no strategy: pass --gamma or --zero-gain");
    return initial_strategy(sf);
}

VectorXd alpha_arg(const Flags& f, const SystemFile& sf) {
    if (f.alpha.empty()) {
        if (sf.alpha0) return *sf.alpha0;
        throw ValidationError("--alpha is required");
    }
    if (static_cast<int>(f.alpha.size()) != sf.sys.p())
        throw ValidationError("--alpha needs " + std::to_string(sf.sys.p()) + " values");
    VectorXd a = Eigen::Map<const VectorXd>(f.alpha.data(), static_cast<Eigen::Index>(f.alpha.size()));
    if (!sf.sys.box.contains(a)) throw ValidationError("--alpha lies outside the parameter box");
    return a;
}

int cmd_validate(const Flags& f) {
    const SystemFile sf = load(f);
    ValidationOptions vo;
    if (f.grid > 0) vo.grid_points = f.grid;
    ValidationReport rep = validate_system(sf.sys, vo);
    if (sf.gamma0) {
        try {
            initial_strategy(sf);
        } catch (const ValidationError& e) {
            rep.errors.push_back(std::string("gamma0: ") + e.what());
        }
    }
    json out{{"ok", rep.ok()}, {"errors", rep.errors}, {"warnings", rep.warnings}, {"notes", rep.notes}};
    for (const auto& e : rep.errors) std::cerr << "error: " << e << "\n";
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    emit(f, json_text(out));
    return rep.ok() ? kExitOk : kExitValidation;
}

int cmd_norm(const Flags& f) {
    const SystemFile sf = load(f);
    const GainExpansion g = strategy(f, sf);
    const SaddleOptions so = saddle_options(f, sf);
    json out;
    VectorXd a;
    double J;
    if (f.worst_case) {
        const WorstCase wc = worst_case(sf.sys, g, f.grid > 0 ? f.grid : 11, so);
        a = wc.alpha;
        J = wc.J;
        out["mode"] = "worst_case";
    } else {
        a = alpha_arg(f, sf);
        J = objective(sf.sys, g, a, so.hinf);
        out["mode"] = "point";
    }
    const bool stable = std::isfinite(J);
    out["parameters"] = sf.sys.param_names();
    out["alpha"] = to_std(a);
    out["J"] = number_or_inf(J);
    out["stable"] = stable;
    if (!stable) std::cerr << "warning: closed loop is unstable at this point\n";
    std::cout << "J = " << (stable ? format_double(J) : std::string("inf")) << "\n";
    if (!f.output.empty()) emit(f, json_text(out));
    return kExitOk;
}

int cmd_design(const Flags& f) {
    const SystemFile sf = load(f);
    const GainExpansion g0 = strategy(f, sf);
    const SaddleOptions so = saddle_options(f, sf);
    const VectorXd a0 = f.alpha.empty() ? (sf.alpha0 ? *sf.alpha0 : VectorXd(0.5 * (sf.sys.box.lo + sf.sys.box.hi)))
                                        : alpha_arg(f, sf);
    const SaddleResult r = solve_saddle(sf.sys, g0, a0, so);
    json out = result_to_json(r, sf.sys);
    out["design_graph"] = sf.sys.design_graph.to_lists();
    out["settings"] = {{"eps_inner", so.eps_inner},
                       {"eps_outer", so.eps_outer},
                       {"step", so.step.to_string()},
                       {"max_outer", so.max_outer},
                       {"max_inner", so.max_inner},
                       {"inner_first_step", f.inner_first_step},
                       {"seed", f.seed}};
    if (f.verify) {
        const VerifyReport v = verify_saddle(sf.sys, r, f.verify_radius, f.verify_samples, so.eps_outer, f.seed, so.hinf);
        out["verify"] = {{"radius", f.verify_radius},
                         {"samples", f.verify_samples},
                         {"max_alpha_violation", v.max_alpha_violation},
                         {"max_gamma_violation", v.max_gamma_violation},
                         {"passed", v.passed()}};
    }
    if (f.worst_case) {
        const WorstCase wc = worst_case(sf.sys, r.gamma_star, f.grid > 0 ? f.grid : 11, so);
        out["worst_case"] = {{"alpha", to_std(wc.alpha)}, {"J", number_or_inf(wc.J)}};
    }
    for (const auto& l : r.log) std::cerr << "note: " << l << "\n";
    std::cerr << "status " << to_string(r.status) << ", J* = " << format_double(r.J_star) << ", outer iterations "
              << r.trace.size() << "\n";
    emit(f, json_text(out));
    return r.status == SaddleStatus::InstabilityAbort ? kExitNumerical : kExitOk;
}

int cmd_sweep(const Flags& f) {
    const SystemFile sf = load(f);
    const GainExpansion g = strategy(f, sf);
    const HinfOptions h = hinf_options(f);
    const int n = f.grid > 0 ? f.grid : 41;
    const std::vector<VectorXd> grid = sf.sys.box.grid(n);
    std::vector<double> J(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) { J[k] = objective(sf.sys, g, grid[k], h); });
    std::ostringstream ss;
    for (const auto& name : sf.sys.param_names()) ss << name << ",";
    ss << "J\n";
    for (std::size_t k = 0; k < grid.size(); ++k) {
        for (Eigen::Index i = 0; i < grid[k].size(); ++i) ss << format_double(grid[k](i)) << ",";
        ss << (std::isfinite(J[k]) ? format_double(J[k]) : std::string("inf")) << "\n";
    }
    emit(f, ss.str());
    return kExitOk;
}

int cmd_ratio(const Flags& f) {
    const SystemFile sf = load(f);
    const GainExpansion g = strategy(f, sf);
    const SystemFile full = f.baseline_system.empty() ? sf : load_system(f.baseline_system);
    BaselineOptions bo;
    bo.restarts = f.restarts;
    bo.max_iter = f.baseline_iter;
    bo.step_c = f.baseline_step;
    bo.seed = f.seed;
    bo.hinf = hinf_options(f);
    const int n = f.grid > 0 ? f.grid : 11;
    if (n < 2) throw ValidationError("--grid must be at least 2 for ratio");
    const RatioReport rep = competitive_ratio(sf.sys, g, full.sys, n, MatrixXd(), bo);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "r = " << format_double(rep.r) << " at (";
    for (Eigen::Index i = 0; i < rep.argmax.size(); ++i) std::cerr << (i ? ", " : "") << format_double(rep.argmax(i));
    std::cerr << ")\n";
    emit(f, ratio_csv(rep, sf.sys.param_names()));
    return kExitOk;
}

int cmd_selftest(const Flags& f) {
    bool all = true;
    for (const SelftestCase& c : run_selftest(f.seed)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
        all = all && c.passed;
    }
    return all ? kExitOk : kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structured parameter-dependent H-infinity static output feedback design"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--system", f.system, "System description (JSON path or builtin:<name>)");
    app.add_option("--output", f.output, "Write the result here instead of stdout");
    app.add_option("--seed", f.seed, "Seed for randomised checks and baseline restarts");
    app.add_option("--tol-hinf", f.tol_hinf, "Relative tolerance of the norm computation");
    app.add_option("--tol-peak", f.tol_peak, "Relative threshold for attained peak frequencies");
    app.add_option("--tol-mult", f.tol_mult, "Relative threshold for singular value multiplicity");
    app.add_option("--eps-inner", f.eps_inner, "Inner (parameter ascent) stopping threshold");
    app.add_option("--eps-outer", f.eps_outer, "Outer (gain descent) stopping threshold");
    app.add_option("--step", f.step, "Step schedule, c/k:<c>");
    app.add_option("--max-outer", f.max_outer, "Outer iteration cap");
    app.add_option("--max-inner", f.max_inner, "Inner iteration cap");
    app.add_option("--verify-radius", f.verify_radius, "Perturbation radius for the saddle check");
    app.add_option("--verify-samples", f.verify_samples, "Samples for the saddle check");
    app.add_option("--design-graph", f.design_graph, "Named design graph, local, complete, or JSON neighbour lists");
    app.add_option("--inner-first-step", f.inner_first_step, "unbounded (default) or schedule");

    auto add_strategy = [&](CLI::App* c) {
        auto* gf = c->add_option("--gamma", f.gamma_file, "JSON file with strategy coefficients");
        c->add_flag("--zero-gain", f.zero_gain, "Use the zero strategy")->excludes(gf);
    };

    auto* validate = app.add_subcommand("validate", "Load and check a system description");
    validate->add_option("--grid", f.grid, "Sample points per parameter for the sampled checks");

    auto* norm = app.add_subcommand("norm", "Closed-loop H-infinity norm");
    add_strategy(norm);
    norm->add_option("--alpha", f.alpha, "Parameter point")->delimiter(',');
    norm->add_flag("--worst-case", f.worst_case, "Maximise over the parameter box");
    norm->add_option("--grid", f.grid, "Grid points per parameter for --worst-case (default 11)");

    auto* design = app.add_subcommand("design", "Saddle-point design of the strategy");
    add_strategy(design);
    design->add_option("--alpha", f.alpha, "Starting parameter point")->delimiter(',');
    design->add_flag("--verify", f.verify, "Run the randomised saddle check");
    design->add_flag("--worst-case", f.worst_case, "Report the worst case of the result over the box");
    design->add_option("--grid", f.grid, "Grid points per parameter for --worst-case (default 11)");

    auto* sweep = app.add_subcommand("sweep", "Performance over a parameter grid (CSV)");
    add_strategy(sweep);
    sweep->add_option("--grid", f.grid, "Grid points per parameter (default 41)");

    auto* ratio = app.add_subcommand("ratio", "Competitive ratio against the best unstructured gain (CSV)");
    add_strategy(ratio);
    ratio->add_option("--baseline-system", f.baseline_system, "System whose block-diagonal gains form the baseline");
    ratio->add_option("--grid", f.grid, "Grid points per parameter (default 11)");
    ratio->add_option("--restarts", f.restarts, "Random baseline starts per point");
    ratio->add_option("--baseline-iter", f.baseline_iter, "Descent iterations per baseline start");
    ratio->add_option("--baseline-step", f.baseline_step, "Baseline step constant c in c/k");

    auto* selftest = app.add_subcommand("selftest", "Compare the library against independent oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*validate) return cmd_validate(f);
        if (*norm) return cmd_norm(f);
        if (*design) return cmd_design(f);
        if (*sweep) return cmd_sweep(f);
        if (*ratio) return cmd_ratio(f);
        if (*selftest) return cmd_selftest(f);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
