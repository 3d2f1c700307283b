#include "structhinf/selftest.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "structhinf/subgradient.hpp"
#include "structhinf/system_file.hpp"

namespace structhinf {

namespace {

std::string fmt(double x) { return format_double(x); }

// Dense log-spaced scan plus a Brent refinement around the best sample.
double grid_norm(const StateSpace& ss) {
    constexpr int kPoints = 4000;
    double best = sigma_max(ss, 0.0), w_best = 0.0;
    for (int k = 0; k < kPoints; ++k) {
        const double w = std::pow(10.0, -4.0 + 8.0 * k / (kPoints - 1));
        const double s = sigma_max(ss, w);
        if (s > best) best = s, w_best = w;
    }
    best = std::max(best, sigma_max(ss, kInfFrequency));
    if (w_best > 0.0) {
        auto neg = [&](double lw) { return -sigma_max(ss, std::exp(lw)); };
        const double lw = std::log(w_best), d = 8.0 * std::log(10.0) / (kPoints - 1);
        const auto r = boost::math::tools::brent_find_minima(neg, lw - d, lw + d, 40);
        best = std::max(best, -r.second);
    }
    return best;
}

VectorXd random_point(const ParamBox& box, std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    VectorXd a(box.dim());
    for (int i = 0; i < box.dim(); ++i) a(i) = box.lo(i) + u(rng) * (box.hi(i) - box.lo(i));
    return a;
}

SelftestCase norm_case(const std::string& name, const StateSpace& ss) {
    SelftestCase c{"norm_vs_grid:" + name, false, ""};
    const HinfResult hr = hinf_norm(ss);
    if (!hr.stable) {
        c.detail = "closed loop unstable";
        return c;
    }
    const double g = grid_norm(ss);
    const double rel = std::abs(hr.gamma - g) / std::max(1.0, g);
    c.passed = rel <= 1e-6;
    c.detail = "level-set " + fmt(hr.gamma) + " grid " + fmt(g) + " rel " + fmt(rel);
    return c;
}

// Central differences of J along a random admissible direction.
SelftestCase gain_fd_case(const std::string& name, const ParamSystem& sys, const GainExpansion& g,
                          const VectorXd& a, std::mt19937& rng) {
    SelftestCase c{"gain_subgradient_vs_fd:" + name, false, ""};
    const HinfResult hr = hinf_norm(closed_loop(sys, g, a));
    if (!hr.stable) {
        c.detail = "closed loop unstable";
        return c;
    }
    const std::vector<MatrixXd> dG = gain_subgradient(sys, g, a, hr, uniform_weights(hr.peaks));
    std::normal_distribution<double> nd(0.0, 1.0);
    GainExpansion gp = g, gm = g;
    double pred = 0.0;
    const double h = 1e-6;
    for (int l = 0; l < g.size(); ++l) {
        MatrixXd D = g.masks[static_cast<std::size_t>(l)].unaryExpr([&](double m) { return m * nd(rng); });
        pred += (dG[static_cast<std::size_t>(l)].array() * D.array()).sum();
        gp.G[static_cast<std::size_t>(l)] += h * D;
        gm.G[static_cast<std::size_t>(l)] -= h * D;
    }
    const double fd = (hinf_norm(closed_loop(sys, gp, a)).gamma - hinf_norm(closed_loop(sys, gm, a)).gamma) / (2 * h);
    const double err = std::abs(fd - pred) / std::max(1.0, std::abs(fd));
    c.passed = err <= 1e-4;
    c.detail = "fd " + fmt(fd) + " predicted " + fmt(pred) + " rel " + fmt(err);
    return c;
}

SelftestCase param_fd_case(const std::string& name, const ParamSystem& sys, const GainExpansion& g,
                           const VectorXd& a) {
    SelftestCase c{"param_subgradient_vs_fd:" + name, false, ""};
    const HinfResult hr = hinf_norm(closed_loop(sys, g, a));
    if (!hr.stable) {
        c.detail = "closed loop unstable";
        return c;
    }
    const SpectraplexWeights w = uniform_weights(hr.peaks);
    const VectorXd gk = param_subgradient(sys, g, a, hr, w);
    const VectorXd gd = param_subgradient_direct(sys, g, a, hr, w);
    const double h = 1e-6;
    double err = (gk - gd).norm() / std::max(1.0, gd.norm());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        VectorXd ap = a, am = a;
        ap(i) += h;
        am(i) -= h;
        const double fd =
            (hinf_norm(closed_loop(sys, g, ap)).gamma - hinf_norm(closed_loop(sys, g, am)).gamma) / (2 * h);
        err = std::max(err, std::abs(fd - gk(i)) / std::max(1.0, std::abs(fd)));
    }
    c.passed = err <= 1e-4;
    c.detail = "max rel " + fmt(err);
    return c;
}

}  // namespace

std::vector<SelftestCase> run_selftest(unsigned seed) {
    std::vector<SelftestCase> out;
    std::mt19937 rng(seed);
    for (const std::string& name : builtin_names()) {
        const SystemFile f = load_system("builtin:" + name);
        const GainExpansion g = initial_strategy(f);
        const VectorXd a = random_point(f.sys.box, rng);
        out.push_back(norm_case(name, closed_loop(f.sys, g, a)));
        out.push_back(gain_fd_case(name, f.sys, g, a, rng));
        out.push_back(param_fd_case(name, f.sys, g, a));
        const GateReport pg = param_aug_gate(f.sys, g, a);
        out.push_back({"param_realization_gate:" + name, pg.passed, "max rel " + fmt(pg.max_rel_err)});
        const GateReport gg = gain_aug_gate(f.sys, g, a);
        out.push_back({"gain_realization_gate:" + name, gg.passed, "max rel " + fmt(gg.max_rel_err)});
    }
    return out;
}

}  // namespace structhinf
