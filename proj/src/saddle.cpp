#include "structhinf/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "structhinf/errors.hpp"
#include "structhinf/parallel.hpp"
#include "structhinf/subgradient.hpp"

namespace structhinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Every grid point keeps the closed loop Hurwitz. Only eigenvalues are needed.
bool stable_on_grid(const ParamSystem& sys, const GainExpansion& gamma, const std::vector<VectorXd>& grid,
                    double margin, VectorXd* witness = nullptr) {
    std::vector<char> ok(grid.size(), 1);
    parallel_for(grid.size(), [&](std::size_t k) {
        ok[k] = spectral_abscissa(closed_loop(sys, gamma, grid[k]).A) < -margin ? 1 : 0;
    });
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (!ok[k]) {
            if (witness) *witness = grid[k];
            return false;
        }
    return true;
}

std::string vec_str(const VectorXd& v) {
    std::ostringstream ss;
    ss << "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) ss << (i ? ", " : "") << v(i);
    ss << ")";
    return ss.str();
}

}  // namespace

StepSchedule StepSchedule::parse(const std::string& spec) {
    static const std::string prefix = "c/k:";
    if (spec.rfind(prefix, 0) != 0) throw ValidationError("step schedule must look like c/k:<c>, got '" + spec + "'");
    std::size_t used = 0;
    double c = 0.0;
    try {
        c = std::stod(spec.substr(prefix.size()), &used);
    } catch (const std::exception&) {
        throw ValidationError("step schedule: cannot read the constant in '" + spec + "'");
    }
    if (used != spec.size() - prefix.size() || !(c > 0.0) || !std::isfinite(c))
        throw ValidationError("step schedule: constant must be a positive number");
    return StepSchedule{c};
}

std::string StepSchedule::to_string() const {
    std::ostringstream ss;
    ss << "c/k:" << c;
    return ss.str();
}

std::string to_string(SaddleStatus s) {
    switch (s) {
        case SaddleStatus::Converged: return "converged";
        case SaddleStatus::MaxIters: return "max-iters";
        case SaddleStatus::InstabilityAbort: return "instability-abort";
    }
    return "unknown";
}

double objective(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha, const HinfOptions& opts) {
    const HinfResult hr = hinf_norm(closed_loop(sys, gamma, alpha), opts);
    return hr.stable ? hr.gamma : kInf;
}

ParamOracle make_param_oracle(const ParamSystem& sys, const GainExpansion& gamma, const HinfOptions& opts,
                              ParamSubgradientPath path) {
    return [&sys, gamma, opts, path](const VectorXd& alpha) {
        ParamEval e;
        const HinfResult hr = hinf_norm(closed_loop(sys, gamma, alpha), opts);
        if (!hr.stable) {
            e.J = kInf;
            return e;
        }
        e.J = hr.gamma;
        const SpectraplexWeights w = uniform_weights(hr.peaks);
        e.g = path == ParamSubgradientPath::KroneckerRealization ? param_subgradient(sys, gamma, alpha, hr, w)
                                                                 : param_subgradient_direct(sys, gamma, alpha, hr, w);
        return e;
    };
}

InnerResult ascend(const ParamOracle& oracle, const VectorXd& alpha0, const ParamBox& box, const StepSchedule& step,
                   double eps, int max_iter, InnerFirstStep first) {
    InnerResult res;
    VectorXd a = project_params(alpha0, box);
    ParamEval e = oracle(a);
    res.values.push_back(e.J);
    res.alpha = a;
    res.J = e.J;
    if (!std::isfinite(e.J)) {
        res.unstable = true;
        return res;
    }
    const int shift = first == InnerFirstStep::Unbounded ? 1 : 0;
    for (int tau = 1; tau <= max_iter; ++tau) {
        VectorXd next;
        if (tau - shift == 0) {
            next = a;
            for (Eigen::Index i = 0; i < a.size(); ++i)
                if (e.g(i) != 0.0) next(i) = e.g(i) > 0.0 ? box.hi(i) : box.lo(i);
        } else {
            next = project_params(a + step(tau - shift) * e.g, box);
        }
        ParamEval en = oracle(next);
        res.values.push_back(en.J);
        res.iterations = tau;
        if (!std::isfinite(en.J)) {
            res.alpha = next;
            res.J = kInf;
            res.unstable = true;
            return res;
        }
        if (en.J > res.J) {
            res.J = en.J;
            res.alpha = next;
        }
        const bool done = std::abs(en.J - e.J) <= eps;
        a = next;
        e = std::move(en);
        if (done) break;
    }
    return res;
}

ParamSubgradientPath select_param_path(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                       std::vector<std::string>* log) {
    GateReport g;
    try {
        g = param_aug_gate(sys, gamma, alpha);
    } catch (const NumericalError& e) {
        if (log) log->push_back(std::string("warning: Kronecker realization gate could not run: ") + e.what() +
                                "; using the direct parameter subgradient");
        return ParamSubgradientPath::DirectDerivative;
    }
    if (g.passed) return ParamSubgradientPath::KroneckerRealization;
    if (log) {
        std::ostringstream ss;
        ss << "warning: Kronecker realization disagrees with the closed loop (max rel err " << g.max_rel_err
           << "); using the direct parameter subgradient";
        log->push_back(ss.str());
    }
    return ParamSubgradientPath::DirectDerivative;
}

InnerResult inner_max(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha0,
                      const SaddleOptions& opts, ParamSubgradientPath path) {
    return ascend(make_param_oracle(sys, gamma, opts.hinf, path), alpha0, sys.box, opts.step, opts.eps_inner,
                  opts.max_inner, opts.inner_first_step);
}

SaddleResult solve_saddle(const ParamSystem& sys, const GainExpansion& gamma0, const VectorXd& alpha0,
                          const SaddleOptions& opts) {
    SaddleResult res;
    if (!sys.box.contains(alpha0)) throw ValidationError("initial parameter lies outside the box");
    GainExpansion G = gamma0;
    for (std::size_t l = 0; l < G.G.size(); ++l)
        if (!(G.G[l].array() * (1.0 - G.masks[l].array())).matrix().isZero(0.0))
            throw ValidationError("initial strategy violates the design-graph structure");
    res.gamma_star = G;
    res.alpha_star = alpha0;
    res.J_star = kInf;

    const std::vector<VectorXd> vgrid = sys.box.grid(std::max(1, opts.validation_grid));
    VectorXd witness;
    if (!stable_on_grid(sys, G, vgrid, opts.hinf.stab_margin, &witness)) {
        res.status = SaddleStatus::InstabilityAbort;
        res.log.push_back("initial strategy does not stabilise the loop at alpha = " + vec_str(witness));
        return res;
    }

    res.param_path = select_param_path(sys, G, alpha0, &res.log);

    VectorXd alpha = alpha0;
    double J_start = objective(sys, G, alpha, opts.hinf);  // J(Gamma^(k), alpha(k))
    double best = kInf;
    res.status = SaddleStatus::MaxIters;
    auto track = [&](const GainExpansion& g, const InnerResult& in) {
        if (in.J < best) {
            best = in.J;
            res.gamma_star = g;
            res.alpha_star = in.alpha;
        }
    };

    for (int k = 1; k <= opts.max_outer; ++k) {
        const InnerResult in = inner_max(sys, G, alpha, opts, res.param_path);
        if (in.unstable) {
            res.status = SaddleStatus::InstabilityAbort;
            res.log.push_back("strategy at outer iteration " + std::to_string(k) + " loses stability at alpha = " +
                              vec_str(in.alpha));
            break;
        }
        alpha = in.alpha;
        track(G, in);
        TraceEntry t;
        t.k = k;
        t.J = in.J;
        t.alpha = alpha;
        t.inner_iterations = in.iterations;

        // Outer step on the masked gain subgradient at (G, alpha(k+1)).
        const HinfResult hr = hinf_norm(closed_loop(sys, G, alpha), opts.hinf);
        std::vector<MatrixXd> dG = gain_subgradient(sys, G, alpha, hr, uniform_weights(hr.peaks));
        project_gains_inplace(dG, G.masks);
        double mu = opts.step(k);
        double J_new = kInf;
        GainExpansion trial = G;
        for (int b = 0; b <= opts.max_backtracks; ++b) {
            for (std::size_t l = 0; l < G.G.size(); ++l) trial.G[l] = G.G[l] - mu * dG[l];
            project_gains_inplace(trial.G, G.masks);
            J_new = objective(sys, trial, alpha, opts.hinf);
            if (std::isfinite(J_new) && stable_on_grid(sys, trial, vgrid, opts.hinf.stab_margin)) {
                t.backtracks = b;
                break;
            }
            J_new = kInf;
            mu *= 0.5;
        }
        if (!std::isfinite(J_new)) {
            res.trace.push_back(std::move(t));
            res.status = SaddleStatus::InstabilityAbort;
            res.log.push_back("outer step " + std::to_string(k) + " destabilises the loop after " +
                              std::to_string(opts.max_backtracks) + " halvings");
            break;
        }
        double dn = 0.0;
        for (const auto& d : dG) dn += d.squaredNorm();
        t.step = mu;
        t.gain_step_norm = mu * std::sqrt(dn);
        res.trace.push_back(std::move(t));
        G = std::move(trial);

        // |J(Gamma^(k-1), alpha(k-1)) - J(Gamma^(k), alpha(k))| <= eps_outer
        if (std::abs(J_start - J_new) <= opts.eps_outer) {
            res.status = SaddleStatus::Converged;
            break;
        }
        J_start = J_new;
    }
    // The last update has not been through an inner loop yet; give it one so it can compete.
    if (res.status != SaddleStatus::InstabilityAbort) {
        const InnerResult in = inner_max(sys, G, alpha, opts, res.param_path);
        if (!in.unstable) track(G, in);
    }
    if (std::isfinite(best)) res.J_star = objective(sys, res.gamma_star, res.alpha_star, opts.hinf);
    return res;
}

WorstCase worst_case(const ParamSystem& sys, const GainExpansion& gamma, int grid_n, const SaddleOptions& opts,
                     int ascents) {
    const std::vector<VectorXd> grid = sys.box.grid(std::max(1, grid_n));
    std::vector<double> J(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) { J[k] = objective(sys, gamma, grid[k], opts.hinf); });
    std::vector<std::size_t> order(grid.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return J[a] > J[b]; });
    WorstCase wc{grid[order[0]], J[order[0]]};
    if (!std::isfinite(wc.J)) return wc;
    const std::size_t starts = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, ascents)), order.size());
    std::vector<InnerResult> runs(starts);
    const ParamOracle oracle = make_param_oracle(sys, gamma, opts.hinf, ParamSubgradientPath::DirectDerivative);
    parallel_for(starts, [&](std::size_t s) {
        runs[s] = ascend(oracle, grid[order[s]], sys.box, opts.step, opts.eps_inner, opts.max_inner);
    });
    for (const auto& r : runs)
        if (r.J > wc.J) wc = {r.alpha, r.J};
    return wc;
}

VerifyReport verify_saddle_generic(const std::function<double(const VectorXd&, const VectorXd&)>& J,
                                   const VectorXd& gamma_star, const VectorXd& alpha_star,
                                   const std::function<VectorXd(const VectorXd&)>& project_gamma,
                                   const std::function<VectorXd(const VectorXd&)>& project_alpha, double radius,
                                   int samples, double slack, unsigned seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto ball = [&](Eigen::Index d) {
        VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i) v(i) = normal(rng);
        const double nv = v.norm();
        if (nv == 0.0) return VectorXd::Zero(d).eval();
        return (v * (radius * std::pow(unit(rng), 1.0 / static_cast<double>(d)) / nv)).eval();
    };
    // Draw every perturbation first so evaluation order cannot change the samples.
    std::vector<VectorXd> da, dg;
    for (int s = 0; s < samples; ++s) {
        da.push_back(project_alpha(alpha_star + ball(alpha_star.size())));
        dg.push_back(project_gamma(gamma_star + ball(gamma_star.size())));
    }
    const double J0 = J(gamma_star, alpha_star);
    std::vector<double> va(static_cast<std::size_t>(samples)), vg(static_cast<std::size_t>(samples));
    parallel_for(static_cast<std::size_t>(samples), [&](std::size_t s) {
        va[s] = J(gamma_star, da[s]) - J0;
        vg[s] = J0 - J(dg[s], alpha_star);
    });
    VerifyReport rep;
    rep.max_alpha_violation = va.empty() ? 0.0 : *std::max_element(va.begin(), va.end());
    rep.max_gamma_violation = vg.empty() ? 0.0 : *std::max_element(vg.begin(), vg.end());
    rep.max_alpha_violation = std::max(0.0, rep.max_alpha_violation);
    rep.max_gamma_violation = std::max(0.0, rep.max_gamma_violation);
    rep.alpha_ok = rep.max_alpha_violation <= slack;
    rep.gamma_ok = rep.max_gamma_violation <= slack;
    return rep;
}

VerifyReport verify_saddle(const ParamSystem& sys, const SaddleResult& result, double radius, int samples,
                           double slack, unsigned seed, const HinfOptions& opts) {
    const GainExpansion& like = result.gamma_star;
    auto J = [&](const VectorXd& g, const VectorXd& a) { return objective(sys, with_free_entries(like, g), a, opts); };
    auto pg = [](const VectorXd& g) { return g; };  // free coordinates already span the feasible subspace
    auto pa = [&](const VectorXd& a) { return project_params(a, sys.box); };
    return verify_saddle_generic(J, free_entries(like), result.alpha_star, pg, pa, radius, samples, slack, seed);
}

VectorXd free_entries(const GainExpansion& gamma) {
    std::vector<double> v;
    for (std::size_t l = 0; l < gamma.G.size(); ++l)
        for (Eigen::Index c = 0; c < gamma.G[l].cols(); ++c)
            for (Eigen::Index r = 0; r < gamma.G[l].rows(); ++r)
                if (gamma.masks[l](r, c) != 0.0) v.push_back(gamma.G[l](r, c));
    return Eigen::Map<VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

GainExpansion with_free_entries(const GainExpansion& like, const VectorXd& x) {
    GainExpansion out = like;
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < out.G.size(); ++l)
        for (Eigen::Index c = 0; c < out.G[l].cols(); ++c)
            for (Eigen::Index r = 0; r < out.G[l].rows(); ++r)
                if (out.masks[l](r, c) != 0.0) {
                    if (k >= x.size()) throw ValidationError("free-entry vector is too short");
                    out.G[l](r, c) = x(k++);
                }
    if (k != x.size()) throw ValidationError("free-entry vector is too long");
    return out;
}

}  // namespace structhinf
