#include "structhinf/ratio.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include "structhinf/errors.hpp"
#include "structhinf/parallel.hpp"
#include "structhinf/subgradient.hpp"
#include "structhinf/system_file.hpp"

namespace structhinf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

MatrixXd block_diagonal_mask(const Partition& part) {
    MatrixXd M = MatrixXd::Zero(part.m_u_total(), part.o_y_total());
    for (int i = 0; i < part.subsystems(); ++i)
        M.block(Partition::offset(part.m_u, i), Partition::offset(part.o_y, i), part.m_u[static_cast<std::size_t>(i)],
                part.o_y[static_cast<std::size_t>(i)])
            .setOnes();
    return M;
}

GainExpansion constant_gain(const ParamSystem& sys, const MatrixXd& K, const MatrixXd& mask) {
    static thread_local std::shared_ptr<const BasisSet> cached;
    static thread_local std::vector<std::string> cached_params;
    if (!cached || cached_params != sys.param_names()) {
        cached = std::make_shared<BasisSet>(BasisSet::parse({"1"}, sys.param_names(), BasisRole::Strategy));
        cached_params = sys.param_names();
    }
    GainExpansion g;
    g.eta = cached;
    g.G = {K};
    g.masks = {mask};
    return g;
}

struct Descent {
    MatrixXd K;
    double J = kInf;
};

Descent descend(const ParamSystem& sys, const VectorXd& alpha, MatrixXd K, const MatrixXd& mask,
                const BaselineOptions& opts) {
    GainExpansion g = constant_gain(sys, K, mask);
    HinfResult hr = hinf_norm(closed_loop(sys, g, alpha), opts.hinf);
    Descent best{K, hr.stable ? hr.gamma : kInf};
    if (!hr.stable) return best;
    double J = hr.gamma;
    for (int k = 1; k <= opts.max_iter; ++k) {
        const MatrixXd dK =
            (gain_subgradient(sys, g, alpha, hr, uniform_weights(hr.peaks))[0].array() * mask.array()).matrix();
        if (dK.isZero(0.0)) break;
        double mu = opts.step_c / k;
        GainExpansion trial = g;
        HinfResult hn;
        for (int b = 0; b <= 30; ++b, mu *= 0.5) {
            trial.G[0] = g.G[0] - mu * dK;
            hn = hinf_norm(closed_loop(sys, trial, alpha), opts.hinf);
            if (hn.stable) break;
        }
        if (!hn.stable) break;
        g = std::move(trial);
        hr = std::move(hn);
        if (hr.gamma < best.J) best = {g.G[0], hr.gamma};
        const bool done = std::abs(hr.gamma - J) <= opts.eps;
        J = hr.gamma;
        if (done) break;
    }
    return best;
}

}  // namespace

std::uint64_t point_seed(std::uint64_t seed, const VectorXd& alpha) {
    std::uint64_t h = splitmix(seed);
    for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        std::uint64_t bits = 0;
        const double v = alpha(i) == 0.0 ? 0.0 : alpha(i);  // -0 and +0 share a seed
        std::memcpy(&bits, &v, sizeof bits);
        h = splitmix(h ^ bits);
    }
    return h;
}

BaselineResult baseline_optimal(const ParamSystem& sys_full, const VectorXd& alpha, const std::vector<MatrixXd>& starts,
                                const BaselineOptions& opts) {
    const MatrixXd mask = block_diagonal_mask(sys_full.partition);
    BaselineResult res;
    res.J = kInf;
    auto consider = [&](const Descent& d) {
        if (d.J < res.J) {
            res.J = d.J;
            res.K = d.K;
            res.found = true;
        }
    };
    for (const MatrixXd& K0 : starts) {
        if (K0.rows() != mask.rows() || K0.cols() != mask.cols())
            throw ValidationError("baseline start has the wrong shape");
        consider(descend(sys_full, alpha, (K0.array() * mask.array()).matrix(), mask, opts));
    }
    std::mt19937_64 rng(point_seed(opts.seed, alpha));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int r = 0; r < opts.restarts; ++r) {
        MatrixXd K(mask.rows(), mask.cols());
        for (Eigen::Index c = 0; c < K.cols(); ++c)
            for (Eigen::Index i = 0; i < K.rows(); ++i) K(i, c) = mask(i, c) * normal(rng);
        // Shrink towards zero until the start stabilises (or give up on this start).
        double scale = opts.init_scale;
        bool stable = false;
        for (int t = 0; t < 20 && !stable; ++t, scale *= 0.5) {
            const GainExpansion g = constant_gain(sys_full, scale * K, mask);
            stable = spectral_abscissa(closed_loop(sys_full, g, alpha).A) < -opts.hinf.stab_margin;
            if (stable) K *= scale;
        }
        if (stable) consider(descend(sys_full, alpha, K, mask, opts));
    }
    return res;
}

double performance_ratio(double J_strategy, double J_baseline) {
    if (J_baseline == 0.0) return J_strategy == 0.0 ? 1.0 : kInf;
    return J_strategy / J_baseline;
}

RatioReport competitive_ratio(const std::function<double(const VectorXd&)>& J_strategy, const ParamSystem& sys_full,
                              int grid_n, const StartFn& starts, const BaselineOptions& opts) {
    if (grid_n < 1) throw ValidationError("ratio grid needs at least one point per dimension");
    RatioReport rep;
    rep.grid_n = grid_n;
    const std::vector<VectorXd> grid = sys_full.box.grid(grid_n);
    rep.points.resize(grid.size());
    parallel_for(grid.size(), [&](std::size_t k) {
        RatioPoint& p = rep.points[k];
        p.alpha = grid[k];
        p.J_strategy = J_strategy(grid[k]);
        const BaselineResult b =
            baseline_optimal(sys_full, grid[k], starts ? starts(grid[k]) : std::vector<MatrixXd>{}, opts);
        p.baseline_ok = b.found;
        p.J_baseline = b.found ? b.J : kInf;
        p.ratio = b.found ? performance_ratio(p.J_strategy, p.J_baseline) : std::numeric_limits<double>::quiet_NaN();
    });
    rep.r = -kInf;
    for (const auto& p : rep.points) {
        if (!p.baseline_ok) {
            std::ostringstream ss;
            ss << "no stabilising baseline found at alpha = (" << p.alpha.transpose() << "); point excluded";
            rep.warnings.push_back(ss.str());
            continue;
        }
        if (std::isinf(p.ratio)) {
            std::ostringstream ss;
            ss << "ratio is infinite at alpha = (" << p.alpha.transpose() << ")";
            rep.warnings.push_back(ss.str());
        }
        if (p.ratio > rep.r) {
            rep.r = p.ratio;
            rep.argmax = p.alpha;
        }
    }
    return rep;
}

RatioReport competitive_ratio(const ParamSystem& sys, const GainExpansion& gamma, const ParamSystem& sys_full,
                              int grid_n, const MatrixXd& K0, const BaselineOptions& opts) {
    if (sys.p() != sys_full.p()) throw ValidationError("strategy and baseline systems have different parameters");
    auto J = [&](const VectorXd& a) { return objective(sys, gamma, a, opts.hinf); };
    const bool warm = same_measurements(sys, sys_full);
    auto starts = [&](const VectorXd& a) {
        std::vector<MatrixXd> out;
        if (warm) out.push_back(eval_strategy(gamma, a));
        if (K0.size() > 0) out.push_back(K0);
        return out;
    };
    return competitive_ratio(J, sys_full, grid_n, starts, opts);
}

bool same_measurements(const ParamSystem& a, const ParamSystem& b) {
    if (a.partition.m_u != b.partition.m_u || a.partition.o_y != b.partition.o_y) return false;
    if (a.basis_size() != b.basis_size() || a.n() != b.n() || a.m_w() != b.m_w()) return false;
    for (std::size_t l = 0; l < a.coeffs.size(); ++l)
        if (a.coeffs[l].Cy != b.coeffs[l].Cy || a.coeffs[l].Dyw != b.coeffs[l].Dyw) return false;
    return true;
}

std::string ratio_csv(const RatioReport& rep, const std::vector<std::string>& names) {
    std::ostringstream ss;
    for (const auto& n : names) ss << n << ",";
    ss << "J,J_baseline,ratio\n";
    for (const auto& p : rep.points) {
        for (Eigen::Index i = 0; i < p.alpha.size(); ++i) ss << format_double(p.alpha(i)) << ",";
        ss << format_double(p.J_strategy) << "," << format_double(p.J_baseline) << "," << format_double(p.ratio)
           << "\n";
    }
    return ss.str();
}

}  // namespace structhinf
