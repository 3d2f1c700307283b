#include "structhinf/hinf.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>
#include <boost/math/tools/minima.hpp>

#include "structhinf/errors.hpp"

namespace structhinf {

namespace {

using cd = std::complex<double>;

// Eigenvalues within this relative distance of the imaginary axis count as crossings.
// Spurious crossings only add intervals that are then rejected by direct evaluation.
constexpr double kImagTol = 1e-7;
constexpr double kScanDepth = 1e-3;
constexpr int kScanSamples = 6;

Eigen::VectorXcd eigenvalues(const MatrixXd& M, const char* what) {
    Eigen::EigenSolver<MatrixXd> es(M, false);
    if (es.info() != Eigen::Success) throw NumericalError(std::string("eigenvalue iteration failed: ") + what);
    return es.eigenvalues();
}

double sigma_of(const Eigen::MatrixXcd& T) {
    if (T.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T);
    return svd.singularValues()(0);
}

// Positive frequencies omega where `level` is a singular value of T(j omega).
std::vector<double> level_crossings(const StateSpace& ss, double level) {
    const Eigen::Index n = ss.A.rows();
    const Eigen::Index m = ss.B.cols(), o = ss.C.rows();
    const double g2 = level * level;
    const MatrixXd R = ss.D.transpose() * ss.D - g2 * MatrixXd::Identity(m, m);
    const MatrixXd S = ss.D * ss.D.transpose() - g2 * MatrixXd::Identity(o, o);
    Eigen::PartialPivLU<MatrixXd> Rlu(R), Slu(S);
    const MatrixXd RiDtC = Rlu.solve(ss.D.transpose() * ss.C);
    const MatrixXd RiBt = Rlu.solve(ss.B.transpose());
    MatrixXd H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = ss.A - ss.B * RiDtC;
    H.topRightCorner(n, n) = -level * ss.B * RiBt;
    H.bottomLeftCorner(n, n) = level * ss.C.transpose() * Slu.solve(ss.C);
    H.bottomRightCorner(n, n) = -ss.A.transpose() + ss.C.transpose() * ss.D * RiBt;
    const Eigen::VectorXcd ev = eigenvalues(H, "level-set Hamiltonian");
    std::vector<double> out;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
        const cd lam = ev(k);
        if (lam.imag() <= 0.0) continue;
        if (std::abs(lam.real()) <= kImagTol * std::max(1.0, std::abs(lam))) out.push_back(lam.imag());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, b); }),
              out.end());
    return out;
}

struct Candidate {
    double omega;
    double sigma;
};

// Local maximisation of sigma_max on [a, b] (finite) by Brent's method.
Candidate refine(const StateSpace& ss, double a, double b) {
    if (b - a <= 0.0) return {a, sigma_max(ss, a)};
    auto f = [&ss](double w) { return -sigma_max(ss, w); };
    std::uintmax_t it = 200;
    const auto r = boost::math::tools::brent_find_minima(f, a, b, std::numeric_limits<double>::digits / 2, it);
    Candidate c{r.first, -r.second};
    // Brent never evaluates the bracket ends; a boundary maximum (e.g. omega = 0) needs them.
    for (double e : {a, b}) {
        const double s = sigma_max(ss, e);
        if (s > c.sigma) c = {e, s};
    }
    return c;
}

// Sample the interval, refine every sampled local maximum.
void scan_interval(const StateSpace& ss, double a, double b, std::vector<Candidate>& out) {
    const bool unbounded = !std::isfinite(b);
    std::vector<double> w(kScanSamples + 1);
    if (unbounded) {
        const double lo = std::max(a, 1e-8), hi = std::max(1e6, lo * 1e6);
        for (int k = 0; k <= kScanSamples; ++k) w[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, double(k) / kScanSamples);
        w.front() = a;
    } else {
        for (int k = 0; k <= kScanSamples; ++k) w[static_cast<std::size_t>(k)] = a + (b - a) * double(k) / kScanSamples;
        w.back() = b;
    }
    std::vector<double> s(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) s[k] = sigma_max(ss, w[k]);
    for (std::size_t k = 0; k < w.size(); ++k) {
        const bool left_ok = k == 0 || s[k] >= s[k - 1];
        const bool right_ok = k + 1 == w.size() || s[k] >= s[k + 1];
        if (!left_ok || !right_ok) continue;
        const double lo = k == 0 ? w[0] : w[k - 1];
        const double hi = k + 1 == w.size() ? w[k] : w[k + 1];
        out.push_back(refine(ss, lo, hi));
    }
}

Peak make_peak(const StateSpace& ss, double omega, double tol_mult) {
    const Eigen::MatrixXcd T = freq_response(ss, omega);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(T, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    Peak p;
    p.omega = omega;
    p.sigma = sv.size() ? sv(0) : 0.0;
    int m = 0;
    while (m < sv.size() && sv(m) >= p.sigma * (1.0 - tol_mult)) ++m;
    m = std::max(m, 1);
    p.multiplicity = m;
    p.Q = svd.matrixU().leftCols(m);
    return p;
}

}  // namespace

double spectral_abscissa(const MatrixXd& A) {
    if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
    if (!A.allFinite()) throw NumericalError("spectral abscissa of a matrix with non-finite entries");
    const Eigen::VectorXcd ev = eigenvalues(A, "spectral abscissa");
    return ev.real().maxCoeff();
}

Eigen::MatrixXcd freq_response(const StateSpace& ss, double omega) {
    if (!std::isfinite(omega) || ss.A.rows() == 0) return ss.D.cast<cd>();
    const Eigen::Index n = ss.A.rows();
    Eigen::MatrixXcd M = -ss.A.cast<cd>();
    M.diagonal().array() += cd(0.0, omega);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    if (!(lu.rcond() > 1e-14)) throw NumericalError("singular resolvent at omega = " + std::to_string(omega));
    (void)n;
    return ss.C.cast<cd>() * lu.solve(ss.B.cast<cd>()) + ss.D.cast<cd>();
}

double sigma_max(const StateSpace& ss, double omega) { return sigma_of(freq_response(ss, omega)); }

HinfResult hinf_norm(const StateSpace& ss, const HinfOptions& opts) {
    HinfResult res;
    if (spectral_abscissa(ss.A) >= -opts.stab_margin) {
        res.stable = false;
        return res;
    }
    res.stable = true;
    const double sigma_d = sigma_of(ss.D.cast<cd>());

    // Constant transfer matrix: every frequency attains the norm; report the one at infinity.
    if (ss.A.rows() == 0 || ss.B.isZero(0.0) || ss.C.isZero(0.0)) {
        res.gamma = sigma_d;
        res.peaks.push_back(make_peak(ss, kInfFrequency, opts.tol_mult));
        return res;
    }

    // Initial lower bound from DC, infinity and the pole frequencies.
    double lb = sigma_d, w_best = kInfFrequency;
    auto consider = [&](double w) {
        const double s = sigma_max(ss, w);
        if (s > lb) {
            lb = s;
            w_best = w;
        }
    };
    consider(0.0);
    const Eigen::VectorXcd poles = eigenvalues(ss.A, "poles");
    for (Eigen::Index k = 0; k < poles.size(); ++k) {
        consider(std::abs(poles(k).imag()));
        consider(std::abs(poles(k)));
    }

    if (lb == 0.0) {
        res.gamma = 0.0;
        res.peaks.push_back(make_peak(ss, kInfFrequency, opts.tol_mult));
        return res;
    }

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const double level = (1.0 + 2.0 * opts.rel_tol) * lb;
        std::vector<double> c = level_crossings(ss, level);
        if (c.empty()) break;
        if (sigma_max(ss, 0.0) > level) c.insert(c.begin(), 0.0);
        double improved = lb;
        double w_new = w_best;
        for (std::size_t k = 0; k + 1 < c.size(); ++k) {
            const double mid = 0.5 * (c[k] + c[k + 1]);
            const double s = sigma_max(ss, mid);
            if (s > improved) {
                improved = s;
                w_new = mid;
            }
        }
        if (!(improved > lb)) break;  // no interval confirmed above the level
        lb = improved;
        w_best = w_new;
    }
    if (it == opts.max_iter) throw NumericalError("H-infinity level-set iteration did not converge");
    res.iterations = it + 1;

    // Peak localisation: every interval above a level slightly below the norm is searched.
    std::vector<Candidate> cands;
    const double scan_level = lb * (1.0 - kScanDepth);
    const bool scan = scan_level > sigma_d * (1.0 + 1e-9);
    if (!scan || !std::isfinite(w_best))
        cands.push_back(std::isfinite(w_best) ? refine(ss, std::max(0.0, w_best * (1 - 1e-3)), w_best * (1 + 1e-3) + 1e-12)
                                              : Candidate{kInfFrequency, sigma_d});
    else
        cands.push_back({w_best, lb});  // refined again by the scan of its interval
    if (scan) {
        std::vector<double> c = level_crossings(ss, scan_level);
        std::vector<double> ends{0.0};
        ends.insert(ends.end(), c.begin(), c.end());
        ends.push_back(kInfFrequency);
        for (std::size_t k = 0; k + 1 < ends.size(); ++k) {
            const double a = ends[k], b = ends[k + 1];
            const double probe = std::isfinite(b) ? 0.5 * (a + b) : 2.0 * a + 1.0;
            if (sigma_max(ss, probe) < scan_level && sigma_max(ss, a) < scan_level) continue;
            scan_interval(ss, a, b, cands);
        }
    }
    double gamma = std::max(lb, sigma_d);
    for (const auto& c : cands) gamma = std::max(gamma, c.sigma);
    res.gamma = gamma;

    std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) { return x.sigma > y.sigma; });
    std::vector<double> kept;
    for (const auto& c : cands) {
        if (c.sigma < gamma * (1.0 - opts.tol_peak)) continue;
        const bool dup = std::any_of(kept.begin(), kept.end(), [&](double w) {
            if (!std::isfinite(w) || !std::isfinite(c.omega)) return !std::isfinite(w) && !std::isfinite(c.omega);
            return std::abs(w - c.omega) <= 1e-6 * std::max(1.0, std::abs(w));
        });
        if (dup) continue;
        kept.push_back(c.omega);
        res.peaks.push_back(make_peak(ss, c.omega, opts.tol_mult));
    }
    if (sigma_d >= gamma * (1.0 - opts.tol_peak) &&
        std::none_of(kept.begin(), kept.end(), [](double w) { return !std::isfinite(w); }))
        res.peaks.push_back(make_peak(ss, kInfFrequency, opts.tol_mult));
    std::sort(res.peaks.begin(), res.peaks.end(), [](const Peak& x, const Peak& y) { return x.omega < y.omega; });
    return res;
}

SpectraplexWeights uniform_weights(const std::vector<Peak>& peaks) {
    SpectraplexWeights w;
    const double q = static_cast<double>(peaks.size());
    for (const auto& p : peaks) {
        const Eigen::Index m = p.Q.cols();
        w.Y.push_back(Eigen::MatrixXcd::Identity(m, m) / (q * static_cast<double>(m)));
    }
    return w;
}

}  // namespace structhinf
