#include "structhinf/subgradient.hpp"

#include <cmath>
#include <random>

#include <Eigen/LU>

#include "structhinf/errors.hpp"

namespace structhinf {

namespace {

using cd = std::complex<double>;
using Eigen::Index;
using Eigen::MatrixXcd;

// Frequency-domain blocks of a two-port at one frequency.
struct TwoPortAt {
    MatrixXcd T, P12, P21;
};

TwoPortAt evaluate(const TwoPortRealization& r, double omega, bool need_p12, bool need_p21) {
    TwoPortAt out;
    if (!std::isfinite(omega) || r.A.rows() == 0) {
        out.T = r.D11.cast<cd>();
        if (need_p12) out.P12 = r.D12.cast<cd>();
        if (need_p21) out.P21 = r.D21.cast<cd>();
        return out;
    }
    MatrixXcd M = -r.A.cast<cd>();
    M.diagonal().array() += cd(0.0, omega);
    Eigen::PartialPivLU<MatrixXcd> lu(M);
    if (!(lu.rcond() > 1e-14)) throw NumericalError("singular resolvent at omega = " + std::to_string(omega));
    const MatrixXcd X1 = lu.solve(r.B1.cast<cd>());
    out.T = r.C1.cast<cd>() * X1 + r.D11.cast<cd>();
    if (need_p21) out.P21 = r.C2.cast<cd>() * X1 + r.D21.cast<cd>();
    if (need_p12) out.P12 = r.C1.cast<cd>() * lu.solve(r.B2.cast<cd>()) + r.D12.cast<cd>();
    return out;
}

// T^* Q Y Q^* at one peak.
MatrixXcd peak_weight(const MatrixXcd& T, const Peak& pk, const MatrixXcd& Y) {
    return T.adjoint() * pk.Q * Y * pk.Q.adjoint();
}

void require_stable(const HinfResult& hr) {
    if (!hr.stable) throw NumericalError("subgradient requested for an unstable closed loop");
    if (hr.peaks.empty()) throw NumericalError("norm result carries no peak frequencies");
}

std::vector<double> random_frequencies(int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> w;
    for (int k = 0; k < count; ++k) w.push_back(std::pow(10.0, u(rng)));
    return w;
}

GateReport gate(const TwoPortRealization& r, const StateSpace& direct, int frequencies, double tol, unsigned seed) {
    GateReport rep;
    const StateSpace aug = r.performance();
    auto freqs = random_frequencies(frequencies, seed);
    freqs.push_back(kInfFrequency);
    for (double w : freqs) {
        const MatrixXcd a = freq_response(aug, w);
        const MatrixXcd b = freq_response(direct, w);
        if (a.rows() != b.rows() || a.cols() != b.cols()) {
            rep.max_rel_err = std::numeric_limits<double>::infinity();
            break;
        }
        const double err = (a - b).norm() / std::max(b.norm(), 1e-300);
        rep.max_rel_err = std::max(rep.max_rel_err, b.norm() == 0.0 ? (a - b).norm() : err);
    }
    rep.passed = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace

MatrixXcd TwoPortRealization::T(double omega) const { return evaluate(*this, omega, false, false).T; }
MatrixXcd TwoPortRealization::P12(double omega) const { return evaluate(*this, omega, true, false).P12; }
MatrixXcd TwoPortRealization::P21(double omega) const { return evaluate(*this, omega, false, true).P21; }

GainAugRealization build_gain_aug(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha) {
    const PlantMatrices m = eval_matrices(sys, alpha);
    const VectorXd eta = gamma.eta->eval(alpha);
    const Index Lp = eta.size();
    const Index oy = m.Cy.rows(), n = m.A.rows(), mw = m.Bw.cols();
    MatrixXd Cy_aug(oy * Lp, n), Dyw_aug(oy * Lp, mw);
    for (Index l = 0; l < Lp; ++l) {
        Cy_aug.middleRows(l * oy, oy) = eta(l) * m.Cy;
        Dyw_aug.middleRows(l * oy, oy) = eta(l) * m.Dyw;
    }
    const MatrixXd Kp = gamma.stacked();
    GainAugRealization r;
    const MatrixXd BuK = m.Bu * Kp, DzuK = sys.Dzu * Kp;
    r.A = m.A + BuK * Cy_aug;
    r.B1 = m.Bw + BuK * Dyw_aug;
    r.C1 = sys.Cz + DzuK * Cy_aug;
    r.D11 = sys.Dzw + DzuK * Dyw_aug;
    r.B2 = m.Bu;
    r.C2 = std::move(Cy_aug);
    r.D12 = sys.Dzu;
    r.D21 = std::move(Dyw_aug);
    return r;
}

std::vector<MatrixXd> gain_subgradient(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                       const HinfResult& hr, const SpectraplexWeights& w) {
    require_stable(hr);
    const Index mu = sys.m_u(), oy = sys.o_y();
    const Index Lp = gamma.size();
    std::vector<MatrixXd> out(static_cast<std::size_t>(Lp), MatrixXd::Zero(mu, oy));
    if (hr.gamma == 0.0) return out;
    const GainAugRealization r = build_gain_aug(sys, gamma, alpha);
    MatrixXd total = MatrixXd::Zero(mu, oy * Lp);
    for (std::size_t v = 0; v < hr.peaks.size(); ++v) {
        const TwoPortAt at = evaluate(r, hr.peaks[v].omega, true, true);
        const MatrixXcd M = at.P21 * peak_weight(at.T, hr.peaks[v], w.Y[v]) * at.P12;
        total += M.real().transpose();
    }
    total /= hr.gamma;
    for (Index l = 0; l < Lp; ++l) out[static_cast<std::size_t>(l)] = total.middleCols(l * oy, oy);
    return out;
}

// Diagonal gain K''(alpha) = diag(Xi (x) I_n, Xi (x) Psi (x) Xi (x) I_mu, Psi (x) Xi (x) I_mu) repeated for
// the state and the exogenous-input channels. The constant matrices around it reproduce
//   A_cl  = sum xi_l A_l + sum xi_l eta_k xi_j Bu_l G_k Cy_j
//   B_cl  = sum xi_l Bw_l + sum xi_l eta_k xi_j Bu_l G_k Dyw_j
//   C_cl  = Cz + sum eta_k xi_j Dzu G_k Cy_j
//   D_cl  = Dzw + sum eta_k xi_j Dzu G_k Dyw_j
ParamAugRealization build_param_aug(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha) {
    if (!sys.box.contains(alpha)) throw ValidationError("parameter lies outside the box");
    const Index n = sys.n(), mw = sys.m_w(), mu = sys.m_u(), oz = sys.o_z();
    const Index L = sys.basis_size(), Lp = gamma.size();
    const Index p = sys.p();

    const Index s1 = n * L;            // Xi (x) I_n
    const Index s2 = L * Lp * L * mu;  // Xi (x) Psi (x) Xi (x) I_mu
    const Index s3 = Lp * L * mu;      // Psi (x) Xi (x) I_mu
    const Index half = s1 + s2 + s3;
    const Index D = 2 * half;

    ParamAugRealization r;
    r.block_sizes = {s1, s2, s3, s1, s2, s3};

    // Products G_k C_j and G_k D_j, ordered with j fastest.
    MatrixXd GC(s3, n), GD(s3, mw);
    for (Index k = 0; k < Lp; ++k) {
        for (Index j = 0; j < L; ++j) {
            const Index row = (k * L + j) * mu;
            GC.middleRows(row, mu) = gamma.G[static_cast<std::size_t>(k)] * sys.coeffs[static_cast<std::size_t>(j)].Cy;
            GD.middleRows(row, mu) = gamma.G[static_cast<std::size_t>(k)] * sys.coeffs[static_cast<std::size_t>(j)].Dyw;
        }
    }

    MatrixXd Cy2 = MatrixXd::Zero(D, n);
    MatrixXd Dyw2 = MatrixXd::Zero(D, mw);
    MatrixXd Bu2 = MatrixXd::Zero(n, D);
    MatrixXd Dzu2 = MatrixXd::Zero(oz, D);
    for (Index l = 0; l < L; ++l) {
        const auto& c = sys.coeffs[static_cast<std::size_t>(l)];
        Cy2.middleRows(l * n, n) = c.A;
        Dyw2.middleRows(half + l * n, n) = c.Bw;
        Bu2.middleCols(l * n, n).setIdentity();
        Bu2.middleCols(half + l * n, n).setIdentity();
        Cy2.middleRows(s1 + l * s3, s3) = GC;
        Dyw2.middleRows(half + s1 + l * s3, s3) = GD;
        for (Index q = 0; q < Lp * L; ++q) {
            Bu2.middleCols(s1 + (l * Lp * L + q) * mu, mu) = c.Bu;
            Bu2.middleCols(half + s1 + (l * Lp * L + q) * mu, mu) = c.Bu;
        }
    }
    Cy2.middleRows(s1 + s2, s3) = GC;
    Dyw2.middleRows(half + s1 + s2, s3) = GD;
    for (Index q = 0; q < Lp * L; ++q) {
        Dzu2.middleCols(s1 + s2 + q * mu, mu) = sys.Dzu;
        Dzu2.middleCols(half + s1 + s2 + q * mu, mu) = sys.Dzu;
    }

    // Diagonal of K'' and its parameter derivatives (product rule across the Kronecker factors).
    const VectorXd xi = sys.xi->eval(alpha);
    const VectorXd eta = gamma.eta->eval(alpha);
    const MatrixXd dxi = sys.xi->jacobian(alpha);
    const MatrixXd deta = gamma.eta->jacobian(alpha);
    r.k_diag.resize(D);
    r.dk_diag.assign(static_cast<std::size_t>(p), VectorXd::Zero(D));
    for (Index rep = 0; rep < 2; ++rep) {
        const Index base = rep * half;
        for (Index l = 0; l < L; ++l) {
            r.k_diag.segment(base + l * n, n).setConstant(xi(l));
            for (Index i = 0; i < p; ++i) r.dk_diag[static_cast<std::size_t>(i)].segment(base + l * n, n).setConstant(dxi(l, i));
        }
        for (Index l = 0; l < L; ++l) {
            for (Index k = 0; k < Lp; ++k) {
                for (Index j = 0; j < L; ++j) {
                    const Index at = base + s1 + ((l * Lp + k) * L + j) * mu;
                    r.k_diag.segment(at, mu).setConstant(xi(l) * eta(k) * xi(j));
                    for (Index i = 0; i < p; ++i) {
                        const double d = dxi(l, i) * eta(k) * xi(j) + xi(l) * deta(k, i) * xi(j) + xi(l) * eta(k) * dxi(j, i);
                        r.dk_diag[static_cast<std::size_t>(i)].segment(at, mu).setConstant(d);
                    }
                }
            }
        }
        for (Index k = 0; k < Lp; ++k) {
            for (Index j = 0; j < L; ++j) {
                const Index at = base + s1 + s2 + (k * L + j) * mu;
                r.k_diag.segment(at, mu).setConstant(eta(k) * xi(j));
                for (Index i = 0; i < p; ++i) {
                    const double d = deta(k, i) * xi(j) + eta(k) * dxi(j, i);
                    r.dk_diag[static_cast<std::size_t>(i)].segment(at, mu).setConstant(d);
                }
            }
        }
    }

    const auto K = r.k_diag.asDiagonal();
    r.A = Bu2 * K * Cy2;
    r.B1 = Bu2 * K * Dyw2;
    r.C1 = sys.Cz + Dzu2 * K * Cy2;
    r.D11 = sys.Dzw + Dzu2 * K * Dyw2;
    r.B2 = std::move(Bu2);
    r.C2 = std::move(Cy2);
    r.D12 = std::move(Dzu2);
    r.D21 = std::move(Dyw2);
    return r;
}

VectorXd param_subgradient(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                           const HinfResult& hr, const SpectraplexWeights& w) {
    require_stable(hr);
    const Index p = sys.p();
    VectorXd g = VectorXd::Zero(p);
    if (hr.gamma == 0.0) return g;
    const ParamAugRealization r = build_param_aug(sys, gamma, alpha);
    VectorXd diag_sum = VectorXd::Zero(r.k_diag.size());
    for (std::size_t v = 0; v < hr.peaks.size(); ++v) {
        const TwoPortAt at = evaluate(r, hr.peaks[v].omega, true, true);
        // diag(P21 W P12) without forming the D x D product.
        const MatrixXcd Z = (peak_weight(at.T, hr.peaks[v], w.Y[v]) * at.P12).transpose();
        diag_sum += (at.P21.array() * Z.array()).rowwise().sum().real().matrix();
    }
    for (Index i = 0; i < p; ++i) g(i) = diag_sum.dot(r.dk_diag[static_cast<std::size_t>(i)]) / hr.gamma;
    return g;
}

VectorXd param_subgradient_direct(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                  const HinfResult& hr, const SpectraplexWeights& w) {
    require_stable(hr);
    const Index p = sys.p();
    VectorXd g = VectorXd::Zero(p);
    if (hr.gamma == 0.0) return g;
    const PlantMatrices m = eval_matrices(sys, alpha);
    const MatrixXd K = eval_strategy(gamma, alpha);
    const StateSpace cl = closed_loop(sys, K, m);
    const Index n = cl.A.rows();

    struct Deriv {
        MatrixXd dA, dB, dC, dD;
    };
    std::vector<Deriv> derivs;
    derivs.reserve(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) {
        const PlantMatrices dm = eval_matrix_derivatives(sys, alpha, static_cast<std::size_t>(i));
        const MatrixXd dK = eval_strategy_derivative(gamma, alpha, static_cast<std::size_t>(i));
        const MatrixXd dKy = dK * m.Cy + K * dm.Cy;    // d(K Cy)
        const MatrixXd dKw = dK * m.Dyw + K * dm.Dyw;  // d(K Dyw)
        derivs.push_back({dm.A + dm.Bu * K * m.Cy + m.Bu * dKy, dm.Bw + dm.Bu * K * m.Dyw + m.Bu * dKw,
                          sys.Dzu * dKy, sys.Dzu * dKw});
    }

    for (std::size_t v = 0; v < hr.peaks.size(); ++v) {
        const double omega = hr.peaks[v].omega;
        const MatrixXcd T = freq_response(cl, omega);
        const MatrixXcd W = peak_weight(T, hr.peaks[v], w.Y[v]);
        if (!std::isfinite(omega) || n == 0) {
            for (Index i = 0; i < p; ++i) g(i) += (W * derivs[static_cast<std::size_t>(i)].dD.cast<cd>()).trace().real();
            continue;
        }
        MatrixXcd M = -cl.A.cast<cd>();
        M.diagonal().array() += cd(0.0, omega);
        Eigen::PartialPivLU<MatrixXcd> lu(M);
        const MatrixXcd RB = lu.solve(cl.B.cast<cd>());                       // R B
        const MatrixXcd CR = Eigen::PartialPivLU<MatrixXcd>(M.transpose())
                                 .solve(cl.C.transpose().cast<cd>())
                                 .transpose();  // C R
        for (Index i = 0; i < p; ++i) {
            const Deriv& d = derivs[static_cast<std::size_t>(i)];
            const MatrixXcd dT = CR * d.dA.cast<cd>() * RB + d.dC.cast<cd>() * RB + CR * d.dB.cast<cd>() + d.dD.cast<cd>();
            g(i) += (W * dT).trace().real();
        }
    }
    return g / hr.gamma;
}

GateReport param_aug_gate(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha, int frequencies,
                          double tol, unsigned seed) {
    return gate(build_param_aug(sys, gamma, alpha), closed_loop(sys, gamma, alpha), frequencies, tol, seed);
}

GateReport gain_aug_gate(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha, int frequencies,
                         double tol, unsigned seed) {
    return gate(build_gain_aug(sys, gamma, alpha), closed_loop(sys, gamma, alpha), frequencies, tol, seed);
}

}  // namespace structhinf
