#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "structhinf/hinf.hpp"
#include "structhinf/system.hpp"

namespace structhinf {

/// Two-port realization sharing one state matrix:
///
///   [ T   P12 ]   [ C1 ]                    [ B1  B2 ]   [ D11  D12 ]
///   [ P21  .  ] = [ C2 ] (sI - A)^{-1}                 + [ D21   .  ]
///
/// T is the closed loop w -> z; P12 and P21 are the channels a perturbation of
/// the (static) feedback gain enters and leaves through.
struct TwoPortRealization {
    MatrixXd A;
    MatrixXd B1, B2;
    MatrixXd C1, C2;
    MatrixXd D11, D12, D21;

    StateSpace performance() const { return {A, B1, C1, D11}; }
    Eigen::MatrixXcd T(double omega) const;
    Eigen::MatrixXcd P12(double omega) const;
    Eigen::MatrixXcd P21(double omega) const;
};

/// Closed loop rewritten with the stacked gain K' = [G_1 ... G_L'] and measurement
/// C_y' = [eta_1 C_y; ...; eta_L' C_y] so that every strategy coefficient appears
/// as an ordinary static-feedback gain.
struct GainAugRealization : TwoPortRealization {};

/// Closed loop written as a constant plant closed by the parameter-dependent
/// diagonal gain K''(alpha); all parameter dependence lives in K''.
struct ParamAugRealization : TwoPortRealization {
    VectorXd k_diag;                 // diagonal of K''(alpha)
    std::vector<VectorXd> dk_diag;   // diagonal of dK''/d alpha_i, one per parameter
    /// Sizes of the six diagonal blocks of K''.
    std::array<Eigen::Index, 6> block_sizes{};
};

GainAugRealization build_gain_aug(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha);

/// Unmasked [dG_1 ... dG_L'] split into the L' coefficient blocks.
/// Throws NumericalError if the closed loop is unstable.
std::vector<MatrixXd> gain_subgradient(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                       const HinfResult& hr, const SpectraplexWeights& w);

ParamAugRealization build_param_aug(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha);

/// Parameter subgradient through the K''(alpha) realization.
VectorXd param_subgradient(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                           const HinfResult& hr, const SpectraplexWeights& w);

/// Parameter subgradient through dT/d alpha_i of the direct closed loop.
VectorXd param_subgradient_direct(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                  const HinfResult& hr, const SpectraplexWeights& w);

struct GateReport {
    double max_rel_err = 0.0;
    bool passed = false;
};

/// Compares the (1,1) block of the K'' realization with the direct closed loop at
/// `frequencies` log-uniform random frequencies in [1e-2, 1e2].
GateReport param_aug_gate(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                          int frequencies = 20, double tol = 1e-8, unsigned seed = 7);

/// Same check for the K' realization.
GateReport gain_aug_gate(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                         int frequencies = 20, double tol = 1e-10, unsigned seed = 7);

}  // namespace structhinf
