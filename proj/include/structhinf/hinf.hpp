#pragma once

#include <complex>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "structhinf/system.hpp"

namespace structhinf {

inline constexpr double kInfFrequency = std::numeric_limits<double>::infinity();

struct HinfOptions {
    double rel_tol = 1e-7;       // agreement of the level-set bounds
    double tol_peak = 1e-6;      // sigma >= gamma (1 - tol_peak) counts as attained
    double tol_mult = 1e-6;      // singular values within this of the max span Q
    double stab_margin = 1e-9;   // spectral abscissa >= -stab_margin means unstable
    int max_iter = 100;          // level-set iterations
};

/// One frequency at which the norm is attained.
struct Peak {
    double omega = 0.0;           // rad/s; kInfFrequency for omega = infinity
    Eigen::MatrixXcd Q;           // orthonormal basis of the leading left singular subspace
    double sigma = 0.0;
    int multiplicity = 0;
};

struct HinfResult {
    double gamma = std::numeric_limits<double>::infinity();
    std::vector<Peak> peaks;
    bool stable = false;
    int iterations = 0;
};

/// Hermitian PSD weights (Y_1..Y_q) with total trace one.
struct SpectraplexWeights {
    std::vector<Eigen::MatrixXcd> Y;
};

double spectral_abscissa(const MatrixXd& A);

/// C (j omega I - A)^{-1} B + D; omega = kInfFrequency returns D.
Eigen::MatrixXcd freq_response(const StateSpace& ss, double omega);

/// Largest singular value of the frequency response.
double sigma_max(const StateSpace& ss, double omega);

/// H-infinity norm by level-set (Hamiltonian) iteration with peak localisation.
HinfResult hinf_norm(const StateSpace& ss, const HinfOptions& opts = {});

/// Y_v = I / (q m_v).
SpectraplexWeights uniform_weights(const std::vector<Peak>& peaks);

}  // namespace structhinf
