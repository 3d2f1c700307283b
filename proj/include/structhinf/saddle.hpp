#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "structhinf/hinf.hpp"
#include "structhinf/system.hpp"

namespace structhinf {

/// Diminishing step mu_k = c / k (k = 1, 2, ...): divergent sum, summable squares.
struct StepSchedule {
    double c = 0.1;

    double operator()(int k) const { return c / static_cast<double>(k); }
    /// Parses "c/k:<c>".
    static StepSchedule parse(const std::string& spec);
    std::string to_string() const;
};

enum class SaddleStatus { Converged, MaxIters, InstabilityAbort };
std::string to_string(SaddleStatus s);

enum class ParamSubgradientPath { KroneckerRealization, DirectDerivative };

/// How the inner ascent takes its first step. The printed loop starts at tau = 0
/// with step mu_0 = c / 0; `Unbounded` takes the limit of that step, which sends
/// each coordinate with a nonzero subgradient to the bound it points at.
/// `Schedule` starts the inner steps at mu_1 instead.
enum class InnerFirstStep { Unbounded, Schedule };

struct SaddleOptions {
    double eps_inner = 1e-3;
    double eps_outer = 1e-3;
    int max_outer = 500;
    int max_inner = 200;
    int max_backtracks = 30;
    int validation_grid = 3;  // points per dimension for the robust-stability scan
    InnerFirstStep inner_first_step = InnerFirstStep::Unbounded;
    StepSchedule step;
    HinfOptions hinf;
};

/// J(Gamma, alpha): +inf when the closed loop is not Hurwitz.
double objective(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                 const HinfOptions& opts = {});

/// Value and one parameter subgradient.
struct ParamEval {
    double J = 0.0;
    VectorXd g;
};

/// Objective with a parameter subgradient for the ascent loop; g is empty when J = +inf.
using ParamOracle = std::function<ParamEval(const VectorXd&)>;

struct InnerResult {
    VectorXd alpha;          // best iterate
    double J = 0.0;          // its value
    int iterations = 0;
    bool unstable = false;   // an iterate destabilised the loop; alpha is that iterate
    std::vector<double> values;  // J at every evaluated iterate, starting with alpha0
};

/// Projected subgradient ascent over the box, stopping when consecutive values
/// differ by at most eps or after max_iter steps. Returns the best iterate.
InnerResult ascend(const ParamOracle& oracle, const VectorXd& alpha0, const ParamBox& box,
                   const StepSchedule& step, double eps, int max_iter,
                   InnerFirstStep first = InnerFirstStep::Schedule);

/// Parameter oracle for a fixed strategy using the chosen subgradient path.
ParamOracle make_param_oracle(const ParamSystem& sys, const GainExpansion& gamma, const HinfOptions& opts,
                              ParamSubgradientPath path);

/// Picks the Kronecker-realization path when its equivalence gate passes at alpha,
/// otherwise the direct-derivative path. `log` receives the fallback warning.
ParamSubgradientPath select_param_path(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha,
                                       std::vector<std::string>* log = nullptr);

InnerResult inner_max(const ParamSystem& sys, const GainExpansion& gamma, const VectorXd& alpha0,
                      const SaddleOptions& opts, ParamSubgradientPath path = ParamSubgradientPath::KroneckerRealization);

struct TraceEntry {
    int k = 0;
    double J = 0.0;            // J(Gamma^(k), alpha(k+1)) after the inner loop
    VectorXd alpha;            // alpha(k+1)
    int inner_iterations = 0;
    double step = 0.0;         // accepted outer step length mu
    double gain_step_norm = 0.0;
    int backtracks = 0;
};

struct SaddleResult {
    GainExpansion gamma_star;
    VectorXd alpha_star;
    double J_star = 0.0;
    std::vector<TraceEntry> trace;
    SaddleStatus status = SaddleStatus::MaxIters;
    ParamSubgradientPath param_path = ParamSubgradientPath::KroneckerRealization;
    std::vector<std::string> log;
};

/// Alternating projected subgradient ascent in alpha / descent in the strategy
/// coefficients. Tracks and returns the best outer iterate.
SaddleResult solve_saddle(const ParamSystem& sys, const GainExpansion& gamma0, const VectorXd& alpha0,
                          const SaddleOptions& opts);

/// Worst case of J(Gamma, .) over the box: grid scan followed by ascent from the best points.
struct WorstCase {
    VectorXd alpha;
    double J = 0.0;
};
WorstCase worst_case(const ParamSystem& sys, const GainExpansion& gamma, int grid_n, const SaddleOptions& opts,
                     int ascents = 3);

struct VerifyReport {
    double max_alpha_violation = 0.0;   // max J(G*, a) - J(G*, a*)
    double max_gamma_violation = 0.0;   // max J(G*, a*) - J(G, a*)
    bool alpha_ok = false;
    bool gamma_ok = false;
    bool passed() const { return alpha_ok && gamma_ok; }
};

/// Randomised local check of J(G*, a) <= J(G*, a*) <= J(G, a*). Perturbation
/// vectors are drawn uniformly in the ball of `radius` and then projected.
VerifyReport verify_saddle_generic(const std::function<double(const VectorXd&, const VectorXd&)>& J,
                                   const VectorXd& gamma_star, const VectorXd& alpha_star,
                                   const std::function<VectorXd(const VectorXd&)>& project_gamma,
                                   const std::function<VectorXd(const VectorXd&)>& project_alpha, double radius,
                                   int samples, double slack, unsigned seed);

VerifyReport verify_saddle(const ParamSystem& sys, const SaddleResult& result, double radius, int samples,
                           double slack, unsigned seed = 1, const HinfOptions& opts = {});

/// Flattens the mask-free entries of the coefficients (column-major within each G).
VectorXd free_entries(const GainExpansion& gamma);
GainExpansion with_free_entries(const GainExpansion& like, const VectorXd& x);

}  // namespace structhinf
