#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "structhinf/saddle.hpp"
#include "structhinf/system.hpp"

namespace structhinf {

struct BaselineOptions {
    int restarts = 8;        // random stabilising starts in addition to the user start
    int max_iter = 100;      // descent iterations per start
    double eps = 1e-7;       // stop when consecutive values differ by at most this
    double step_c = 0.1;     // mu_k = step_c / k
    double init_scale = 1.0; // standard deviation of random starting entries
    std::uint64_t seed = 1;
    HinfOptions hinf;
};

struct BaselineResult {
    MatrixXd K;
    double J = 0.0;
    bool found = false;  // false when no start stabilised the loop
};

/// Best static gain in the block-diagonal set of `sys_full` at fixed alpha:
/// projected subgradient descent from each start, best value over all starts.
/// The given `starts` are tried before the random ones, which depend only on the seed and alpha.
BaselineResult baseline_optimal(const ParamSystem& sys_full, const VectorXd& alpha, const std::vector<MatrixXd>& starts,
                                const BaselineOptions& opts);

/// Extra descent starts for one grid point.
using StartFn = std::function<std::vector<MatrixXd>(const VectorXd&)>;

struct RatioPoint {
    VectorXd alpha;
    double J_strategy = 0.0;
    double J_baseline = 0.0;
    double ratio = 0.0;
    bool baseline_ok = true;
};

struct RatioReport {
    int grid_n = 0;
    std::vector<RatioPoint> points;
    double r = 0.0;
    VectorXd argmax;
    std::vector<std::string> warnings;
};

/// J_strategy / J_baseline with 0/0 = 1 and x/0 = +inf for x > 0.
double performance_ratio(double J_strategy, double J_baseline);

/// Ratio over the uniform grid of `sys_full.box`. `J_strategy(alpha)` evaluates the strategy.
RatioReport competitive_ratio(const std::function<double(const VectorXd&)>& J_strategy, const ParamSystem& sys_full,
                              int grid_n, const StartFn& starts, const BaselineOptions& opts);

/// Strategy given as a gain expansion closed around `sys`. When `sys` and `sys_full`
/// share their measurement model, Gamma(alpha) itself seeds the baseline search, so
/// the baseline is never worse than the strategy. `K0`, when nonempty, is a further start.
RatioReport competitive_ratio(const ParamSystem& sys, const GainExpansion& gamma, const ParamSystem& sys_full,
                              int grid_n, const MatrixXd& K0, const BaselineOptions& opts);

/// True when both systems have the same input/measurement partition and Cy, Dyw coefficients.
bool same_measurements(const ParamSystem& a, const ParamSystem& b);

/// One row per grid point: parameter names, J, J_baseline, ratio.
std::string ratio_csv(const RatioReport& rep, const std::vector<std::string>& names);

/// Seed for one grid point, a function of the user seed and the exact bits of alpha.
std::uint64_t point_seed(std::uint64_t seed, const VectorXd& alpha);

}  // namespace structhinf
