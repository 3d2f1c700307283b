#include <doctest.h>

#include <cmath>
#include <limits>

#include "structhinf/ratio.hpp"
#include "structhinf/system_file.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using namespace structhinf;
using testutil::builtin;

TEST_CASE("ratio conventions") {
    CHECK(performance_ratio(0.0, 0.0) == 1.0);
    CHECK(std::isinf(performance_ratio(2.0, 0.0)));
    CHECK(performance_ratio(3.0, 2.0) == 1.5);
}

TEST_CASE("scalar baseline matches a line search") {
    const SystemFile s = parse_system_text(testutil::kScalarPlant);
    const VectorXd a = VectorXd::Zero(1);
    BaselineOptions o;
    o.max_iter = 2000;
    o.eps = 1e-12;
    const BaselineResult b = baseline_optimal(s.sys, a, {}, o);
    REQUIRE(b.found);

    // J(k) over a dense line in [-100, 0] with golden-section polishing of the best cell.
    auto J = [&](double k) {
        const StateSpace ss{MatrixXd::Constant(1, 1, -1.0 + k), MatrixXd::Ones(1, 1),
                            (MatrixXd(2, 1) << 1.0, k).finished(), MatrixXd::Zero(2, 1)};
        return oracle::grid_norm(ss, 400, 1e-3, 1e3);
    };
    double best_k = 0.0, best = J(0.0);
    for (int i = 0; i <= 2000; ++i) {
        const double k = -100.0 + 0.05 * i;
        const double v = J(k);
        if (v < best) best = v, best_k = k;
    }
    best = -oracle::golden_max([&](double k) { return -J(k); }, best_k - 0.05, best_k + 0.05);
    CHECK(std::abs(b.J - best) <= 1e-3);
    CHECK(b.K(0, 0) == doctest::Approx(-1.0).epsilon(1e-2));
}

TEST_CASE("parameter-free baseline is the same everywhere") {
    // Same start at every point; random restarts are seeded per point and are left out.
    const SystemFile s = parse_system_text(testutil::kScalarPlant);
    BaselineOptions o;
    o.restarts = 0;
    const std::vector<MatrixXd> start{MatrixXd::Constant(1, 1, -0.3)};
    const BaselineResult ref = baseline_optimal(s.sys, s.sys.box.lo, start, o);
    REQUIRE(ref.found);
    for (const VectorXd& a : s.sys.box.grid(5)) {
        const BaselineResult b = baseline_optimal(s.sys, a, start, o);
        CHECK(std::abs(b.J - ref.J) <= 1e-12);
        CHECK((b.K - ref.K).norm() <= 1e-12);
    }
}

TEST_CASE("self ratio is one") {
    const SystemFile s = parse_system_text(testutil::kScalarParamPlant);
    BaselineOptions o;
    auto kstar = [&](const VectorXd& a) { return baseline_optimal(s.sys, a, {}, o).J; };
    const RatioReport r = competitive_ratio(kstar, s.sys, 5, nullptr, o);
    CHECK(r.r == 1.0);
    for (const RatioPoint& p : r.points) CHECK(p.ratio == 1.0);
}

TEST_CASE("nested grids never decrease the ratio and results are reproducible") {
    const SystemFile s = parse_system_text(testutil::kScalarParamPlant);
    const GainExpansion g = initial_strategy(s);
    BaselineOptions o;
    o.restarts = 3;
    const RatioReport r3 = competitive_ratio(s.sys, g, s.sys, 3, MatrixXd(), o);
    const RatioReport r5 = competitive_ratio(s.sys, g, s.sys, 5, MatrixXd(), o);
    CHECK(r5.r >= r3.r);
    CHECK(r3.r >= 1.0 - 1e-6);
    const RatioReport again = competitive_ratio(s.sys, g, s.sys, 3, MatrixXd(), o);
    for (std::size_t k = 0; k < r3.points.size(); ++k) CHECK(again.points[k].J_baseline == r3.points[k].J_baseline);

    const std::string csv = ratio_csv(r3, s.sys.param_names());
    CHECK(csv.rfind("a,J,J_baseline,ratio\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("baseline dominates the structured strategy on the full-measurement example") {
    const SystemFile f = builtin("example1_full");
    REQUIRE(same_measurements(f.sys, f.sys));
    const GainExpansion g = initial_strategy(f);
    BaselineOptions o;
    o.restarts = 2;
    const RatioReport r = competitive_ratio(f.sys, g, f.sys, 3, MatrixXd(), o);
    for (const RatioPoint& p : r.points) {
        REQUIRE(p.baseline_ok);
        CHECK(p.J_baseline <= p.J_strategy + 1e-6);
    }
    CHECK_FALSE(same_measurements(builtin("example1").sys, f.sys));
}

TEST_CASE("point seeds") {
    CHECK(point_seed(1, Eigen::Vector2d(0.0, 0.5)) == point_seed(1, Eigen::Vector2d(-0.0, 0.5)));
    CHECK(point_seed(1, Eigen::Vector2d(0.0, 0.5)) != point_seed(2, Eigen::Vector2d(0.0, 0.5)));
    CHECK(point_seed(1, Eigen::Vector2d(0.0, 0.5)) != point_seed(1, Eigen::Vector2d(0.5, 0.0)));
}
