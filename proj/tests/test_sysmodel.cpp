#include <doctest.h>

#include <cmath>
#include <random>

#include "structhinf/errors.hpp"
#include "structhinf/hinf.hpp"
#include "structhinf/system_file.hpp"

#include "helpers.hpp"

using namespace structhinf;
using testutil::builtin;

TEST_CASE("Example 1 plant matrices") {
    const SystemFile f = builtin("example1");
    PlantMatrices m = eval_matrices(f.sys, Eigen::Vector2d(0.0, 0.0));
    MatrixXd A0(2, 2);
    A0 << -2.0, 0.1, 0.3, -1.0;
    CHECK((m.A - A0).norm() <= 1e-15);
    m = eval_matrices(f.sys, Eigen::Vector2d(1.0, 0.0));
    CHECK(m.A(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(m.A(0, 1) == doctest::Approx(0.1 + 0.4 * std::sin(1.0)).epsilon(1e-15));
    CHECK_THROWS_AS(eval_matrices(f.sys, Eigen::Vector2d(1.5, 0.0)), ValidationError);
}

TEST_CASE("platoon plant matrices") {
    const SystemFile f = builtin("platoon");
    const PlantMatrices m = eval_matrices(f.sys, Eigen::Vector3d(1.0, 1.0, 1.0));
    CHECK(m.A(0, 0) == doctest::Approx(-0.1).epsilon(1e-15));
    // Open loop has two poles on the imaginary axis for every mass.
    std::mt19937 rng(1);
    for (int k = 0; k < 10; ++k) {
        const PlantMatrices mk = eval_matrices(f.sys, testutil::random_in_box(f.sys.box, rng));
        CHECK(std::abs(spectral_abscissa(mk.A)) <= 1e-12);
    }
}

TEST_CASE("eval_matrices is linear in the coefficients") {
    SystemFile f = builtin("example1");
    const Eigen::Vector2d a(0.3, -0.4);
    const MatrixXd A1 = eval_matrices(f.sys, a).A;
    for (auto& c : f.sys.coeffs) c.A *= 2.5;
    CHECK((eval_matrices(f.sys, a).A - 2.5 * A1).norm() <= 1e-14);
}

TEST_CASE("matrix derivatives agree with central differences") {
    const SystemFile f = builtin("platoon");
    const Eigen::Vector3d a(0.7, 0.8, 0.9);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 3; ++i) {
        Eigen::Vector3d ap = a, am = a;
        ap(static_cast<Eigen::Index>(i)) += h;
        am(static_cast<Eigen::Index>(i)) -= h;
        const MatrixXd fd = (eval_matrices(f.sys, ap).A - eval_matrices(f.sys, am).A) / (2 * h);
        CHECK((eval_matrix_derivatives(f.sys, a, i).A - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("strategy evaluation") {
    const SystemFile f = builtin("example1");
    MatrixXd G0(2, 3);
    G0 << 0, 0, 0, 0, 0, -0.5;
    std::mt19937 rng(2);
    for (int k = 0; k < 10; ++k) CHECK(eval_strategy(initial_strategy(f), testutil::random_in_box(f.sys.box, rng)) == G0);

    const GainExpansion z = zero_strategy(f.sys, f.eta);
    CHECK(eval_strategy(z, Eigen::Vector2d(0.5, 0.5)).isZero(0.0));

    // Printed design result at alpha = (1, 0): the first row is three equal coefficients summed.
    std::vector<MatrixXd> G(4, MatrixXd::Zero(2, 3));
    for (int l = 0; l < 3; ++l) G[static_cast<std::size_t>(l)].row(0) << -0.1892, -1.008, 0.0;
    G[0](1, 2) = -7.1070;
    G[3](1, 2) = 6.6070;
    const MatrixXd K = eval_strategy(make_strategy(f, G), Eigen::Vector2d(1.0, 0.0));
    CHECK(K(0, 0) == doctest::Approx(3 * -0.1892));
    CHECK(K(0, 1) == doctest::Approx(3 * -1.008));
    CHECK(K(0, 2) == 0.0);
    CHECK(K(1, 0) == 0.0);
    CHECK(K(1, 1) == 0.0);
}

TEST_CASE("strategy derivative agrees with central differences") {
    const SystemFile f = builtin("example1");
    std::mt19937 rng(4);
    const GainExpansion g = testutil::perturb(initial_strategy(f), 1.0, rng);
    const Eigen::Vector2d a(0.2, -0.6);
    const double h = 1e-6;
    for (std::size_t i = 0; i < 2; ++i) {
        Eigen::Vector2d ap = a, am = a;
        ap(static_cast<Eigen::Index>(i)) += h;
        am(static_cast<Eigen::Index>(i)) -= h;
        const MatrixXd fd = (eval_strategy(g, ap) - eval_strategy(g, am)) / (2 * h);
        CHECK((eval_strategy_derivative(g, a, i) - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
}

TEST_CASE("closed loop with zero gain is the open loop") {
    const SystemFile f = builtin("example1");
    const Eigen::Vector2d a(0.0, 0.0);
    const StateSpace cl = closed_loop(f.sys, zero_strategy(f.sys, f.eta), a);
    CHECK(cl.A == eval_matrices(f.sys, a).A);

    const SystemFile p = builtin("platoon");
    const StateSpace pl = closed_loop(p.sys, zero_strategy(p.sys, p.eta), Eigen::Vector3d(0.6, 0.7, 0.8));
    const Eigen::VectorXcd ev = Eigen::EigenSolver<MatrixXd>(pl.A).eigenvalues();
    int zeros = 0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) zeros += std::abs(ev(k)) <= 1e-10 ? 1 : 0;
    CHECK(zeros == 2);
}

TEST_CASE("closed loop against a direct lower fractional transformation") {
    // Independent formula: u = K y, y = Cy x + Dyw w, z = Cz x + Dzw w + Dzu u.
    const SystemFile f = builtin("platoon");
    std::mt19937 rng(6);
    const GainExpansion g = testutil::perturb(initial_strategy(f), 0.3, rng);
    const VectorXd a = testutil::random_in_box(f.sys.box, rng);
    const PlantMatrices m = eval_matrices(f.sys, a);
    const MatrixXd K = eval_strategy(g, a);
    const StateSpace cl = closed_loop(f.sys, g, a);
    CHECK((cl.A - (m.A + m.Bu * K * m.Cy)).norm() <= 1e-12);
    CHECK((cl.B - (m.Bw + m.Bu * K * m.Dyw)).norm() <= 1e-12);
    CHECK((cl.C - (f.sys.Cz + f.sys.Dzu * K * m.Cy)).norm() <= 1e-12);
    CHECK((cl.D - (f.sys.Dzw + f.sys.Dzu * K * m.Dyw)).norm() <= 1e-12);
}

TEST_CASE("structure masks") {
    const SystemFile f = builtin("example1");
    const std::vector<MatrixXd> masks = structure_masks(f.sys.partition, f.sys.design_graph, *f.eta);
    MatrixXd both(2, 3), first(2, 3), second(2, 3);
    both << 1, 1, 0, 0, 0, 1;
    first << 1, 1, 0, 0, 0, 0;
    second << 0, 0, 0, 0, 0, 1;
    CHECK(masks[0] == both);
    CHECK(masks[1] == first);
    CHECK(masks[2] == first);
    CHECK(masks[3] == second);

    for (const MatrixXd& m : structure_masks(f.sys.partition, Graph::complete(2, GraphRole::Design), *f.eta))
        CHECK(m == both);

    const SystemFile p = builtin("platoon");
    const std::vector<MatrixXd> pm = structure_masks(p.sys.partition, p.sys.design_graph, *p.eta);
    for (std::size_t l : {1u, 2u}) {
        CHECK(pm[l].block(0, 0, 1, 3).minCoeff() == 1.0);
        CHECK(pm[l].sum() == 3.0);
    }
}

TEST_CASE("gain projection") {
    const SystemFile f = builtin("example1");
    std::mt19937 rng(8);
    std::normal_distribution<double> nd(0.0, 1.0);
    const GainExpansion g0 = initial_strategy(f);
    CHECK(project_gains(g0, g0.masks).G == g0.G);

    std::vector<MatrixXd> ones(4, MatrixXd::Ones(2, 3));
    project_gains_inplace(ones, g0.masks);
    CHECK(ones == g0.masks);

    for (int k = 0; k < 20; ++k) {
        GainExpansion x = g0, y = g0;
        for (std::size_t l = 0; l < 4; ++l) {
            x.G[l] = MatrixXd::NullaryExpr(2, 3, [&] { return nd(rng); });
            y.G[l] = MatrixXd::NullaryExpr(2, 3, [&] { return nd(rng); });
        }
        const GainExpansion px = project_gains(x, x.masks), py = project_gains(y, y.masks);
        double before = 0.0, after = 0.0;
        for (std::size_t l = 0; l < 4; ++l) {
            before += (x.G[l] - y.G[l]).squaredNorm();
            after += (px.G[l] - py.G[l]).squaredNorm();
        }
        CHECK(after <= before);
        CHECK(project_gains(px, px.masks).G == px.G);
    }
}

TEST_CASE("parameter projection") {
    ParamBox box{Eigen::Vector2d(-1.0, -1.0), Eigen::Vector2d(1.0, 1.0)};
    CHECK(project_params(Eigen::Vector2d(2.0, 0.0), box) == Eigen::Vector2d(1.0, 0.0));
    CHECK(project_params(Eigen::Vector2d(0.3, -0.2), box) == Eigen::Vector2d(0.3, -0.2));

    // Grid oracle: the clamp is the closest box point on a 201 x 201 grid.
    std::mt19937 rng(10);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    box = {Eigen::Vector2d(-1.0, 0.0), Eigen::Vector2d(0.5, 2.0)};
    for (int k = 0; k < 20; ++k) {
        const Eigen::Vector2d x(u(rng), u(rng));
        const VectorXd p = project_params(x, box);
        CHECK(project_params(p, box) == p);
        double best = 1e300;
        for (int i = 0; i <= 200; ++i)
            for (int j = 0; j <= 200; ++j) {
                const Eigen::Vector2d q(-1.0 + 1.5 * i / 200.0, 2.0 * j / 200.0);
                best = std::min(best, (q - x).norm());
            }
        CHECK((p - x).norm() <= best + 1e-12);
    }
}

TEST_CASE("validation") {
    ValidationReport r = validate_system(builtin("example1").sys);
    CHECK(r.ok());
    bool dyw_warning = false;
    for (const auto& w : r.warnings) dyw_warning = dyw_warning || w.find("Dyw") != std::string::npos;
    CHECK(dyw_warning);
    CHECK(validate_system(builtin("platoon").sys).ok());

    // Measurement of subsystem 2 by subsystem 1 with no control-graph edge.
    SystemFile f = builtin("example1");
    f.sys.control_graph = Graph::self_loops(2, GraphRole::Control);
    r = validate_system(f.sys);
    CHECK_FALSE(r.ok());

    SystemFile g = builtin("example1");
    g.sys.coeffs[0].Bu = MatrixXd::Zero(2, 3);
    CHECK_FALSE(validate_system(g.sys).ok());
    CHECK_THROWS_AS(check_dimensions(g.sys), ValidationError);
}

TEST_CASE("measurement matrices obey the control graph at random points") {
    for (const char* name : {"example1", "example1_full", "platoon"}) {
        const SystemFile f = builtin(name);
        std::mt19937 rng(12);
        for (int k = 0; k < 100; ++k) {
            const PlantMatrices m = eval_matrices(f.sys, testutil::random_in_box(f.sys.box, rng));
            CHECK(in_structured_set(m.Cy, f.sys.control_graph, f.sys.partition.o_y, f.sys.partition.n));
            CHECK(in_structured_set(m.Dyw, f.sys.control_graph, f.sys.partition.o_y, f.sys.partition.m_w));
        }
    }
}

TEST_CASE("system file round trip and errors") {
    const std::string text = builtin_text("example1");
    const SystemFile a = parse_system_text(text);
    CHECK(a.sys.n() == 2);
    CHECK(a.sys.o_y() == 3);
    CHECK(a.eta->size() == 4);
    CHECK(a.alpha0.has_value());

    auto j = nlohmann::json::parse(text);
    j["matrices"][0]["Bu"] = {{0.6, 0.0, 0.0}, {0.0, 1.0, 0.0}};
    CHECK_THROWS_AS(parse_system(j), ValidationError);

    auto k = nlohmann::json::parse(text);
    k["xi_basis"][1] = "a1 +";
    CHECK_THROWS_AS(parse_system(k), ParseError);

    auto l = nlohmann::json::parse(text);
    l["gamma0"][1] = {{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};  // entry (2,2) is not allowed
    CHECK_THROWS_AS(parse_system(l), ValidationError);

    CHECK(matrix_from_json(nlohmann::json(0), 2, 3, "x").isZero(0.0));
    const MatrixXd M = (MatrixXd(2, 2) << 1.5, -2.0, 1e-300, 3.0).finished();
    CHECK(matrix_from_json(matrix_to_json(M), 2, 2, "M") == M);
}

TEST_CASE("design graph specs") {
    SystemFile f = builtin("platoon");
    CHECK(design_graph_from_spec(f, "limited").to_lists() == std::vector<std::vector<int>>{{0, 1}, {0, 1, 2}, {1, 2}});
    CHECK(design_graph_from_spec(f, "complete").to_lists() == Graph::complete(3, GraphRole::Design).to_lists());
    CHECK(design_graph_from_spec(f, "[[0,2],[1],[2]]")(0, 2));
    CHECK_THROWS(design_graph_from_spec(f, "[[0],[1]]"));
}
