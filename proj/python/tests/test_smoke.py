import math

import numpy as np
import pytest

import structhinf as sh


def test_builtins_load_and_validate():
    assert set(sh.builtin_names()) >= {"example1", "example1_full", "platoon"}
    ex = sh.load_system("builtin:example1")
    assert ex.param_names == ["a1", "a2"]
    assert ex.n == 2 and ex.m_u == 2 and ex.o_y == 3
    report = sh.validate(ex)
    assert report["ok"]
    assert any("Dyw" in w for w in report["warnings"])


def test_first_order_lag():
    one = np.ones((1, 1))
    gamma, peaks = sh.hinf_norm(-one, one, one, np.zeros((1, 1)))
    assert gamma == pytest.approx(1.0, abs=1e-8)
    assert peaks == [pytest.approx(0.0, abs=1e-8)]
    gamma, peaks = sh.hinf_norm(one, one, one, np.zeros((1, 1)))
    assert math.isinf(gamma) and peaks == []


def test_norm_matches_sweep_and_closed_loop():
    ex = sh.load_system("builtin:example1")
    j = sh.norm(ex, [0.0, 0.0])
    rows = sh.sweep(ex, 1)
    assert rows.shape == (1, 3)
    assert rows[0, 2] == j
    A, B, C, D = sh.closed_loop(ex, [0.0, 0.0])
    gamma, _ = sh.hinf_norm(A, B, C, D)
    assert gamma == j

    zero = [np.zeros((2, 3))] * ex.eta_size
    assert math.isfinite(sh.norm(ex, [0.0, 0.0], zero))
    platoon = sh.load_system("builtin:platoon")
    assert math.isinf(sh.norm(platoon, [0.5, 0.5, 0.5], [np.zeros((3, 11))] * platoon.eta_size))


def test_structure_errors():
    ex = sh.load_system("builtin:example1")
    bad = [np.ones((2, 3))] * ex.eta_size
    with pytest.raises(sh.ValidationError):
        sh.norm(ex, [0.0, 0.0], bad)
    with pytest.raises(ValueError):
        sh.load_system("/nonexistent/system.json")


def test_design_example1():
    ex = sh.load_system("builtin:example1")
    res = sh.design(ex)
    assert res["status"] == "converged"
    assert math.isfinite(res["J_star"])
    masks = ex.masks
    for G, M in zip(res["gamma_star"], masks):
        G = np.asarray(G)
        assert np.all(G[np.asarray(M) == 0] == 0.0)
    K = sh.eval_strategy(ex, [np.asarray(G) for G in res["gamma_star"]], [0.3, -0.2])
    assert K[0, 2] == 0.0 and K[1, 0] == 0.0 and K[1, 1] == 0.0
    assert sh.design(ex) == res


def test_design_graph_variants():
    p = sh.load_system("builtin:platoon")
    assert p.design_graph == [[0], [1], [2]]
    assert p.with_design_graph("full").design_graph == [[0, 1, 2]] * 3


def test_ratio_small_grid():
    full = sh.load_system("builtin:example1_full")
    out = sh.ratio(full, None, full, grid=2, restarts=1)
    assert out["points"].shape == (4, 5)
    assert np.all(out["points"][:, 4] >= 1.0 - 1e-6)
    assert out["r"] == out["points"][:, 4].max()


def test_selftest_passes():
    results = sh.selftest()
    assert results and all(ok for _, ok, _ in results)
