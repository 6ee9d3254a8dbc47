from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eflh import evaluation as ev
from eflh.core import Ball, ConfigurationError, LossClass, linear_step, quadratic_step
from eflh.meta import run_game
from eflh.scenarios import ScenarioConfig, generate
from eflh.schedule import ScheduleKind


def test_best_fixed_point_quadratics_1d():
    steps = [quadratic_step(1, np.array([0.0])), quadratic_step(2, np.array([2.0]))]
    x, v, q = ev.best_fixed_point(steps, Ball.origin(1, 5.0))
    np.testing.assert_allclose(x, [1.0])
    assert v == pytest.approx(2.0) and q["exact"]


def test_best_fixed_point_single_linear():
    g = np.array([0.6, -0.8])
    x, v, _ = ev.best_fixed_point([linear_step(1, g, 0.0)], Ball.origin(2))
    np.testing.assert_allclose(x, -g)
    assert v == pytest.approx(-1.0)


def _mixed_steps(seed=0, T=16):
    rng = np.random.default_rng(seed)
    out = []
    for t in range(1, T + 1):
        if t % 2:
            out.append(quadratic_step(t, 1.5 * rng.uniform(-1, 1, 2)))
        else:
            out.append(linear_step(t, rng.normal(size=2), 1.0))
    # drop the closed forms so the generic solver runs
    return [SimpleNamespace(value=s.value, grad=s.grad, params=None) for s in out]


def _grid_min(steps, step=0.01):
    g = np.arange(-1, 1 + step / 2, step)
    X, Y = np.meshgrid(g, g)
    P = np.c_[X.ravel(), Y.ravel()]
    P = P[np.linalg.norm(P, axis=1) <= 1]
    return min(sum(s.value(p) for s in steps) for p in P[:: 1])


@pytest.mark.parametrize("seed", [0, 1])
def test_pgd_matches_grid_search(seed):
    steps = _mixed_steps(seed)
    x, v, q = ev.best_fixed_point(steps, Ball.origin(2))
    assert q["method"] == "pgd" and q["converged"]
    assert abs(v - _grid_min(steps)) <= 1e-3
    assert v <= _grid_min(steps) + 1e-9


def test_pgd_agrees_with_analytic(quad8):
    steps = quad8.steps(1, 100)
    _, exact, _ = ev.best_fixed_point(steps, quad8.domain)
    _, approx, _ = ev.best_fixed_point(steps, quad8.domain, method="pgd")
    assert approx == pytest.approx(exact, abs=1e-8)


def test_pgd_iteration_cap_warns():
    steps = _mixed_steps(3)
    with pytest.warns(ev.OracleWarning):
        _, _, q = ev.best_fixed_point(steps, Ball.origin(2), max_iter=1, restarts=1)
    assert "warning" in q


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 12))
def test_best_fixed_point_beats_random_points(seed, n):
    rng = np.random.default_rng(seed)
    dom = Ball.origin(2)
    steps = [quadratic_step(t, dom.sample(rng, 1, 0.8)[0]) if rng.random() < 0.5
             else linear_step(t, rng.normal(size=2), 3.0) for t in range(1, n + 1)]
    _, v, _ = ev.best_fixed_point(steps, dom)
    for p in dom.sample(rng, 100):
        assert v <= sum(s.value(p) for s in steps) + 1e-9


def test_prefix_oracle_matches_best_fixed_point(linear4, quad8):
    for stream in (linear4, quad8):
        for s, t in [(1, 1), (3, 60), (10, 200), (1, stream.T)]:
            want = ev.best_fixed_point(stream.steps(s, t), stream.domain)[1]
            got = ev._PrefixOracle(stream).minima(np.array([s]), np.array([t]))[0]
            assert got == pytest.approx(want, abs=1e-9)


def test_ogd_on_fixed_quadratic_direct_sum():
    stream = generate(ScenarioConfig(T=64, d=1, segments=[[64, [0.0]]]))
    tr = run_game("ogd", stream)
    x = tr.predictions[:, 0]
    for k in (8, 16, 64):
        direct = max(float(np.sum(x[s:s + k] ** 2)) for s in range(64 - k + 1))
        assert ev.adaptive_regret_sweep(tr, stream, [k])[k] == pytest.approx(direct, abs=1e-12)


def test_full_length_is_static(quad8):
    tr = run_game("eflh-basic", quad8)
    assert ev.adaptive_regret_sweep(tr, quad8, [quad8.T])[quad8.T] == ev.static_regret(tr, quad8)


def test_minimizer_trace_has_no_regret():
    stream = generate(ScenarioConfig(T=40, segments=[[40, [0.3, -0.2]]]))
    fake = SimpleNamespace(T=40, losses=np.array([stream.value(t, [0.3, -0.2]) for t in range(1, 41)]))
    sa = ev.adaptive_regret_sweep(fake, stream, [8, 20, 40])
    assert max(sa.values()) <= 1e-9


def test_exhaustive_dominates_sampled():
    stream = generate(ScenarioConfig(T=1500, kind="piecewise-linear", n_segments=6, seed=2))
    tr = run_game("ogd", stream)
    lengths = [8, 64, 512]
    full = ev.adaptive_regret_sweep(tr, stream, lengths, exhaustive=True)
    samp = ev.adaptive_regret_sweep(tr, stream, lengths)
    assert set(samp) == set(lengths)
    for k in lengths:
        assert full[k] >= samp[k]


def test_sweep_rejects_long_length(quad8):
    tr = run_game("ogd", quad8)
    with pytest.raises(ValueError):
        ev.adaptive_regret_sweep(tr, quad8, [quad8.T + 1])


def test_dynamic_regret_examples(quad8):
    tr = run_game("eflh-basic", quad8)
    assert ev.dynamic_regret(tr, quad8, ev.ComparatorPath(tr.predictions)) == 0.0
    assert ev.dynamic_regret(tr, quad8, ev.stream_path(quad8)) == pytest.approx(tr.cum_loss[-1])


def test_path_length_examples():
    for norm in ("l1", "l2"):
        assert ev.path_length(ev.ComparatorPath([[0.0], [1.0], [0.0]], norm)) == 2.0
    corners = np.array([[0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.5, -0.5]] * 2)
    direct = sum(abs(a - b).sum() for a, b in zip(corners[1:], corners[:-1]))
    assert ev.path_length(ev.ComparatorPath(corners, "l1")) == pytest.approx(direct) == pytest.approx(7.0)


def test_lemma_tech_examples():
    rhs = 6 * 0.5**0.75 + 0.5**0.5
    assert rhs == pytest.approx(4.2747, abs=1e-4)
    assert ev.lemma_tech_slack(1.0) == pytest.approx(6 - rhs)
    assert ev.check_lemma_tech(1.0) and ev.check_lemma_tech(1e6)
    with pytest.raises(ValueError):
        ev.check_lemma_tech(0.5)


def test_lemma_tech_new_examples():
    rhs = 8 * 0.5**0.625 + 0.5**0.375
    assert ev.lemma_tech_new_slack(1.0, 0.25) == pytest.approx(8 - rhs)
    assert ev.check_lemma_tech_new(1.0, 0.25) and ev.check_lemma_tech_new(2.0, 0.49)
    with pytest.raises(ValueError):
        ev.check_lemma_tech_new(2.0, 0.5)


def test_slack_forms_match_naive_evaluation():
    x = np.geomspace(1, 1e4, 200)
    naive = 6 * x**0.75 - 6 * (x - np.sqrt(x) / 2) ** 0.75 - (np.sqrt(x) / 2) ** 0.5
    np.testing.assert_allclose(ev.lemma_tech_slack(x), naive, rtol=1e-9, atol=1e-9)
    e = 0.3
    naive = x ** (e * (1 + e)) - (x ** (1 + e) - x) ** e - e / 2
    np.testing.assert_allclose(ev.exp_recursion_slack(x, e), naive, rtol=1e-9, atol=1e-9)


def test_exp_recursion_at_one():
    assert ev.exp_recursion_slack(1.0, 0.3) == pytest.approx(1 - 0.15)


def test_recursion_dp_oracle():
    # independent recursion written straight from the definition
    def R(y, memo={0: 0.0}):
        if y not in memo:
            x = max(1, math.floor(min(y**0.5, y / 2)))
            memo[y] = R(y - x) + math.sqrt(x)
        return memo[y]

    dp = ev.recursion_dp(2, 1.0, 1.0, 2000)
    assert all(dp[y] == pytest.approx(R(y)) for y in range(0, 2001, 7))
    assert np.all(dp[1:] >= 0.5 * np.arange(1, 2001) ** 0.75)


def test_recursion_report():
    rep = ev.check_recursion_bounds(2, 1.0, 1.0, 10_000)
    assert rep["ok"] and rep["dp"]["ok"] and rep["power_recursion"]["ok"]
    with pytest.raises(ConfigurationError):
        ev.check_recursion_bounds(2, 1.0, 1.0, 8)


@pytest.mark.parametrize("algo,eps,fixture,sched", [
    ("eflh-basic", None, "linear4", ScheduleKind.basic()),
    ("eflh-full", 0.3, "linear4", ScheduleKind.full(0.3)),
    ("eflh-exp", 0.3, "expc4", ScheduleKind.largest(0.3)),
])
def test_witness_meta_regret(algo, eps, fixture, sched, request):
    stream = request.getfixturevalue(fixture)
    tr = run_game(algo, stream, epsilon=eps)
    rows = ev.witness_meta_regrets(tr, stream, sched)
    assert rows and all(r <= b for _, _, r, b in rows)


def test_basic_bound_on_small_runs(quad8, linear4):
    for s in (quad8, linear4):
        tr = run_game("eflh-basic", s)
        bad, worst = ev.basic_bound_violations(tr, s)
        assert bad == [] and worst < 1


def test_segment_prefix_average(quad8):
    tr = run_game("eflh-exp", quad8, epsilon=0.3)
    avg = ev.segment_prefix_average_regret(tr, quad8, [8, 16, 32, 64])
    assert list(avg) == [8, 16, 32, 64]


def test_report_schema(quad8):
    tr = run_game("eflh-full", quad8, epsilon=0.3)
    rep = ev.build_report(tr, quad8, {"algo": "eflh-full"}, epsilon=0.3)
    assert set(rep) == {"config", "static_regret", "sa_table", "dynamic", "oracle_quality", "violations"}
    assert {"regret", "path_length"} <= set(rep["dynamic"])
    assert [r["k"] for r in rep["sa_table"]] == ev.default_lengths(quad8.T)
    for r in rep["sa_table"]:
        assert set(r) == {"k", "max_regret", "bound", "ratio"}
