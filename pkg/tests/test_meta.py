from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from eflh.core import ConfigurationError, ContractError, ProblemConstants
from eflh.meta import (
    HEDGE,
    Algorithm,
    clamped_rate,
    hedge_update,
    init_weight,
    mix_new_expert,
    predict,
    pseudo_weight_total,
    run_game,
    signed_mw_update,
)
from eflh.scenarios import ScenarioConfig, generate
from eflh.schedule import ScheduleEntry


def test_predict_examples():
    np.testing.assert_array_equal(predict([0.7], [[0.2, -0.3]]), [0.2, -0.3])
    np.testing.assert_allclose(predict([1.0, 1.0], [[0, 0], [1, 0]]), [0.5, 0.0])
    np.testing.assert_allclose(predict([0.75, 0.25], [0.0, 4.0]), [1.0])


def test_signed_mw_examples():
    np.testing.assert_array_equal(signed_mw_update([0.3], 0.4, [0.4], [0.5], 1.0), [0.3])
    np.testing.assert_allclose(signed_mw_update([1.0], 0.6, [0.2], [0.5], 1.0), [1.2])
    np.testing.assert_allclose(signed_mw_update([1.0], 0.0, [1.0], [0.5], 1.0), [0.5])


def test_signed_mw_gap_contract():
    with pytest.raises(ContractError):
        signed_mw_update([1.0], 0.0, [1.5], [0.5], 1.0)


def test_init_weight_examples():
    c = ProblemConstants(G=1.0, D=1.0, T=int(math.exp(16)) + 1)
    assert init_weight(ScheduleEntry(1, 0, 4), c) == pytest.approx(0.5)
    c2 = ProblemConstants(G=1.0, D=2.0, T=1000)
    assert clamped_rate(16 * c2.log_T, c2) == pytest.approx(0.125)
    assert init_weight(ScheduleEntry(10, 1, 12), c2, HEDGE) == pytest.approx(0.1)


def test_hedge_examples():
    np.testing.assert_allclose(hedge_update([0.3, 0.7], [1.0, 1.0], 2.0), [0.3, 0.7])
    np.testing.assert_allclose(hedge_update([0.5, 0.5], [0.0, math.log(2)], 1.0), [2 / 3, 1 / 3])
    np.testing.assert_allclose(hedge_update([1.0], [5.0], 1.0), [1.0])


def test_mix_examples():
    np.testing.assert_allclose(mix_new_expert([2 / 3, 1 / 3], 1, 4), [0.5, 0.25, 0.25])
    np.testing.assert_allclose(mix_new_expert([0.5], 0, 7), [1.0])
    np.testing.assert_allclose(mix_new_expert([1.0], 1, 2), [0.5, 0.5])
    with pytest.raises(ContractError):
        mix_new_expert([1.0], 2, 3)


def test_pseudo_weight_first_rounds():
    stream = generate(ScenarioConfig(T=4, segments=[[4, [0.0, 0.0]]]))
    tr = run_game("eflh-basic", stream)
    # center loss is constant, so expert losses equal the meta loss and weights stay put
    assert tr.pseudo_weight[0] == pytest.approx(1.0)
    assert tr.pseudo_weight[1] == pytest.approx(2.0)


def test_pseudo_weight_total_formula():
    assert pseudo_weight_total([0.5, 0.25], [0.5, 0.25]) == pytest.approx(2.0)


def test_algorithm_selectors():
    assert Algorithm.from_name("eflh-exp", 0.3).variant == HEDGE
    with pytest.raises(ConfigurationError):
        Algorithm.from_name("eflh-full")
    with pytest.raises(ConfigurationError):
        Algorithm.from_name("nope")


@pytest.mark.parametrize("algo,eps", [("eflh-basic", None), ("eflh-full", 0.3), ("eflh-exp", 0.3),
                                      ("flh-baseline", None), ("ogd", None)])
def test_single_round_predicts_center(algo, eps):
    stream = generate(ScenarioConfig(T=1, d=3, segments=[[1, [0.1, 0.2, 0.3]]]))
    tr = run_game(algo, stream, epsilon=eps)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.predictions[0], np.zeros(3))


def test_basic_vs_ogd_constant_loss():
    stream = generate(ScenarioConfig(T=64, segments=[[64, [0.0, 0.0]]]))
    c = stream.constants
    basic = run_game("eflh-basic", stream).cum_loss[-1]
    ogd = run_game("ogd", stream).cum_loss[-1]
    assert basic <= ogd + 36 * c.G * c.D * math.sqrt(math.log(64)) * 64**0.75


def test_replay_digest_identical(quad8):
    a = run_game("eflh-full", quad8, epsilon=0.3)
    b = run_game("eflh-full", quad8, epsilon=0.3)
    assert a.digest() == b.digest()
    assert a.to_csv() == b.to_csv()


@pytest.mark.parametrize("algo,eps,fixture", [("eflh-basic", None, "quad8"), ("eflh-basic", None, "linear4"),
                                              ("eflh-full", 0.3, "linear4"), ("flh-baseline", None, "quad8"),
                                              ("eflh-exp", 0.3, "expc4"), ("eflh-exp", 0.1, "quad8")])
def test_run_invariants(algo, eps, fixture, request):
    stream = request.getfixturevalue(fixture)
    tr = run_game(algo, stream, epsilon=eps)
    assert tr.violations == []
    assert np.all(np.linalg.norm(tr.predictions, axis=1) <= 1 + 1e-9)
    if algo == "eflh-basic":
        assert np.all(tr.pseudo_weight <= np.arange(1, tr.T + 1) + 1e-6)


pos = st.floats(1e-3, 10, allow_nan=False)


@settings(max_examples=200)
@given(w=hnp.arrays(np.float64, 5, elements=pos), ell=hnp.arrays(np.float64, 5, elements=st.floats(0, 50)),
       alpha=st.floats(0.01, 5))
def test_hedge_stays_on_simplex(w, ell, alpha):
    out = hedge_update(w / w.sum(), ell, alpha)
    assert np.all(out >= 0)
    assert abs(out.sum() - 1) <= 1e-9


@settings(max_examples=200)
@given(w=hnp.arrays(np.float64, 4, elements=pos), t_next=st.integers(2, 10**6), n_new=st.integers(0, 1))
def test_mix_stays_on_simplex(w, t_next, n_new):
    out = mix_new_expert(w, n_new, t_next)
    assert abs(out.sum() - 1) <= 1e-9
    if n_new:
        assert out[-1] == pytest.approx(1 / t_next)


@settings(max_examples=200)
@given(meta=st.floats(0, 1), ell=hnp.arrays(np.float64, 4, elements=st.floats(0, 1)),
       rates=hnp.arrays(np.float64, 4, elements=st.floats(1e-4, 0.5)))
def test_signed_mw_multiplier_range(meta, ell, rates):
    w = np.ones(4)
    out = signed_mw_update(w, meta, ell, rates, 1.0)
    assert np.all(out >= 0.5) and np.all(out <= 1.5)
