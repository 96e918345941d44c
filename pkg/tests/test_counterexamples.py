import numpy as np
import pytest

from qevent.counterexamples import (
    alternation_first_accept,
    build_blended_counterexample,
    build_random_counterexample,
    exact_first_accept,
    run_counterexample,
    three_outcome_operators,
)
from qevent.qla import ContractError
from qevent.sequential import EngineConfig


@pytest.mark.parametrize("eps", [0.02, 0.1, 0.3])
def test_operators_are_valid_measurements(eps):
    for inst in (build_blended_counterexample(eps), build_random_counterexample(eps)):
        for g in inst.ens.groups:
            w = np.linalg.eigvalsh(g.mat)
            assert w.min() >= -1e-8 and w.max() <= 1 + 1e-8
    e1, e2, e3 = three_outcome_operators(eps)
    total = sum(e.mat @ e.mat for e in (e1, e2, e3))
    assert np.max(np.abs(total - np.eye(2))) <= 1e-8


def test_plus_sign_instrument_is_incomplete():
    with pytest.raises(ContractError, match="1.818e-02"):
        three_outcome_operators(0.1, sign=+1.0)


def test_eps_range_checked():
    with pytest.raises(ContractError):
        build_blended_counterexample(0.7)


@pytest.mark.parametrize("eps", [0.05, 0.1, 0.2])
def test_outcome_ratio_on_post_reject_state(eps):
    _, e2, e3 = three_outcome_operators(eps)
    one = np.diag([0.0, 1.0])
    a_side = np.trace(e3.mat @ e3.mat @ one).real
    b_side = np.trace(e2.mat @ e2.mat @ one).real
    # the A-type outcome is eps times as likely as the B-type outcome
    assert a_side == pytest.approx(eps * b_side, rel=1e-12)
    assert b_side != pytest.approx(eps * a_side, rel=1e-3)


def test_b_side_has_no_initial_weight():
    for inst in (build_blended_counterexample(0.1), build_random_counterexample(0.1)):
        assert abs(inst.b_weight()) <= 1e-12


def test_block_sizes():
    inst = build_blended_counterexample(0.1)
    assert (inst.size_a, inst.size_b) == (1000, 100)
    assert build_random_counterexample(0.1).size_a == 20_000


@pytest.mark.parametrize("k", [1, 50, 1100, 10_000])
def test_blended_accept_matches_spectral_and_lower_bound(k):
    eps = 0.1
    inst = build_blended_counterexample(eps)
    ex = exact_first_accept(inst, k)
    assert ex["accept"] == pytest.approx(ex["accept_spectral"], abs=1e-10)
    assert ex["accept"] >= 1 - (1 - eps**3 / (1 + eps)) ** k - 1e-10


def test_empty_b_block_never_first():
    inst = build_blended_counterexample(0.1, size_b=0)
    res = run_counterexample(inst, EngineConfig(rng_seed=0, shots=200))
    assert res.first_in_b_rate == 0.0
    assert res.exact["first_in_b"] == 0.0


def test_alternation_closed_form_is_exact():
    alt = alternation_first_accept(build_random_counterexample(0.1), pairs=2000)
    assert alt["first_b_recursion"] == pytest.approx(alt["first_b_closed_form"], abs=1e-10)
    assert alt["first_b_closed_form"] >= alt["first_b_lower_sum"]


def test_alternation_needs_random_kind():
    with pytest.raises(ContractError):
        alternation_first_accept(build_blended_counterexample(0.1), 10)


@pytest.mark.parametrize("builder", [build_blended_counterexample, build_random_counterexample])
def test_sampled_rates_match_exact(builder):
    inst = builder(0.2)
    res = run_counterexample(inst, EngineConfig(rng_seed=0, shots=20_000))
    assert abs(res.accept_rate - res.exact["accept"]) <= res.halfwidth
    assert abs(res.first_in_b_rate - res.exact["first_in_b"]) <= res.halfwidth
