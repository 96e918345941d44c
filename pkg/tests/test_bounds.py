import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qevent import bounds
from qevent.bounds import BoundId, BoundInstance, check_bound, generate_instance, random_instance_suite
from qevent.measurements import MeasurementEnsemble
from qevent.qla import DensityMatrix

from conftest import seeds


def test_every_id_has_one_evaluator():
    assert set(bounds._EVALUATORS) == set(BoundId)
    assert len(set(bounds._EVALUATORS.values())) == len(BoundId)


def test_empty_suite():
    res = random_instance_suite(count=0)
    assert res.reports == [] and res.summary()["total"] == 0 and res.to_jsonl() == ""


def test_suite_is_byte_identical_for_fixed_seed():
    a = random_instance_suite(count=3, seed=5).to_jsonl()
    b = random_instance_suite(count=3, seed=5, workers=3).to_jsonl()
    assert a == b
    assert len(a.splitlines()) == 3 * len(BoundId)
    json.loads(a.splitlines()[0])


@pytest.mark.parametrize("margin,passed,tight", [(-2e-9, False, False), (-5e-10, True, True),
                                                 (0.0, True, True), (1e-3, True, False)])
def test_margin_tolerance(monkeypatch, margin, passed, tight):
    def fake(inst):
        return [bounds._Link("only", 1.0, 1.0 + margin), bounds._Link("loose", 0.0, 5.0)], {}

    monkeypatch.setitem(bounds._EVALUATORS, BoundId.BACCEPT_LINEAR, fake)
    rep = check_bound("baccept_linear", BoundInstance())
    assert rep.passed is passed and rep.tight is tight
    assert rep.margin == pytest.approx(margin)
    assert rep.details["binding_link"] == "only"


def test_reports_carry_seed_and_serialise():
    inst = generate_instance(BoundId.SANDWICH, seed=42)
    rep = check_bound(BoundId.SANDWICH, inst)
    d = json.loads(rep.to_json())
    assert d["seed"] == 42 and d["pass"] is True and d["bound_id"] == "sandwich"


def test_gentle_random_includes_monotone_link():
    rep = check_bound(BoundId.GENTLE_RANDOM, generate_instance(BoundId.GENTLE_RANDOM, seed=1))
    links = rep.details["links"]
    assert {"stated", "half_to_full", "proof_chain"} <= set(links)
    assert links["half_to_full"]["binding"] and not links["proof_chain"]["binding"]
    assert links["proof_chain"]["held"]


def test_non_binding_link_is_logged_only(monkeypatch):
    def fake(inst):
        return [bounds._Link("main", 0.0, 1.0), bounds._Link("aside", 2.0, 1.0, binding=False)], {}

    monkeypatch.setitem(bounds._EVALUATORS, BoundId.GENTLE_RANDOM, fake)
    rep = check_bound(BoundId.GENTLE_RANDOM, BoundInstance())
    assert rep.passed and rep.details["binding_link"] == "main"
    assert rep.details["links"]["aside"]["held"] is False


def test_single_projector_sandwich_is_tight_on_lower_side():
    ens = MeasurementEnsemble([np.diag([1.0, 0.0])])
    rho = DensityMatrix.pure([0.6, 0.8])
    rep = check_bound(BoundId.SANDWICH, BoundInstance(rho=rho, ens=ens, k=3))
    assert rep.passed


def test_gao_union_on_fixed_sequence():
    seq = [np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    rep = check_bound(BoundId.GAO_UNION, BoundInstance(rho=DensityMatrix.pure([1.0, 0.0]), sequence=seq))
    assert rep.lhs == pytest.approx(1.0) and rep.rhs == pytest.approx(4.0)


def test_trace_from_blended_logs_stated_constant():
    rep = check_bound(BoundId.TRACE_FROM_BLENDED, generate_instance(BoundId.TRACE_FROM_BLENDED, seed=3))
    assert isinstance(rep.details["stated_constant_held"], bool)


@given(seeds, st.sampled_from(list(BoundId)), st.booleans())
def test_bounds_hold_on_generated_instances(seed, bid, projective_only):
    rep = check_bound(bid, generate_instance(bid, seed, projective_only=projective_only))
    assert rep.passed, rep.to_json()


@given(seeds, st.integers(1, 5), st.integers(1, 5))
def test_cauchy_schwarz_for_arbitrary_matrices(seed, d, m):
    rng = np.random.default_rng(seed)
    inst = BoundInstance(
        matrices=[rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for _ in range(m)],
        weights=rng.dirichlet(np.ones(m)),
        X=(lambda g: g @ g.conj().T)(rng.normal(size=(d, d))),
        Y=(lambda g: g @ g.conj().T)(rng.normal(size=(d, d))),
    )
    assert check_bound(BoundId.CAUCHY_SCHWARZ_AVG, inst).passed


def test_projective_only_instances_are_projective():
    for bid in (BoundId.GENTLE_BLENDED, BoundId.OR_BLENDED, BoundId.CS_SPECIFIC, BoundId.BLENDED_MONOTONE):
        for s in range(10):
            assert generate_instance(bid, s, projective_only=True).ens.is_projective
    for s in range(10):
        inst = generate_instance(BoundId.GENTLE_SEQUENTIAL, s, projective_only=True)
        assert all(np.allclose(a @ a, a, atol=1e-9) for a in inst.sequence)
