import itertools

import numpy as np
import pytest
from hypothesis import given

from qevent.measurements import (
    EnumerationInfeasible,
    MeasurementEnsemble,
    TwoOutcomeMeasurement,
    complement_ensemble,
    enumerate_products,
    make_blended,
    sum_of_products,
)
from qevent.qla import ContractError, DensityMatrix, DimensionMismatchError, NotPSDError

from conftest import general_ensemble, mixed_or_pure, projective_ensemble, seeds, small_m


def test_identity_measurement_always_accepts():
    meas = TwoOutcomeMeasurement(np.eye(3))
    assert meas.projective
    assert meas.accept_prob(DensityMatrix.maximally_mixed(3)) == pytest.approx(1.0)
    assert np.allclose(meas.reject_kraus.mat, 0)


def test_operator_above_one_rejected():
    with pytest.raises(ContractError):
        TwoOutcomeMeasurement(np.diag([1.5, 0.2]))
    with pytest.raises(NotPSDError):
        TwoOutcomeMeasurement(np.diag([-0.5, 0.2]))


def test_kraus_pair_completes():
    meas = TwoOutcomeMeasurement(np.diag([0.3, 0.8]))
    a, r = meas.accept_kraus.mat, meas.reject_kraus.mat
    assert np.allclose(a @ a + r @ r, np.eye(2))
    assert not meas.projective


def test_empty_and_mixed_dimension_ensembles_rejected():
    with pytest.raises(ContractError):
        MeasurementEnsemble([])
    with pytest.raises(DimensionMismatchError):
        MeasurementEnsemble([np.eye(2), np.eye(3)])


def test_counts_expand_in_blocks():
    ens = MeasurementEnsemble([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], counts=[3, 2])
    assert ens.m == 5
    assert list(ens.group_of(np.arange(5))) == [0, 0, 0, 1, 1]
    assert np.allclose(ens.average_operator(), np.diag([0.6, 0.4]))
    assert ens[4] is ens.groups[1]


def test_single_measurement_blended_form():
    ens = MeasurementEnsemble([np.diag([1.0, 0.0])])
    bl = make_blended(ens)
    assert np.allclose(bl.reject_op.mat, np.diag([0.0, 1.0]))
    assert np.allclose(bl.e_ops[1], np.diag([1.0, 0.0]))


def test_zero_power_is_identity():
    (idx, prod), = list(enumerate_products([np.diag([0.5, 0.2])], 0))
    assert idx == () and np.allclose(prod, np.eye(2))


def test_single_matrix_power():
    a = np.array([[0.5, 0.1], [0.1, 0.3]])
    (_, prod), = list(enumerate_products([a], 3))
    assert np.allclose(prod, a @ a @ a)


def test_two_by_two_expansion_by_hand():
    a1 = np.array([[1.0, 2.0], [0.0, 1.0]])
    a2 = np.array([[0.0, 1.0], [1.0, 0.0]])
    got = {idx: prod for idx, prod in enumerate_products([a1, a2], 2)}
    assert set(got) == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert np.allclose(got[(0, 1)], a1 @ a2)
    assert np.allclose(got[(1, 0)], a2 @ a1)
    assert np.allclose(sum(got.values()), sum_of_products([a1, a2], 2))


def test_enumeration_cap():
    with pytest.raises(EnumerationInfeasible):
        next(enumerate_products([np.eye(2)] * 4, 11))


def test_enumeration_slices_partition_the_range():
    mats = [np.eye(2) * (i + 1) for i in range(3)]
    full = [i for i, _ in enumerate_products(mats, 3)]
    parts = [i for s in range(0, 27, 5) for i, _ in enumerate_products(mats, 3, start=s, stop=s + 5)]
    assert full == parts == list(itertools.product(range(3), repeat=3))


@given(seeds, small_m)
def test_blended_completeness(seed, m):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 7))
    ens = general_ensemble(d, m, rng) if rng.random() < 0.5 else projective_ensemble(d, m, rng)
    assert make_blended(ens).completeness_residual() <= 1e-8


@given(seeds, small_m)
def test_blended_single_shot_matches_random_single_shot(seed, m):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 7))
    ens = general_ensemble(d, m, rng)
    rho = mixed_or_pure(d, rng)
    e0 = make_blended(ens).reject_op.mat
    blended = float(np.real(np.trace((np.eye(d) - e0 @ e0) @ rho.mat)))
    assert blended == pytest.approx(ens.accept_probs(rho).mean(), abs=1e-12)


@given(seeds, small_m)
def test_product_count(seed, m):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, 5))
    ens = projective_ensemble(2, m, rng)
    assert sum(1 for _ in enumerate_products(ens, k)) == m**k


def test_complement_ensemble():
    ens = MeasurementEnsemble([np.diag([0.2, 0.9])], counts=[2])
    comp = complement_ensemble(ens)
    assert np.allclose(comp.groups[0].mat, np.diag([0.8, 0.1]))
    assert comp.m == 2
