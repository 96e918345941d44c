import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qevent.qla import (
    ContractError,
    DensityMatrix,
    DimensionMismatchError,
    NotPSDError,
    PsdOperator,
    fidelity,
    hermitian_eig,
    is_projector,
    partial_trace,
    psd_power,
    psd_sqrt,
    purify,
    random_contraction,
    random_projector,
    random_state,
    random_unitary,
    trace_distance,
)

from conftest import dims, seeds


def test_dust_is_clamped_but_real_negativity_raises():
    op = PsdOperator(np.diag([1.0, -1e-12]))
    assert op.eigenvalues.min() == 0.0
    with pytest.raises(NotPSDError):
        PsdOperator(np.diag([1.0, -1e-3]))


def test_non_hermitian_input_rejected():
    with pytest.raises(ContractError):
        PsdOperator(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_density_matrix_renormalises_trace():
    rho = DensityMatrix(np.diag([2.0, 2.0]))
    assert np.allclose(rho.mat, np.eye(2) / 2)


def test_zero_trace_state_rejected():
    with pytest.raises(ContractError):
        DensityMatrix(np.zeros((2, 2)))


def test_operators_are_read_only():
    op = PsdOperator(np.eye(2))
    with pytest.raises(ValueError):
        op.mat[0, 0] = 3.0


def test_full_rank_projector_is_identity():
    p = random_projector(4, 4, 0)
    assert np.allclose(p.mat, np.eye(4), atol=1e-12)


def test_projector_generator_is_deterministic():
    assert np.array_equal(random_projector(5, 2, 9).mat, random_projector(5, 2, 9).mat)


def test_haar_qubit_states_average_to_maximally_mixed():
    rng = np.random.default_rng(0)
    mean = sum(random_state(2, rng).mat for _ in range(10_000)) / 10_000
    assert np.max(np.abs(mean - np.eye(2) / 2)) < 0.02


def test_pure_state_fidelity_is_overlap():
    a = DensityMatrix.pure([1.0, 0.0])
    b = DensityMatrix.pure([1.0, 1.0])
    assert fidelity(a, b) == pytest.approx(1 / np.sqrt(2), abs=1e-12)
    assert trace_distance(a, b) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_mixed_fidelity_matches_uhlmann_formula():
    rng = np.random.default_rng(3)
    a, b = random_state(3, rng, "hs"), random_state(3, rng, "hs")
    sa = psd_sqrt(a).mat
    w = np.linalg.eigvalsh(sa @ b.mat @ sa)
    assert fidelity(a, b) == pytest.approx(np.sum(np.sqrt(np.clip(w, 0, None))), abs=1e-10)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        trace_distance(DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(3))


def test_negative_power_needs_full_rank():
    with pytest.raises(NotPSDError):
        PsdOperator(np.diag([1.0, 0.0])).power(-0.5)
    assert np.allclose(psd_power(np.diag([4.0, 9.0]), -0.5), np.diag([0.5, 1 / 3]))


def test_purification_reduces_to_input():
    rho = random_state(3, 4, "hs")
    psi = purify(rho)
    assert psi.is_pure()
    assert np.allclose(partial_trace(psi.mat, (3, 3), keep=0), rho.mat, atol=1e-10)


def test_eig_cache_is_safe_under_threads():
    op = random_contraction(8, 1)
    results = []

    def work():
        results.append(hermitian_eig(op)[0].copy())

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(np.array_equal(r, results[0]) for r in results)


@given(seeds, dims)
def test_sqrt_squares_back(seed, d):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    x = g @ g.conj().T
    s = psd_sqrt(x).mat
    assert np.max(np.abs(s @ s - x)) <= 1e-8 * max(1.0, np.abs(x).max())


@given(seeds, dims)
def test_fuchs_van_de_graaf(seed, d):
    rng = np.random.default_rng(seed)
    a = random_state(d, rng, "haar" if rng.random() < 0.5 else "hs")
    b = random_state(d, rng, "hs")
    f = fidelity(a, b)
    half = 0.5 * trace_distance(a, b)
    assert 1 - f <= half + 1e-9
    assert half <= np.sqrt(max(1 - f * f, 0.0)) + 1e-9


@given(seeds, dims)
def test_measurement_bias_bounded_by_trace_distance(seed, d):
    rng = np.random.default_rng(seed)
    a, b = random_state(d, rng, "hs"), random_state(d, rng, "haar")
    m = random_contraction(d, rng)
    bias = abs(m.expect(a.mat - b.mat))
    assert bias <= 0.5 * trace_distance(a, b) + 1e-10


@given(seeds, st.integers(min_value=1, max_value=64))
def test_eigendecomposition_reconstructs(seed, d):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    x = g @ g.conj().T
    w, v = hermitian_eig(PsdOperator(x))
    assert np.linalg.norm((v * w) @ v.conj().T - x) <= 1e-8 * max(1.0, np.linalg.norm(x))


@given(seeds, dims)
def test_projector_flag(seed, d):
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, d + 1))
    assert is_projector(random_projector(d, rank, rng))
    u = random_unitary(d, rng)
    assert np.allclose(u @ u.conj().T, np.eye(d), atol=1e-12)
