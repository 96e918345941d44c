"""Dense Hermitian linear algebra and quantum-state primitives.

Every operator in the package is a small dense complex matrix.  The two
wrapper types here, :class:`PsdOperator` and :class:`DensityMatrix`, validate
their input once on construction (Hermiticity, positivity, and for states the
unit trace) and then cache the eigendecomposition, which nearly every
downstream computation needs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "HERMITIAN_TOL",
    "HARD_TOL",
    "PROJECTOR_TOL",
    "ContractError",
    "NotPSDError",
    "DimensionMismatchError",
    "PsdOperator",
    "DensityMatrix",
    "as_matrix",
    "dagger",
    "hermitian_eig",
    "psd_sqrt",
    "psd_power",
    "is_projector",
    "trace_distance",
    "fidelity",
    "partial_trace",
    "purify",
    "random_state",
    "random_pure_vector",
    "random_projector",
    "random_contraction",
    "random_unitary",
]

HERMITIAN_TOL = 1e-10
HARD_TOL = 1e-6
PROJECTOR_TOL = 1e-9


class ContractError(ValueError):
    """An operator violates a structural precondition (shape, Hermiticity)."""


class NotPSDError(ContractError):
    """An operator has an eigenvalue that is genuinely negative."""


class DimensionMismatchError(ContractError):
    pass


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite, square complex128 array."""
    if isinstance(a, PsdOperator):
        return a.mat
    mat = np.asarray(a, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ContractError(f"expected a non-empty square matrix, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ContractError("matrix has non-finite entries")
    return mat


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _hermitize(mat: np.ndarray) -> np.ndarray:
    dev = np.max(np.abs(mat - dagger(mat))) if mat.size else 0.0
    if dev > HARD_TOL:
        raise ContractError(f"matrix is not Hermitian (max |A - A^dag| = {dev:.3e})")
    return 0.5 * (mat + dagger(mat))


def _eigh(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(mat)
    return w, v


def _clamp_spectrum(w: np.ndarray, upper: float | None = None) -> np.ndarray:
    lo = float(w.min())
    if lo < -HARD_TOL:
        raise NotPSDError(f"operator is not PSD (min eigenvalue {lo:.3e})")
    w = np.where(w < 0.0, 0.0, w)
    if upper is not None:
        hi = float(w.max())
        if hi > upper + HARD_TOL:
            raise NotPSDError(f"operator exceeds {upper} (max eigenvalue {hi:.6g})")
        w = np.where(w > upper, upper, w)
    return w


def _from_spectrum(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    return (v * w) @ dagger(v)


class PsdOperator:
    """Immutable Hermitian PSD matrix with its eigendecomposition attached.

    Eigenvalue dust below zero (down to ``-HARD_TOL``) is clamped to zero on
    construction; anything more negative raises :class:`NotPSDError`.  With
    ``bounded_by_one`` the spectrum is additionally clamped to ``<= 1``.
    """

    __slots__ = ("_mat", "bounded_by_one", "_eig")

    def __init__(self, mat, bounded_by_one: bool = False, *, _eig=None):
        mat = _hermitize(as_matrix(mat))
        upper = 1.0 if bounded_by_one else None
        if _eig is None:
            w, v = _eigh(mat)
        else:
            w, v = _eig
        if w.min() < -HERMITIAN_TOL or (upper is not None and w.max() > upper + HERMITIAN_TOL):
            w = _clamp_spectrum(w, upper)
            mat = _from_spectrum(w, v)
        else:
            w = _clamp_spectrum(w, upper)
        mat = np.array(mat, dtype=np.complex128)
        mat.setflags(write=False)
        w.setflags(write=False)
        v = np.array(v)
        v.setflags(write=False)
        self._mat = mat
        self.bounded_by_one = bounded_by_one
        self._eig = (w, v)

    @property
    def mat(self) -> np.ndarray:
        return self._mat

    @property
    def dim(self) -> int:
        return self._mat.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._eig[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._eig[1]

    def power(self, p: float) -> np.ndarray:
        """``A**p`` via the spectrum; negative powers need a full-rank operator."""
        w, v = self._eig
        if p < 0 and w.min() < 1e-8:
            raise NotPSDError(f"cannot take power {p} of an operator with eigenvalue {w.min():.3e}")
        if p == 0:
            return np.eye(self.dim, dtype=np.complex128)
        return _from_spectrum(np.power(w, p), v)

    def expect(self, rho) -> float:
        """Real part of ``Tr[A rho]``."""
        return float(np.real(np.vdot(dagger(as_matrix(rho)), self._mat)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._mat, dtype=dtype)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class DensityMatrix(PsdOperator):
    """Quantum state: Hermitian, PSD and trace one.

    The trace is renormalised on construction instead of rejected, so states
    assembled from unnormalised Kraus updates are always valid.
    """

    __slots__ = ()

    def __init__(self, mat, *, _eig=None):
        mat = as_matrix(mat)
        tr = float(np.real(np.trace(mat)))
        if not tr > 1e-300:
            raise ContractError(f"density matrix has non-positive trace {tr!r}")
        if _eig is not None:
            _eig = (_eig[0] / tr, _eig[1])
        super().__init__(mat / tr, bounded_by_one=False, _eig=_eig)
        tr = float(np.real(np.trace(self._mat)))
        if abs(tr - 1.0) > HERMITIAN_TOL:
            fixed = np.array(self._mat / tr)
            fixed.setflags(write=False)
            w = np.array(self._eig[0] / tr)
            w.setflags(write=False)
            self._mat = fixed
            self._eig = (w, self._eig[1])

    @classmethod
    def pure(cls, vec) -> "DensityMatrix":
        vec = np.asarray(vec, dtype=np.complex128).ravel()
        nrm = np.linalg.norm(vec)
        if nrm == 0:
            raise ContractError("zero vector is not a state")
        vec = vec / nrm
        return cls(np.outer(vec, vec.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @property
    def purity(self) -> float:
        return float(np.sum(self.eigenvalues**2))

    def is_pure(self, tol: float = HERMITIAN_TOL) -> bool:
        return float(self.eigenvalues[-1]) >= 1.0 - tol

    def state_vector(self) -> np.ndarray:
        """Dominant eigenvector; only meaningful for a pure state."""
        return np.array(self.eigenvectors[:, -1])


def hermitian_eig(op) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix."""
    if isinstance(op, PsdOperator):
        return np.array(op.eigenvalues), np.array(op.eigenvectors)
    mat = _hermitize(as_matrix(op))
    return _eigh(mat)


def psd_sqrt(op) -> PsdOperator:
    """Principal square root of a PSD operator."""
    if not isinstance(op, PsdOperator):
        op = PsdOperator(op)
    w, v = op.eigenvalues, op.eigenvectors
    root = np.sqrt(w)
    return PsdOperator(_from_spectrum(root, v), bounded_by_one=op.bounded_by_one, _eig=(root, v))


def psd_power(op, p: float) -> np.ndarray:
    if not isinstance(op, PsdOperator):
        op = PsdOperator(op)
    return op.power(p)


def is_projector(op, tol: float = PROJECTOR_TOL) -> bool:
    mat = as_matrix(op)
    return bool(np.linalg.norm(mat @ mat - mat) <= tol)


def _check_same_dim(a: PsdOperator, b: PsdOperator) -> None:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _as_state(a) -> DensityMatrix:
    return a if isinstance(a, DensityMatrix) else DensityMatrix(a)


def trace_distance(a, b) -> float:
    """Schatten-1 norm ``||a - b||_1``, i.e. the sum of absolute eigenvalues.

    Note this is the unhalved norm, so it ranges over ``[0, 2]`` for states.
    """
    a, b = _as_state(a), _as_state(b)
    _check_same_dim(a, b)
    diff = a.mat - b.mat
    w = np.linalg.eigvalsh(0.5 * (diff + dagger(diff)))
    return float(np.sum(np.abs(w)))


def fidelity(a, b) -> float:
    """Uhlmann root fidelity ``F = Tr|sqrt(a) sqrt(b)|``, in ``[0, 1]``.

    When either state is pure the overlap shortcut ``F = sqrt(<psi|a|psi>)``
    is used.
    """
    a, b = _as_state(a), _as_state(b)
    _check_same_dim(a, b)
    for pure, other in ((b, a), (a, b)):
        if pure.is_pure():
            psi = pure.state_vector()
            ov = float(np.real(np.vdot(psi, other.mat @ psi)))
            return float(np.sqrt(min(max(ov, 0.0), 1.0)))
    sa = psd_sqrt(a).mat
    inner = sa @ b.mat @ sa
    w = np.linalg.eigvalsh(0.5 * (inner + dagger(inner)))
    f = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return min(f, 1.0)


def partial_trace(mat, dims: tuple[int, int], keep: int = 0) -> np.ndarray:
    """Partial trace of a bipartite operator; ``keep`` selects subsystem 0 or 1."""
    da, db = dims
    t = as_matrix(mat).reshape(da, db, da, db)
    if keep == 0:
        return np.einsum("ijkj->ik", t)
    return np.einsum("ijil->jl", t)


def purify(rho) -> DensityMatrix:
    """Pure state on system (x) reference whose reduction to the system is ``rho``.

    The reference basis is ordered by decreasing eigenvalue of ``rho``, so a
    pure input ``|v><v|`` maps to ``|v> (x) |0>``.
    """
    rho = _as_state(rho)
    d = rho.dim
    w = rho.eigenvalues[::-1]
    v = rho.eigenvectors[:, ::-1]
    psi = np.zeros(d * d, dtype=np.complex128)
    for j in range(d):
        if w[j] > 0:
            ref = np.zeros(d)
            ref[j] = 1.0
            psi += np.sqrt(w[j]) * np.kron(v[:, j], ref)
    return DensityMatrix.pure(psi)


# -- instance generators -------------------------------------------------------


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_pure_vector(dim: int, rng_seed) -> np.ndarray:
    rng = _rng(rng_seed)
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def random_state(dim: int, rng_seed, mode: str = "haar") -> DensityMatrix:
    """Random state: Haar pure (``mode="haar"``) or Hilbert-Schmidt mixed (``"hs"``)."""
    rng = _rng(rng_seed)
    if mode == "haar":
        return DensityMatrix.pure(random_pure_vector(dim, rng))
    if mode == "hs":
        g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return DensityMatrix(g @ dagger(g))
    raise ValueError(f"unknown random_state mode {mode!r}")


def random_unitary(dim: int, rng_seed) -> np.ndarray:
    rng = _rng(rng_seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * ph


def random_projector(dim: int, rank: int, rng_seed) -> PsdOperator:
    """Orthogonal projector onto a Haar-random ``rank``-dimensional subspace."""
    if not 1 <= rank <= dim:
        raise ContractError(f"invalid projector rank {rank} for dimension {dim}")
    u = random_unitary(dim, rng_seed)[:, :rank]
    p = u @ dagger(u)
    return PsdOperator(p, bounded_by_one=True)


def random_contraction(dim: int, rng_seed) -> PsdOperator:
    """Random PSD operator with spectrum in ``[0, 1]``."""
    rng = _rng(rng_seed)
    u = random_unitary(dim, rng)
    w = rng.uniform(0.0, 1.0, dim)
    return PsdOperator((u * w) @ dagger(u), bounded_by_one=True)
