"""Two-outcome measurements, ensembles of them, and blended measurements.

An ensemble stores each distinct operator once together with a multiplicity,
so ensembles holding millions of identical copies stay cheap.  Indices used by
callers (``ens[i]``, sampled measurement indices, product index vectors) are
always *expanded* indices in ``range(ens.m)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .qla import (
    PROJECTOR_TOL,
    ContractError,
    DimensionMismatchError,
    PsdOperator,
    as_matrix,
    psd_sqrt,
)

__all__ = [
    "DEFAULT_PRODUCT_CAP",
    "EnumerationInfeasible",
    "TwoOutcomeMeasurement",
    "MeasurementEnsemble",
    "BlendedMeasurement",
    "make_blended",
    "complement_ensemble",
    "enumerate_products",
    "sum_of_products",
]

DEFAULT_PRODUCT_CAP = 2**20


class EnumerationInfeasible(RuntimeError):
    """Raised when ``m**k`` exceeds the enumeration cap."""


class TwoOutcomeMeasurement:
    """The measurement ``{sqrt(M), sqrt(1 - M)}`` for an operator ``0 <= M <= 1``.

    The accepting branch is ``sqrt(M)``.
    """

    __slots__ = ("m_op", "accept_kraus", "reject_kraus", "projective", "label")

    def __init__(self, m_op, label: str | None = None):
        op = m_op if isinstance(m_op, PsdOperator) and m_op.bounded_by_one else PsdOperator(m_op, bounded_by_one=True)
        self.m_op = op
        mat = op.mat
        self.projective = bool(np.linalg.norm(mat @ mat - mat) <= PROJECTOR_TOL)
        w, v = op.eigenvalues, op.eigenvectors
        if self.projective:
            # snap to {0, 1} so sqrt(1 - M) and 1 - M agree to rounding error
            w = np.round(w)
        root = np.sqrt(w)
        comp = np.sqrt(np.clip(1.0 - w, 0.0, 1.0))
        self.accept_kraus = PsdOperator((v * root) @ v.conj().T, bounded_by_one=True, _eig=(root, v))
        self.reject_kraus = PsdOperator((v * comp) @ v.conj().T, bounded_by_one=True, _eig=(comp, v))
        self.label = label

    @property
    def mat(self) -> np.ndarray:
        return self.m_op.mat

    @property
    def dim(self) -> int:
        return self.m_op.dim

    def accept_prob(self, rho) -> float:
        return self.m_op.expect(rho)

    def complement(self) -> "TwoOutcomeMeasurement":
        label = None if self.label is None else f"not({self.label})"
        return TwoOutcomeMeasurement(np.eye(self.dim) - self.mat, label=label)

    def __repr__(self) -> str:
        kind = "projective" if self.projective else "POVM"
        return f"TwoOutcomeMeasurement(dim={self.dim}, {kind}, label={self.label!r})"


class MeasurementEnsemble:
    """Ordered multiset ``{M_1, ..., M_m}`` of two-outcome measurements.

    Parameters
    ----------
    measurements:
        Distinct measurements (or raw operators), in order.
    counts:
        Multiplicity of each entry; defaults to one each.  Copies of entry
        ``g`` occupy a contiguous block of expanded indices.
    """

    def __init__(self, measurements: Sequence, counts: Sequence[int] | None = None,
                 labels: Sequence[str] | None = None):
        items = []
        for j, m in enumerate(measurements):
            if not isinstance(m, TwoOutcomeMeasurement):
                m = TwoOutcomeMeasurement(m, label=None if labels is None else labels[j])
            items.append(m)
        if not items:
            raise ContractError("an ensemble needs at least one measurement")
        dims = {m.dim for m in items}
        if len(dims) != 1:
            raise DimensionMismatchError(f"ensemble mixes dimensions {sorted(dims)}")
        if counts is None:
            counts = [1] * len(items)
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (len(items),) or np.any(counts < 1):
            raise ContractError("counts must be positive, one per measurement")
        self.groups: tuple[TwoOutcomeMeasurement, ...] = tuple(items)
        self.counts = counts
        self.counts.setflags(write=False)
        self.offsets = np.concatenate([[0], np.cumsum(counts)])
        self.offsets.setflags(write=False)
        self.dim = dims.pop()

    @classmethod
    def from_matrices(cls, mats, labels=None) -> "MeasurementEnsemble":
        return cls([as_matrix(m) for m in mats], labels=labels)

    @property
    def m(self) -> int:
        return int(self.offsets[-1])

    def __len__(self) -> int:
        return self.m

    def group_of(self, index) -> np.ndarray | int:
        """Group (distinct-operator) number for expanded index/indices."""
        g = np.searchsorted(self.offsets, index, side="right") - 1
        return int(g) if np.ndim(g) == 0 else g

    def __getitem__(self, index: int) -> TwoOutcomeMeasurement:
        if not -self.m <= index < self.m:
            raise IndexError(index)
        return self.groups[self.group_of(index % self.m)]

    def __iter__(self) -> Iterator[TwoOutcomeMeasurement]:
        for g, c in zip(self.groups, self.counts):
            for _ in range(int(c)):
                yield g

    @property
    def labels(self) -> list[str | None]:
        return [g.label for g in self.groups]

    @property
    def is_projective(self) -> bool:
        return all(g.projective for g in self.groups)

    def weights(self) -> np.ndarray:
        """Selection probability of each group under a uniform draw."""
        return self.counts / self.m

    def average_operator(self) -> np.ndarray:
        """The mean operator ``(1/m) sum_i M_i``."""
        stack = np.stack([g.mat for g in self.groups])
        return np.einsum("g,gij->ij", self.weights(), stack)

    def accept_probs(self, rho) -> np.ndarray:
        """``Tr[M_i rho]`` for every expanded index."""
        per_group = np.array([g.accept_prob(rho) for g in self.groups])
        return np.repeat(per_group, self.counts)

    def group_accept_probs(self, rho) -> np.ndarray:
        return np.array([g.accept_prob(rho) for g in self.groups])

    def expanded_mats(self) -> np.ndarray:
        return np.stack([g.mat for g in self])

    def __repr__(self) -> str:
        return f"MeasurementEnsemble(m={self.m}, dim={self.dim}, distinct={len(self.groups)})"


@dataclass(frozen=True)
class BlendedMeasurement:
    """The ``(m+1)``-outcome instrument ``E_0 = sqrt(1 - sum M_i/m)``, ``E_i = sqrt(M_i/m)``.

    Only one accepting operator is stored per distinct ensemble entry;
    ``e_ops`` expands them on demand.
    """

    reject_op: PsdOperator
    group_accept_ops: tuple[PsdOperator, ...]
    source: MeasurementEnsemble

    @property
    def m(self) -> int:
        return self.source.m

    @property
    def e_ops(self) -> list[np.ndarray]:
        out = [self.reject_op.mat]
        for op, c in zip(self.group_accept_ops, self.source.counts):
            out.extend([op.mat] * int(c))
        return out

    def completeness_residual(self) -> float:
        total = self.reject_op.mat @ self.reject_op.mat
        for op, c in zip(self.group_accept_ops, self.source.counts):
            total = total + c * (op.mat @ op.mat)
        return float(np.max(np.abs(total - np.eye(self.source.dim))))

    def reject_power(self, k: float) -> np.ndarray:
        """``E_0**k`` from the spectrum of ``E_0``."""
        return self.reject_op.power(k)


def make_blended(ens: MeasurementEnsemble) -> BlendedMeasurement:
    mbar = ens.average_operator()
    reject_sq = PsdOperator(np.eye(ens.dim) - mbar, bounded_by_one=True)
    e0 = psd_sqrt(reject_sq)
    accept = tuple(psd_sqrt(PsdOperator(g.mat / ens.m, bounded_by_one=True)) for g in ens.groups)
    return BlendedMeasurement(reject_op=e0, group_accept_ops=accept, source=ens)


def complement_ensemble(ens: MeasurementEnsemble) -> MeasurementEnsemble:
    """``{1 - M_1, ..., 1 - M_m}`` with the same multiplicities."""
    return MeasurementEnsemble([g.complement() for g in ens.groups], counts=ens.counts)


def _operands(source) -> list[np.ndarray]:
    if isinstance(source, MeasurementEnsemble):
        return [g.mat for g in source]
    return [as_matrix(a) if np.ndim(a) == 2 else np.asarray(a) for a in source]


def enumerate_products(source, k: int, cap: int = DEFAULT_PRODUCT_CAP,
                       start: int = 0, stop: int | None = None
                       ) -> Iterator[tuple[tuple[int, ...], np.ndarray]]:
    """Yield ``(i, A_{i_1} A_{i_2} ... A_{i_k})`` for every index vector in ``[m]^k``.

    ``source`` is an ensemble (its operators are used) or a sequence of
    arbitrary square matrices.  Index vectors are visited in lexicographic
    (mixed-radix) order; ``start``/``stop`` select a slice of that order so
    the work can be split.  ``k = 0`` yields the identity once.
    """
    mats = _operands(source)
    m = len(mats)
    if k < 0:
        raise ValueError("k must be non-negative")
    total = m**k
    if total > cap:
        raise EnumerationInfeasible(
            f"exact enumeration infeasible: m**k = {m}**{k} = {total} exceeds cap {cap}; "
            "use a Monte-Carlo estimate instead")
    d = mats[0].shape[0]
    stop = total if stop is None else min(stop, total)
    if k == 0:
        if start < stop:
            yield (), np.eye(d, dtype=np.complex128)
        return
    stack = np.stack(mats)
    head = itertools.product(range(m), repeat=k)
    for idx in itertools.islice(head, start, stop):
        prod = stack[idx[0]]
        for i in idx[1:]:
            prod = prod @ stack[i]
        yield idx, prod


def sum_of_products(source, k: int) -> np.ndarray:
    """``sum_{T in A^(k)} T``, which equals ``(sum_i A_i)**k``."""
    mats = _operands(source)
    s = np.sum(np.stack(mats), axis=0)
    return np.linalg.matrix_power(s, k)
