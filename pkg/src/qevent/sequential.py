"""Exact and Monte-Carlo engines for repeated blended and random measurements.

Exact quantities
    ``B(k) = 1 - Tr[E_0^{2k} rho]`` and the reject-conditioned state
    ``E_0^k rho E_0^k / Tr[...]`` come from one eigendecomposition of ``E_0``.
    ``A(k)`` and the random-order conditioned state come either from the
    explicit sum over all ``m**k`` products of complement projectors or,
    equivalently, from ``k`` applications of the averaged reject channel
    ``sigma -> (1/m) sum_i (1 - M_i) sigma (1 - M_i)``.

Sampling
    Trajectories are simulated shot-by-shot with Born sampling.  Every random
    draw is addressed by ``(seed, shot, round, lane)`` (see :mod:`qevent.rng`)
    so results are identical however the shots are batched or split across
    workers.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .measurements import (
    DEFAULT_PRODUCT_CAP,
    BlendedMeasurement,
    MeasurementEnsemble,
    complement_ensemble,
    enumerate_products,
    make_blended,
)
from .qla import ContractError, DensityMatrix, dagger
from .rng import LANE_BORN, LANE_COPY, LANE_PICK, LANES, uniforms

__all__ = [
    "SURVIVAL_FLOOR",
    "NonProjectiveError",
    "ZeroSurvivalError",
    "ExactSequenceResult",
    "EngineConfig",
    "TrajectoryRecord",
    "TrajectoryBatch",
    "as_state",
    "blended_exact",
    "blended_survival",
    "blended_unnormalized",
    "blended_accept_curve",
    "random_exact",
    "random_unnormalized",
    "random_accept_curve",
    "first_accept_profile",
    "first_accept_totals",
    "first_accept_curve",
    "sample_random_trajectory",
    "sample_blended_trajectory",
    "sample_random_batch",
    "sample_blended_batch",
    "monte_carlo_accept",
    "hoeffding_halfwidth",
    "default_workers",
]

SURVIVAL_FLOOR = 1e-12


class NonProjectiveError(ContractError):
    """The random-order closed forms need every measurement to be a projector."""


class ZeroSurvivalError(RuntimeError):
    """Conditioning on an all-reject event of (numerically) zero probability."""


@dataclass(frozen=True)
class ExactSequenceResult:
    k: int
    accept_prob: float
    conditioned_state: DensityMatrix | None

    @property
    def survival(self) -> float:
        return 1.0 - self.accept_prob

    def require_state(self) -> DensityMatrix:
        if self.conditioned_state is None:
            raise ZeroSurvivalError(
                f"all-reject event after {self.k} rounds has probability {self.survival:.3e}")
        return self.conditioned_state


def as_state(rho) -> DensityMatrix:
    return rho if isinstance(rho, DensityMatrix) else DensityMatrix(rho)


def _blended(source) -> BlendedMeasurement:
    if isinstance(source, BlendedMeasurement):
        return source
    return make_blended(source)


def _check_dim(rho: DensityMatrix, dim: int) -> None:
    if rho.dim != dim:
        raise ContractError(f"state has dimension {rho.dim}, measurements have {dim}")


# -- blended, exact ------------------------------------------------------------


def blended_unnormalized(rho, source, k: int) -> np.ndarray:
    """``E_0^k rho E_0^k`` (trace = ``1 - B(k)``)."""
    rho = as_state(rho)
    bl = _blended(source)
    _check_dim(rho, bl.source.dim)
    ek = bl.reject_power(k)
    return ek @ rho.mat @ ek


def blended_survival(rho, source, k) -> np.ndarray | float:
    """``Tr[E_0^{2k} rho]`` for scalar or array ``k``."""
    rho = as_state(rho)
    bl = _blended(source)
    _check_dim(rho, bl.source.dim)
    lam = bl.reject_op.eigenvalues
    v = bl.reject_op.eigenvectors
    diag = np.real(np.einsum("ai,ab,bi->i", v.conj(), rho.mat, v))
    ks = np.asarray(k, dtype=np.float64)
    out = np.power.outer(lam, 2.0 * ks) if ks.ndim else np.power(lam, 2.0 * ks)
    res = np.tensordot(diag, out, axes=(0, 0))
    res = np.clip(res, 0.0, 1.0)
    return float(res) if ks.ndim == 0 else res


def blended_exact(rho, source, k: int) -> ExactSequenceResult:
    """``B(k)`` and the state after ``k`` rejecting blended measurements."""
    if k < 0:
        raise ValueError("k must be non-negative")
    rho = as_state(rho)
    if k == 0:
        return ExactSequenceResult(0, 0.0, rho)
    surv = blended_survival(rho, source, k)
    state = None
    if surv >= SURVIVAL_FLOOR:
        state = DensityMatrix(blended_unnormalized(rho, source, k))
    return ExactSequenceResult(k, float(1.0 - surv), state)


def blended_accept_curve(rho, source, ks) -> np.ndarray:
    return 1.0 - np.asarray(blended_survival(rho, source, np.asarray(ks)))


# -- random order, exact -------------------------------------------------------


def _reject_channel(ens: MeasurementEnsemble):
    ks = np.stack([g.reject_kraus.mat for g in ens.groups])
    w = ens.weights()

    def apply(sigma: np.ndarray) -> np.ndarray:
        return np.einsum("g,gij,jk,glk->il", w, ks, sigma, ks.conj())

    return apply


def random_unnormalized(rho, ens: MeasurementEnsemble, k: int, *, cap: int = DEFAULT_PRODUCT_CAP,
                        method: str = "enumerate") -> np.ndarray:
    """``m^{-k} sum_{T} T rho T^dag`` over complement products ``T``.

    ``method="enumerate"`` walks all ``m**k`` products (bounded by ``cap``);
    ``"channel"`` applies the averaged reject channel ``k`` times, which is
    the same sum regrouped; ``"auto"`` enumerates when within the cap.
    """
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    if method == "auto":
        method = "enumerate" if ens.m**k <= cap else "channel"
    if method == "channel":
        phi = _reject_channel(ens)
        sigma = np.array(rho.mat)
        for _ in range(k):
            sigma = phi(sigma)
        return sigma
    if method != "enumerate":
        raise ValueError(f"unknown method {method!r}")
    comp = complement_ensemble(ens)
    acc = np.zeros_like(rho.mat)
    for _, t in enumerate_products(comp, k, cap=cap):
        acc += t @ rho.mat @ dagger(t)
    return acc / float(ens.m) ** k


def random_exact(rho, ens: MeasurementEnsemble, k: int, cap: int = DEFAULT_PRODUCT_CAP,
                 method: str = "enumerate") -> ExactSequenceResult:
    """``A(k)`` and the random-order all-reject state, for projective ensembles."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if not ens.is_projective:
        raise NonProjectiveError(
            "exact random-order formulas assume projective measurements (1 - M = sqrt(1 - M)); "
            "use the trajectory sampler for general measurements")
    rho = as_state(rho)
    if k == 0:
        return ExactSequenceResult(0, 0.0, rho)
    sigma = random_unnormalized(rho, ens, k, cap=cap, method=method)
    surv = float(np.real(np.trace(sigma)))
    state = DensityMatrix(sigma) if surv >= SURVIVAL_FLOOR else None
    return ExactSequenceResult(k, float(min(max(1.0 - surv, 0.0), 1.0)), state)


def random_accept_curve(rho, ens: MeasurementEnsemble, kmax: int) -> np.ndarray:
    """``A(0), A(1), ..., A(kmax)`` by iterating the reject channel."""
    if not ens.is_projective:
        raise NonProjectiveError("A(k) closed form needs projective measurements")
    rho = as_state(rho)
    phi = _reject_channel(ens)
    sigma = np.array(rho.mat)
    out = [0.0]
    for _ in range(kmax):
        sigma = phi(sigma)
        out.append(1.0 - float(np.real(np.trace(sigma))))
    return np.clip(np.array(out), 0.0, 1.0)


def _profile_inputs(ens: MeasurementEnsemble, mode: str):
    accept = np.stack([g.mat for g in ens.groups]).astype(np.complex128)
    w = ens.weights().astype(np.float64)
    if mode == "random":
        kraus = np.stack([g.reject_kraus.mat for g in ens.groups]).astype(np.complex128)
        kw = w
    elif mode == "blended":
        kraus = make_blended(ens).reject_op.mat[None].astype(np.complex128)
        kw = np.ones(1)
    else:
        raise ValueError(f"mode must be 'random' or 'blended', got {mode!r}")
    return accept, w, kraus, kw


def first_accept_profile(rho, ens: MeasurementEnsemble, rounds: int, mode: str) -> np.ndarray:
    """Exact ``P[first accept at round r on distinct entry g]``, shape ``(rounds, groups)``.

    Uses the same Kraus operators as the samplers, so it is exact for
    non-projective measurements too.
    """
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    accept, w, kraus, kw = _profile_inputs(ens, mode)
    sigma = np.array(rho.mat)
    out = np.empty((rounds, len(w)))
    for r in range(rounds):
        out[r] = w * np.real(np.einsum("gij,ji->g", accept, sigma))
        sigma = np.einsum("g,gij,jk,glk->il", kw, kraus, sigma, kraus.conj())
    return out


def first_accept_totals(rho, ens: MeasurementEnsemble, rounds: int, mode: str,
                        floor: float = 1e-18) -> tuple[np.ndarray, float]:
    """Per-entry first-accept probabilities summed over all rounds, plus survival.

    Compiled loop; suited to millions of rounds in small dimension.
    """
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    accept, w, kraus, kw = _profile_inputs(ens, mode)
    totals, surv, _ = _kernels.first_accept_totals(
        np.array(rho.mat), accept, w, kraus, kw, int(rounds), float(floor))
    return totals, float(surv)


def first_accept_curve(rho, ens: MeasurementEnsemble, checkpoints, mode: str) -> np.ndarray:
    """Cumulative per-entry first-accept probabilities at each checkpoint round.

    Returns shape ``(len(checkpoints), groups)``; checkpoints are sorted first.
    """
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    accept, w, kraus, kw = _profile_inputs(ens, mode)
    cps = np.sort(np.asarray(checkpoints, dtype=np.int64))
    if cps.size and cps[0] < 0:
        raise ValueError("checkpoints must be non-negative")
    return _kernels.first_accept_cumulative(np.array(rho.mat), accept, w, kraus, kw, cps)


# -- sampling ------------------------------------------------------------------


def default_workers() -> int:
    env = os.environ.get("QEVENT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EngineConfig:
    rng_seed: int = 0
    shots: int = 1000
    halt_on_accept: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class TrajectoryRecord:
    """One shot.  ``outcomes[r] = (index, accepted)``; rounds are 1-based."""

    outcomes: list[tuple[int, bool]]
    first_accept_round: int | None
    first_accept_index: int | None
    final_state: DensityMatrix | None


@dataclass
class TrajectoryBatch:
    """Vectorised results for many shots.

    ``first_round`` is the 1-based round of the first accept (0 if none) and
    ``first_index`` the expanded index of the accepting measurement (-1 if
    none).  For blended runs the recorded per-round outcome is the blended
    outcome number: 0 for reject, ``i + 1`` for measurement ``i``.
    """

    mode: str
    rounds: int
    shot_ids: np.ndarray
    first_round: np.ndarray
    first_index: np.ndarray
    outcome_index: np.ndarray | None = None
    outcome_accept: np.ndarray | None = None
    final_states: np.ndarray | None = field(default=None, repr=False)

    @property
    def shots(self) -> int:
        return int(self.shot_ids.shape[0])

    @property
    def accepted(self) -> np.ndarray:
        return self.first_round > 0

    @property
    def accept_rate(self) -> float:
        return float(np.mean(self.accepted))

    def record(self, i: int) -> TrajectoryRecord:
        outcomes: list[tuple[int, bool]] = []
        if self.outcome_index is not None:
            for idx, acc in zip(self.outcome_index[i], self.outcome_accept[i]):
                if idx < 0:
                    break
                outcomes.append((int(idx), bool(acc)))
        fr = int(self.first_round[i])
        final = None if self.final_states is None else DensityMatrix(self.final_states[i])
        return TrajectoryRecord(outcomes, fr if fr > 0 else None,
                                int(self.first_index[i]) if fr > 0 else None, final)

    @staticmethod
    def concat(parts: list["TrajectoryBatch"]) -> "TrajectoryBatch":
        def cat(name):
            vals = [getattr(p, name) for p in parts]
            return None if vals[0] is None else np.concatenate(vals)

        return TrajectoryBatch(parts[0].mode, parts[0].rounds, cat("shot_ids"), cat("first_round"),
                               cat("first_index"), cat("outcome_index"), cat("outcome_accept"),
                               cat("final_states"))


def hoeffding_halfwidth(n: int, confidence: float = 0.99) -> float:
    """Two-sided Hoeffding half-width for a mean of ``n`` values in ``[0, 1]``."""
    if n <= 0:
        return float("inf")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


def _split(shot_ids: np.ndarray, workers: int) -> list[np.ndarray]:
    workers = max(1, min(workers, len(shot_ids)))
    return [c for c in np.array_split(shot_ids, workers) if len(c)]


def _fan_out(fn, shot_ids: np.ndarray, workers: int) -> TrajectoryBatch:
    chunks = _split(shot_ids, workers)
    if len(chunks) == 1:
        return fn(chunks[0])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(fn, chunks))
    return TrajectoryBatch.concat(parts)


def _group_tables(ens: MeasurementEnsemble):
    mats = np.stack([g.mat for g in ens.groups])
    ka = np.stack([g.accept_kraus.mat for g in ens.groups])
    kr = np.stack([g.reject_kraus.mat for g in ens.groups])
    return mats, ka, kr


def _sandwich(k: np.ndarray, s: np.ndarray) -> np.ndarray:
    out = k @ s @ dagger(k)
    tr = np.real(np.einsum("nii->n", out))
    return out / np.where(tr > 0, tr, 1.0)[:, None, None]


def _random_numpy(rho: DensityMatrix, ens: MeasurementEnsemble, rounds: int, seed: int,
                  halt: bool, shot_ids: np.ndarray, record: bool, keep_states: bool) -> TrajectoryBatch:
    n, d, m = len(shot_ids), ens.dim, ens.m
    mats, ka, kr = _group_tables(ens)
    states = np.broadcast_to(rho.mat, (n, d, d)).copy()
    active = np.ones(n, dtype=bool)
    first_round = np.zeros(n, dtype=np.int64)
    first_index = np.full(n, -1, dtype=np.int64)
    oi = np.full((n, rounds), -1, dtype=np.int64) if record else None
    oa = np.zeros((n, rounds), dtype=bool) if record else None
    for r in range(rounds):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        sid = shot_ids[act]
        idx = np.minimum((uniforms(seed, sid, r * LANES + LANE_PICK) * m).astype(np.int64), m - 1)
        g = ens.group_of(idx)
        st = states[act]
        p = np.real(np.einsum("nij,nji->n", mats[g], st))
        acc = uniforms(seed, sid, r * LANES + LANE_BORN) < p
        kraus = np.where(acc[:, None, None], ka[g], kr[g])
        states[act] = _sandwich(kraus, st)
        if record:
            oi[act, r] = idx
            oa[act, r] = acc
        newly = acc & (first_round[act] == 0)
        first_round[act[newly]] = r + 1
        first_index[act[newly]] = idx[newly]
        if halt:
            active[act[acc]] = False
    return TrajectoryBatch("random", rounds, shot_ids, first_round, first_index, oi, oa,
                           states if keep_states else None)


def _random_kernel(rho: DensityMatrix, ens: MeasurementEnsemble, rounds: int, seed: int,
                   shot_ids: np.ndarray, keep_states: bool) -> TrajectoryBatch:
    mats, ka, kr = _group_tables(ens)
    psi = rho.state_vector().astype(np.complex128)
    fr, fi, finals = _kernels.random_pure_trajectories(
        psi, mats.astype(np.complex128), kr.astype(np.complex128), np.asarray(ens.offsets, dtype=np.int64),
        np.uint64(int(seed) & ((1 << 64) - 1)), shot_ids.astype(np.int64), int(rounds))
    states = None
    if keep_states:
        states = np.einsum("ni,nj->nij", finals, finals.conj())
        hit = np.flatnonzero(fr > 0)
        if hit.size:
            g = ens.group_of(fi[hit])
            states[hit] = _sandwich(ka[g], states[hit])
    return TrajectoryBatch("random", rounds, shot_ids, fr, fi, None, None, states)


def sample_random_batch(rho, ens: MeasurementEnsemble, rounds: int, config: EngineConfig, *,
                        shot_ids=None, record: bool = False, keep_states: bool = False,
                        backend: str = "auto") -> TrajectoryBatch:
    """Random-order trajectories for ``config.shots`` shots (or explicit ``shot_ids``).

    Each round draws a uniformly random measurement and applies Born sampling
    with Kraus pair ``{sqrt(M), sqrt(1 - M)}``; works for non-projective
    measurements.  ``backend="kernel"`` (the default for pure states with
    halting and no per-round record) runs a compiled per-shot loop.
    """
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    ids = np.arange(config.shots, dtype=np.int64) if shot_ids is None else np.asarray(shot_ids, np.int64)
    use_kernel = backend == "kernel" or (
        backend == "auto" and config.halt_on_accept and not record and rho.is_pure())
    if use_kernel:
        if not (config.halt_on_accept and not record and rho.is_pure()):
            raise ValueError("kernel backend needs a pure state, halting and no per-round record")

        def fn(chunk):
            return _random_kernel(rho, ens, rounds, config.rng_seed, chunk, keep_states)
    else:
        def fn(chunk):
            return _random_numpy(rho, ens, rounds, config.rng_seed, config.halt_on_accept,
                                 chunk, record, keep_states)
    return _fan_out(fn, ids, config.workers)


def _blended_shared(rho: DensityMatrix, ens: MeasurementEnsemble, bl: BlendedMeasurement, rounds: int,
                    seed: int, shot_ids: np.ndarray, record: bool, keep_states: bool) -> TrajectoryBatch:
    # Before the first accept every shot sits in the same reject-conditioned state.
    n, d = len(shot_ids), ens.dim
    mats = np.stack([g.mat for g in ens.groups])
    w = ens.weights()
    e0 = bl.reject_op.mat
    sigma = np.array(rho.mat)
    active = np.ones(n, dtype=bool)
    first_round = np.zeros(n, dtype=np.int64)
    first_index = np.full(n, -1, dtype=np.int64)
    first_group = np.full(n, -1, dtype=np.int64)
    accept_state_round = np.full(n, -1, dtype=np.int64)
    oi = np.full((n, rounds), -1, dtype=np.int64) if record else None
    oa = np.zeros((n, rounds), dtype=bool) if record else None
    history = []
    for r in range(rounds):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        q = w * np.real(np.einsum("gij,ji->g", mats, sigma))
        cq = np.cumsum(q)
        sid = shot_ids[act]
        u = uniforms(seed, sid, r * LANES + LANE_PICK)
        acc = u < cq[-1]
        g = np.minimum(np.searchsorted(cq, u, side="right"), len(q) - 1)
        hit = act[acc]
        if hit.size:
            gh = g[acc]
            c = ens.counts[gh]
            copy = np.minimum((uniforms(seed, shot_ids[hit], r * LANES + LANE_COPY) * c).astype(np.int64), c - 1)
            idx = ens.offsets[gh] + copy
            first_round[hit] = r + 1
            first_index[hit] = idx
            first_group[hit] = gh
            accept_state_round[hit] = r
            active[hit] = False
            if record:
                oi[hit, r] = idx + 1
                oa[hit, r] = True
        if record:
            rej = act[~acc]
            oi[rej, r] = 0
        if keep_states:
            history.append(sigma)
        nxt = e0 @ sigma @ e0
        tr = float(np.real(np.trace(nxt)))
        if tr <= 0.0:
            break
        sigma = nxt / tr
    states = None
    if keep_states:
        states = np.broadcast_to(sigma, (n, d, d)).copy()
        ka = np.stack([g.accept_kraus.mat for g in ens.groups])
        for i in np.flatnonzero(first_round > 0):
            k = ka[first_group[i]]
            s = k @ history[accept_state_round[i]] @ k
            states[i] = s / np.real(np.trace(s))
    return TrajectoryBatch("blended", rounds, shot_ids, first_round, first_index, oi, oa, states)


def _blended_general(rho: DensityMatrix, ens: MeasurementEnsemble, bl: BlendedMeasurement, rounds: int,
                     seed: int, shot_ids: np.ndarray, record: bool, keep_states: bool) -> TrajectoryBatch:
    n, d = len(shot_ids), ens.dim
    mats = np.stack([g.mat for g in ens.groups])
    eacc = np.stack([op.mat for op in bl.group_accept_ops])
    e0 = bl.reject_op.mat
    w = ens.weights()
    states = np.broadcast_to(rho.mat, (n, d, d)).copy()
    first_round = np.zeros(n, dtype=np.int64)
    first_index = np.full(n, -1, dtype=np.int64)
    oi = np.full((n, rounds), -1, dtype=np.int64) if record else None
    oa = np.zeros((n, rounds), dtype=bool) if record else None
    for r in range(rounds):
        q = w[None, :] * np.real(np.einsum("gij,nji->ng", mats, states))
        cq = np.cumsum(q, axis=1)
        u = uniforms(seed, shot_ids, r * LANES + LANE_PICK)
        acc = u < cq[:, -1]
        g = np.minimum((cq <= u[:, None]).sum(axis=1), len(w) - 1)
        c = ens.counts[g]
        copy = np.minimum((uniforms(seed, shot_ids, r * LANES + LANE_COPY) * c).astype(np.int64), c - 1)
        idx = ens.offsets[g] + copy
        kraus = np.where(acc[:, None, None], eacc[g], e0[None])
        states = _sandwich(kraus, states)
        newly = acc & (first_round == 0)
        first_round[newly] = r + 1
        first_index[newly] = idx[newly]
        if record:
            oi[:, r] = np.where(acc, idx + 1, 0)
            oa[:, r] = acc
    return TrajectoryBatch("blended", rounds, shot_ids, first_round, first_index, oi, oa,
                           states if keep_states else None)


def sample_blended_batch(rho, ens: MeasurementEnsemble, rounds: int, config: EngineConfig, *,
                         shot_ids=None, record: bool = False, keep_states: bool = False) -> TrajectoryBatch:
    """Repeated blended-measurement trajectories with ``(m+1)``-outcome Born sampling."""
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    rho = as_state(rho)
    _check_dim(rho, ens.dim)
    bl = make_blended(ens)
    ids = np.arange(config.shots, dtype=np.int64) if shot_ids is None else np.asarray(shot_ids, np.int64)
    impl = _blended_shared if config.halt_on_accept else _blended_general

    def fn(chunk):
        return impl(rho, ens, bl, rounds, config.rng_seed, chunk, record, keep_states)

    return _fan_out(fn, ids, config.workers)


def sample_random_trajectory(rho, ens: MeasurementEnsemble, rounds: int, config: EngineConfig,
                             shot: int = 0) -> TrajectoryRecord:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    batch = sample_random_batch(rho, ens, rounds, config, shot_ids=[shot], record=True, keep_states=True)
    return batch.record(0)


def sample_blended_trajectory(rho, ens: MeasurementEnsemble, rounds: int, config: EngineConfig,
                              shot: int = 0) -> TrajectoryRecord:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    batch = sample_blended_batch(rho, ens, rounds, config, shot_ids=[shot], record=True, keep_states=True)
    return batch.record(0)


def monte_carlo_accept(rho, ens: MeasurementEnsemble, rounds: int, mode: str,
                       config: EngineConfig) -> tuple[float, float]:
    """Fraction of shots with at least one accept, and its 99% Hoeffding half-width."""
    if mode == "random":
        batch = sample_random_batch(rho, ens, rounds, config)
    elif mode == "blended":
        batch = sample_blended_batch(rho, ens, rounds, config)
    else:
        raise ValueError(f"mode must be 'random' or 'blended', got {mode!r}")
    return batch.accept_rate, hoeffding_halfwidth(batch.shots)
