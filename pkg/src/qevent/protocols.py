"""Quantum OR, event finding and mean estimation built on the sequential engines.

Every protocol run reports the Monte-Carlo result next to the exact value the
engines can compute for the same quantity and the theorem-level bounds that
should bracket it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .measurements import MeasurementEnsemble, TwoOutcomeMeasurement
from .qla import ContractError, DensityMatrix, PsdOperator, hermitian_eig, random_pure_vector
from .rng import LANE_BORN, LANES, uniforms
from .sequential import (
    EngineConfig,
    NonProjectiveError,
    TrajectoryBatch,
    as_state,
    blended_survival,
    first_accept_totals,
    hoeffding_halfwidth,
    random_exact,
    sample_blended_batch,
    sample_random_batch,
)

__all__ = [
    "CASE_TOL",
    "RANDOM_OR_FLOOR",
    "OrInstance",
    "OrResult",
    "EventFindingResult",
    "EventFindingSummary",
    "MeanEstimationReport",
    "VarianceBreakdown",
    "plant_case_one",
    "plant_case_two",
    "blended_or_bounds",
    "random_or_bounds",
    "blended_event_bound",
    "random_event_bound",
    "run_or_blended",
    "run_or_random",
    "run_event_finding",
    "event_finding_batch",
    "run_mean_estimation",
    "mean_estimation_batch",
    "mean_estimation_variance",
    "count_distribution",
    "binomial_sigma",
]

CASE_TOL = 1e-9
RANDOM_OR_FLOOR = (3.0 - math.sqrt(5.0)) / 4.0


def binomial_sigma(rate: float, n: int) -> float:
    """Standard error of a Bernoulli mean estimated from ``n`` shots."""
    return math.sqrt(max(rate * (1.0 - rate), 0.0) / n) if n > 0 else float("inf")


@dataclass(frozen=True)
class OrInstance:
    """A Quantum OR input with an optional promise tag.

    ``case_tag="one"`` asserts some ``Tr[M_i rho] > 1 - eps``;
    ``case_tag="two"`` asserts ``sum_i Tr[M_i rho] <= delta``.
    """

    ens: MeasurementEnsemble
    rho: DensityMatrix
    case_tag: str = "unknown"
    eps: float = 0.0
    delta: float = 0.0
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "rho", as_state(self.rho))
        if self.rho.dim != self.ens.dim:
            raise ContractError("state and ensemble dimensions differ")
        if self.case_tag not in ("one", "two", "unknown"):
            raise ContractError(f"case_tag must be one|two|unknown, got {self.case_tag!r}")
        for name in ("eps", "delta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {v}")
        if self.case_tag == "one" and not self.p_down > 1.0 - self.eps - CASE_TOL:
            raise ContractError(f"case one needs p_down > 1 - eps; p_down={self.p_down:.6g}, eps={self.eps}")
        if self.case_tag == "two" and not self.p_up <= self.delta + CASE_TOL:
            raise ContractError(f"case two needs p_up <= delta; p_up={self.p_up:.6g}, delta={self.delta}")

    @cached_property
    def group_probs(self) -> np.ndarray:
        return self.ens.group_accept_probs(self.rho)

    @property
    def m(self) -> int:
        return self.ens.m

    @property
    def p_down(self) -> float:
        return float(self.group_probs.max())

    @property
    def p_up(self) -> float:
        return float(np.dot(self.group_probs, self.ens.counts))

    @property
    def good_groups(self) -> np.ndarray:
        """Entries whose accept probability on the original state exceeds ``1 - eps``."""
        return self.group_probs > 1.0 - self.eps

    def is_good_index(self, index: int) -> bool:
        return bool(self.good_groups[self.ens.group_of(index)])

    @property
    def beta(self) -> float:
        """Total accept weight of the entries that are not good."""
        bad = ~self.good_groups
        return float(np.dot(self.group_probs[bad], self.ens.counts[bad]))


def _vector_with_overlap(psi: np.ndarray, q: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector ``phi`` with ``|<phi|psi>|^2 = q``."""
    d = psi.shape[0]
    chi = rng.normal(size=d) + 1j * rng.normal(size=d)
    chi -= psi * np.vdot(psi, chi)
    chi /= np.linalg.norm(chi)
    return math.sqrt(q) * psi + math.sqrt(1.0 - q) * chi


def _rank_one(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


def plant_case_one(dim: int, m: int, p_down: float, beta: float, eps: float, rng_seed: int) -> OrInstance:
    """Pure state, one rank-1 projector accepting with ``p_down``, and
    ``m - 1`` rank-1 distractors sharing total weight ``beta`` equally."""
    if dim < 2 or m < 1:
        raise ContractError("need dim >= 2 and m >= 1")
    if not p_down > 1.0 - eps:
        raise ContractError("planted overlap must exceed 1 - eps")
    if m == 1 and beta > 0:
        raise ContractError("beta > 0 needs at least one distractor")
    each = beta / (m - 1) if m > 1 else 0.0
    if each > 1.0 - eps:
        raise ContractError(f"distractor weight {each:.4g} would itself count as good")
    rng = np.random.default_rng(rng_seed)
    psi = random_pure_vector(dim, rng)
    mats = [_rank_one(_vector_with_overlap(psi, p_down, rng))]
    mats += [_rank_one(_vector_with_overlap(psi, each, rng)) for _ in range(m - 1)]
    return OrInstance(MeasurementEnsemble(mats), DensityMatrix.pure(psi), "one", eps, 0.0,
                      label=f"case1(d={dim},m={m},p={p_down},beta={beta},eps={eps},seed={rng_seed})")


def plant_case_two(dim: int, m: int, delta: float, rng_seed: int) -> OrInstance:
    """Pure state with ``m`` rank-1 projectors each accepting with ``delta / m``."""
    if dim < 2 or m < 1:
        raise ContractError("need dim >= 2 and m >= 1")
    rng = np.random.default_rng(rng_seed)
    psi = random_pure_vector(dim, rng)
    mats = [_rank_one(_vector_with_overlap(psi, delta / m, rng)) for _ in range(m)]
    return OrInstance(MeasurementEnsemble(mats), DensityMatrix.pure(psi), "two", 0.0, delta,
                      label=f"case2(d={dim},m={m},delta={delta},seed={rng_seed})")


# -- Quantum OR ---------------------------------------------------------------


def blended_or_bounds(p_down: float, p_up: float) -> tuple[float, float]:
    return p_down**2 / 4.0, p_up


def random_or_bounds(p_down: float, p_up: float) -> tuple[float, float]:
    return min(p_down**2 / 4.5, RANDOM_OR_FLOOR), 2.0 * p_up


@dataclass
class OrResult:
    protocol: str
    rounds: int
    shots: int
    accept_rate: float
    halfwidth: float
    sigma: float
    exact_accept: float
    lower_bound: float
    upper_bound: float
    batch: TrajectoryBatch | None = field(default=None, repr=False)

    @property
    def exact_within_bounds(self) -> bool:
        return self.lower_bound - CASE_TOL <= self.exact_accept <= self.upper_bound + CASE_TOL

    @property
    def empirical_within_bounds(self) -> bool:
        """Empirical rate inside the bounds widened by three standard errors."""
        s = 3.0 * self.sigma
        return self.lower_bound - s <= self.accept_rate <= self.upper_bound + s

    @property
    def empirical_matches_exact(self) -> bool:
        return abs(self.accept_rate - self.exact_accept) <= self.halfwidth

    def to_dict(self) -> dict:
        return {
            "accept_rate": self.accept_rate,
            "halfwidth_99": self.halfwidth,
            "sigma": self.sigma,
            "exact_accept": self.exact_accept,
            "rounds": self.rounds,
            "shots": self.shots,
            "theorem_bounds": {"lower": self.lower_bound, "upper": self.upper_bound},
            "exact_within_bounds": self.exact_within_bounds,
            "empirical_within_bounds": self.empirical_within_bounds,
            "empirical_matches_exact": self.empirical_matches_exact,
        }


def _rounds(inst: OrInstance, rounds: int | None) -> int:
    return inst.m if rounds is None else int(rounds)


def run_or_blended(inst: OrInstance, config: EngineConfig, rounds: int | None = None,
                   keep_batch: bool = False) -> OrResult:
    """Apply the blended measurement ``m`` times and accept on any accepting outcome."""
    r = _rounds(inst, rounds)
    cfg = EngineConfig(config.rng_seed, config.shots, True, config.workers)
    batch = sample_blended_batch(inst.rho, inst.ens, r, cfg)
    exact = 1.0 - blended_survival(inst.rho, inst.ens, r)
    lo, hi = blended_or_bounds(inst.p_down, inst.p_up)
    rate = batch.accept_rate
    return OrResult("or-blended", r, batch.shots, rate, hoeffding_halfwidth(batch.shots),
                    binomial_sigma(rate, batch.shots), float(exact), lo, hi,
                    batch if keep_batch else None)


def run_or_random(inst: OrInstance, config: EngineConfig, rounds: int | None = None,
                  keep_batch: bool = False) -> OrResult:
    """Apply ``m`` uniformly random measurements, accepting on the first accept."""
    if not inst.ens.is_projective:
        raise NonProjectiveError("the random Quantum OR guarantees need projective measurements")
    r = _rounds(inst, rounds)
    cfg = EngineConfig(config.rng_seed, config.shots, True, config.workers)
    batch = sample_random_batch(inst.rho, inst.ens, r, cfg)
    exact = random_exact(inst.rho, inst.ens, r, method="auto").accept_prob
    lo, hi = random_or_bounds(inst.p_down, inst.p_up)
    rate = batch.accept_rate
    return OrResult("or-random", r, batch.shots, rate, hoeffding_halfwidth(batch.shots),
                    binomial_sigma(rate, batch.shots), float(exact), lo, hi,
                    batch if keep_batch else None)


# -- event finding ------------------------------------------------------------


def blended_event_bound(eps: float, beta: float) -> float:
    return (1.0 - eps) ** 3 / (12.0 * (1.0 + beta))


def random_event_bound(eps: float, beta: float) -> float:
    return (1.0 - eps) ** 7 / (1296.0 * (1.0 + beta) ** 3)


@dataclass(frozen=True)
class EventFindingResult:
    """One event-finding shot.  ``good`` is judged on the original state."""

    accepted: bool
    first_index: int | None
    good: bool | None
    beta: float

    def __post_init__(self):
        if self.accepted != (self.good is not None) or self.accepted != (self.first_index is not None):
            raise ContractError("good and first_index are defined exactly when the run accepted")


@dataclass
class EventFindingSummary:
    mode: str
    shots: int
    beta: float
    eps: float
    accept_rate: float
    good_rate: float
    sigma: float
    halfwidth: float
    exact_accept: float
    exact_good: float
    lower_bound: float
    case_two_upper: float

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "shots": self.shots,
            "beta": self.beta,
            "eps": self.eps,
            "accept_rate": self.accept_rate,
            "accept_and_good_rate": self.good_rate,
            "sigma": self.sigma,
            "halfwidth_99": self.halfwidth,
            "exact_accept": self.exact_accept,
            "exact_accept_and_good": self.exact_good,
            "theorem_bounds": {"accept_and_good_lower": self.lower_bound,
                               "case_two_accept_upper": self.case_two_upper},
        }


def _event_batch(inst: OrInstance, mode: str, config: EngineConfig, shot_ids=None) -> TrajectoryBatch:
    cfg = EngineConfig(config.rng_seed, config.shots, True, config.workers)
    if mode == "blended":
        return sample_blended_batch(inst.rho, inst.ens, inst.m, cfg, shot_ids=shot_ids)
    if mode == "random":
        if not inst.ens.is_projective:
            raise NonProjectiveError("random event finding needs projective measurements")
        return sample_random_batch(inst.rho, inst.ens, inst.m, cfg, shot_ids=shot_ids)
    raise ValueError(f"mode must be 'blended' or 'random', got {mode!r}")


def run_event_finding(inst: OrInstance, mode: str, config: EngineConfig, shot: int = 0) -> EventFindingResult:
    """A single event-finding run (the shot numbered ``shot`` of the seed's stream)."""
    batch = _event_batch(inst, mode, config, shot_ids=[shot])
    if batch.first_round[0] == 0:
        return EventFindingResult(False, None, None, inst.beta)
    idx = int(batch.first_index[0])
    return EventFindingResult(True, idx, inst.is_good_index(idx), inst.beta)


def event_finding_batch(inst: OrInstance, mode: str, config: EngineConfig) -> EventFindingSummary:
    """Many event-finding shots plus the exact ``P[accept and first accept is good]``."""
    batch = _event_batch(inst, mode, config)
    acc = batch.accepted
    good = np.zeros(batch.shots, dtype=bool)
    if acc.any():
        good[acc] = inst.good_groups[inst.ens.group_of(batch.first_index[acc])]
    totals, surv = first_accept_totals(inst.rho, inst.ens, inst.m, mode, floor=0.0)
    exact_good = float(totals[inst.good_groups].sum())
    rate = float(good.mean())
    if mode == "blended":
        lower, upper2 = blended_event_bound(inst.eps, inst.beta), inst.delta
    else:
        lower, upper2 = random_event_bound(inst.eps, inst.beta), 2.0 * inst.delta
    return EventFindingSummary(mode, batch.shots, inst.beta, inst.eps, batch.accept_rate, rate,
                               binomial_sigma(rate, batch.shots), hoeffding_halfwidth(batch.shots),
                               1.0 - surv, exact_good, lower, upper2)


# -- mean estimation ----------------------------------------------------------


@dataclass(frozen=True)
class VarianceBreakdown:
    """Single-copy estimator variance for a pure input, split into its parts."""

    predicted: float
    shot_term: float
    sigma_sq: float
    sigma_sq_bound: float
    eigenvalues: tuple[float, ...]


@dataclass
class MeanEstimationReport:
    t: int
    k: int
    estimate: float
    per_copy_counts: list[int]
    target: float
    predicted_variance: float | None
    sigma_sq_residual: float | None

    def __post_init__(self):
        if not math.isclose(self.estimate, sum(self.per_copy_counts) / (self.t * self.k), abs_tol=1e-12):
            raise ContractError("estimate must equal sum(A_j) / (t k)")


def _mean_measurement(ens: MeasurementEnsemble) -> TwoOutcomeMeasurement:
    return TwoOutcomeMeasurement(PsdOperator(ens.average_operator(), bounded_by_one=True), label="mean")


def _populations(rho: DensityMatrix, mean: TwoOutcomeMeasurement) -> tuple[np.ndarray, np.ndarray]:
    lam = np.clip(mean.m_op.eigenvalues, 0.0, 1.0)
    v = mean.m_op.eigenvectors
    pop = np.real(np.einsum("ai,ab,bi->i", v.conj(), rho.mat, v))
    pop = np.clip(pop, 0.0, None)
    return lam, pop / pop.sum()


def mean_estimation_batch(rho, ens: MeasurementEnsemble, t: int, k: int, config: EngineConfig,
                          shot_ids=None) -> np.ndarray:
    """Accept counts ``A_j`` with shape ``(shots, k)``.

    Both Kraus operators of ``{M^(1/2), (1 - M)^(1/2)}`` are diagonal in the
    eigenbasis of the mean operator ``M``, so outcome probabilities depend only
    on the state's populations in that basis.  Each shot tracks those
    populations and applies Born sampling with the exact population update.
    """
    if t < 1 or k < 1:
        raise ValueError("t and k must be >= 1")
    rho = as_state(rho)
    lam, pop0 = _populations(rho, _mean_measurement(ens))
    ids = np.arange(config.shots, dtype=np.int64) if shot_ids is None else np.asarray(shot_ids, np.int64)
    counts = np.zeros((ids.size, k), dtype=np.int64)
    for j in range(k):
        pop = np.broadcast_to(pop0, (ids.size, lam.size)).copy()
        for r in range(t):
            p = pop @ lam
            u = uniforms(config.rng_seed, ids, (j * t + r) * LANES + LANE_BORN)
            acc = u < p
            factor = np.where(acc[:, None], lam[None, :], 1.0 - lam[None, :])
            pop *= factor
            norm = pop.sum(axis=1, keepdims=True)
            pop /= np.where(norm > 0, norm, 1.0)
            counts[:, j] += acc
    return counts


def mean_estimation_variance(rho_pure, ens: MeasurementEnsemble, t: int) -> VarianceBreakdown:
    """Predicted variance of ``A_1 / t`` for a pure input, with the residual term.

    ``(1/t) sum_a |alpha_a|^2 lam_a (1 - lam_a) + sigma^2`` where
    ``sigma^2 = sum_a |alpha_a|^2 lam_a^2 - (sum_a |alpha_a|^2 lam_a)^2`` is the
    variance of the eigenvalue drawn with weights ``|alpha_a|^2``.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    rho = as_state(rho_pure)
    if not rho.is_pure():
        raise ContractError("the variance formula is stated for pure inputs; got a mixed state")
    lam, w = _populations(rho, _mean_measurement(ens))
    shot_term = float(np.dot(w, lam * (1.0 - lam))) / t
    mean = float(np.dot(w, lam))
    sigma_sq = max(float(np.dot(w, lam**2)) - mean**2, 0.0)
    bound = 0.25 * float(lam.max() - lam.min()) ** 2
    return VarianceBreakdown(shot_term + sigma_sq, shot_term, sigma_sq, bound, tuple(float(x) for x in lam))


def count_distribution(rho, ens: MeasurementEnsemble, t: int) -> np.ndarray:
    """``P[A_1 = x] = C(t, x) Tr[M^x (1 - M)^(t - x) rho]`` for ``x = 0..t``."""
    rho = as_state(rho)
    mbar = ens.average_operator()
    comp = np.eye(ens.dim) - mbar
    out = np.empty(t + 1)
    for x in range(t + 1):
        op = np.linalg.matrix_power(mbar, x) @ np.linalg.matrix_power(comp, t - x)
        out[x] = math.comb(t, x) * float(np.real(np.trace(op @ rho.mat)))
    return out


def run_mean_estimation(rho, ens: MeasurementEnsemble, t: int, k: int, config: EngineConfig,
                        shot: int = 0) -> MeanEstimationReport:
    """One run of the mean-estimation procedure on ``k`` fresh copies."""
    rho = as_state(rho)
    counts = mean_estimation_batch(rho, ens, t, k, config, shot_ids=[shot])[0]
    est = float(counts.sum()) / (t * k)
    target = float(np.real(np.trace(ens.average_operator() @ rho.mat)))
    pred = sig = None
    if rho.is_pure():
        vb = mean_estimation_variance(rho, ens, t)
        pred, sig = vb.predicted / k, vb.sigma_sq
    return MeanEstimationReport(t, k, est, [int(c) for c in counts], target, pred, sig)
