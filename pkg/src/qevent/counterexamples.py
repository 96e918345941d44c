"""Two-dimensional instances where the first accepting measurement tends to be
one whose accept probability on the initial state is zero.

``build_blended_counterexample`` assembles rank-1 projectors derived from a
three-outcome instrument ``{E1, E2, E3}`` (``E1`` rejects).  The random
variant builds two non-projective measurements ``M_A`` and ``M_B`` from the
same instrument and takes many copies of each.  All dynamics are 2x2; copies
share one operator inside the ensemble, so the samplers and exact profiles
only ever touch two distinct matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .measurements import MeasurementEnsemble, TwoOutcomeMeasurement
from .qla import ContractError, DensityMatrix, PsdOperator, psd_sqrt
from .sequential import (
    EngineConfig,
    blended_survival,
    first_accept_totals,
    hoeffding_halfwidth,
    sample_blended_batch,
    sample_random_batch,
)

__all__ = [
    "COMPLETENESS_TOL",
    "CONDITIONING_FLOOR",
    "CounterexampleInstance",
    "CounterexampleResult",
    "counterexample_state",
    "three_outcome_operators",
    "build_blended_counterexample",
    "build_random_counterexample",
    "exact_first_accept",
    "alternation_first_accept",
    "run_counterexample",
]

COMPLETENESS_TOL = 1e-8
CONDITIONING_FLOOR = 1e-8


def _ket(eps_power: float, sign: float = 1.0) -> np.ndarray:
    return np.array([1.0, sign * eps_power])


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 0.5:
        raise ContractError(f"eps must lie in (0, 1/2), got {eps}")


def counterexample_state(eps: float) -> DensityMatrix:
    """The pure state proportional to ``eps|0> - |1>``."""
    return DensityMatrix.pure(np.array([eps, -1.0]))


def three_outcome_operators(eps: float, sign: float = -1.0) -> tuple[PsdOperator, PsdOperator, PsdOperator]:
    """Kraus operators ``(E1, E2, E3)`` of the three-outcome instrument.

    ``E1^2 = (1 - eps^3)|1><1|``, ``E2^2 = eps/(1+eps) |v><v|`` with
    ``v = |0> + eps|1>``, and ``E3^2 = 1/(1+eps) |w><w|`` with
    ``w = |0> + sign * eps^2 |1>``.  Only ``sign = -1`` makes
    ``E1^2 + E2^2 + E3^2 = I``; ``sign = +1`` leaves an off-diagonal residual
    ``2 eps^2 / (1 + eps)`` and is rejected.
    """
    _check_eps(eps)
    e1sq = np.diag([0.0, (1.0 + eps - eps**3 - eps**4) / (1.0 + eps)])
    v = _ket(eps)
    w = _ket(eps**2, sign)
    e2sq = eps / (1.0 + eps) * np.outer(v, v)
    e3sq = 1.0 / (1.0 + eps) * np.outer(w, w)
    residual = float(np.max(np.abs(e1sq + e2sq + e3sq - np.eye(2))))
    if residual > COMPLETENESS_TOL:
        raise ContractError(f"instrument is not complete: max |sum E_i^2 - I| = {residual:.3e}")
    return tuple(psd_sqrt(PsdOperator(x, bounded_by_one=True)) for x in (e1sq, e2sq, e3sq))


@dataclass
class CounterexampleInstance:
    """An ensemble split into a leading block ``A`` and a trailing block ``B``."""

    eps: float
    kind: str
    ens: MeasurementEnsemble
    rho: DensityMatrix
    size_a: int
    size_b: int
    operators: dict = field(default_factory=dict, repr=False)

    @property
    def b_range(self) -> tuple[int, int]:
        return self.size_a, self.size_a + self.size_b

    @property
    def m(self) -> int:
        return self.size_a + self.size_b

    def b_weight(self) -> float:
        """``sum_{M in B} Tr[M rho]`` on the initial state."""
        if self.size_b == 0:
            return 0.0
        return float(self.ens.groups[-1].accept_prob(self.rho)) * self.size_b

    def in_b(self, index) -> np.ndarray:
        idx = np.asarray(index)
        return (idx >= self.size_a) & (idx < self.m)


def _ensemble(mat_a, mat_b, size_a: int, size_b: int) -> MeasurementEnsemble:
    if size_b == 0:
        return MeasurementEnsemble([mat_a], counts=[size_a], labels=["A"])
    return MeasurementEnsemble([mat_a, mat_b], counts=[size_a, size_b], labels=["A", "B"])


def _ceil(x: float) -> int:
    # guard against 1/eps^3 landing a hair above an integer
    return int(math.ceil(x - 1e-9))


def build_blended_counterexample(eps: float, size_a: int | None = None,
                                 size_b: int | None = None) -> CounterexampleInstance:
    """``ceil(eps^-3)`` copies of the projector onto ``|0> - eps^2|1>`` followed by
    ``ceil(eps^-2)`` copies of the projector onto ``|0> + eps|1>``."""
    e1, e2, e3 = three_outcome_operators(eps)
    size_a = _ceil(eps**-3) if size_a is None else int(size_a)
    size_b = _ceil(eps**-2) if size_b is None else int(size_b)
    a = _ket(eps**2, -1.0)
    b = _ket(eps)
    proj_a = np.outer(a, a) / (1.0 + eps**4)
    proj_b = np.outer(b, b) / (1.0 + eps**2)
    inst = CounterexampleInstance(eps, "blended", _ensemble(proj_a, proj_b, size_a, size_b),
                                  counterexample_state(eps), size_a, size_b,
                                  {"E1": e1.mat, "E2": e2.mat, "E3": e3.mat})
    return inst


def build_random_counterexample(eps: float, copies: int | None = None) -> CounterexampleInstance:
    """``M_B = E2^2`` and ``M_A = I - (C^-1 E1 C^-1)^2`` with ``C = (I - E2^2)^(1/4)``,
    each repeated ``copies`` times (default ``20 eps^-3``)."""
    e1, e2, _ = three_outcome_operators(eps)
    m_b = e2.mat @ e2.mat
    comp = PsdOperator(np.eye(2) - m_b)
    if comp.eigenvalues.min() < CONDITIONING_FLOOR:
        raise ContractError("I - E2^2 is too close to singular for its inverse fourth root")
    c_inv = comp.power(-0.25)
    inner = c_inv @ e1.mat @ c_inv
    m_a_raw = np.eye(2) - inner @ inner
    w = np.linalg.eigvalsh((m_a_raw + m_a_raw.conj().T) / 2)
    if w.min() < -COMPLETENESS_TOL or w.max() > 1.0 + COMPLETENESS_TOL:
        raise ContractError(f"M_A spectrum {w} leaves [0, 1]")
    m_a = PsdOperator(m_a_raw, bounded_by_one=True)
    copies = _ceil(20.0 * eps**-3) if copies is None else int(copies)
    return CounterexampleInstance(eps, "random", _ensemble(m_a.mat, m_b, copies, copies),
                                  counterexample_state(eps), copies, copies,
                                  {"E1": e1.mat, "E2": e2.mat, "M_A": m_a.mat, "M_B": m_b})


def exact_first_accept(inst: CounterexampleInstance, rounds: int | None = None) -> dict:
    """Exact probabilities that some measurement accepts within ``rounds`` and
    that the first accept comes from block ``B``."""
    rounds = inst.m if rounds is None else int(rounds)
    totals, surv = first_accept_totals(inst.rho, inst.ens, rounds, inst.kind, floor=0.0)
    accept = float(totals.sum())
    in_b = float(totals[1]) if inst.size_b else 0.0
    out = {"rounds": rounds, "accept": accept, "first_in_b": in_b,
           "first_in_b_given_accept": in_b / accept if accept > 0 else 0.0, "survival": surv}
    if inst.kind == "blended":
        out["accept_spectral"] = 1.0 - blended_survival(inst.rho, inst.ens, rounds)
    return out


def alternation_first_accept(inst: CounterexampleInstance, pairs: int) -> dict:
    """Strict alternation ``B, A, B, A, ...`` on the random-kind operators.

    Returns the probability that ``M_B`` is the first to accept computed three
    ways: a direct state recursion, the closed form
    ``sum_j Tr[E2^2 (I - E2^2)^(-1/2) E1^j rho E1^j]`` (exact because
    ``(I - E2^2)^(1/4)`` fixes the initial state), and the smaller sum
    ``sum_j Tr[E2^2 E1^j rho E1^j]`` that drops the ``(I - E2^2)^(-1/2)`` factor.
    """
    if inst.kind != "random":
        raise ContractError("alternation is defined on the random-kind operators")
    m_a, m_b = inst.operators["M_A"], inst.operators["M_B"]
    e1, e2 = inst.operators["E1"], inst.operators["E2"]
    ka = TwoOutcomeMeasurement(m_a).reject_kraus.mat
    kb_meas = TwoOutcomeMeasurement(m_b)
    kb = kb_meas.reject_kraus.mat
    sigma = np.array(inst.rho.mat)
    p_b = p_a = 0.0
    for _ in range(pairs):
        p_b += float(np.real(np.trace(m_b @ sigma)))
        sigma = kb @ sigma @ kb
        p_a += float(np.real(np.trace(m_a @ sigma)))
        sigma = ka @ sigma @ ka
    e2sq = e2 @ e2
    weight = e2sq @ PsdOperator(np.eye(2) - e2sq).power(-0.5)
    closed = lower = 0.0
    pj = np.array(inst.rho.mat)
    for _ in range(pairs):
        closed += float(np.real(np.trace(weight @ pj)))
        lower += float(np.real(np.trace(e2sq @ pj)))
        pj = e1 @ pj @ e1
    return {"pairs": pairs, "first_b_recursion": p_b, "first_a_recursion": p_a,
            "first_b_closed_form": closed, "first_b_lower_sum": lower}


@dataclass
class CounterexampleResult:
    kind: str
    eps: float
    shots: int
    rounds: int
    accept_rate: float
    first_in_b_rate: float
    first_in_b_given_accept: float
    halfwidth: float
    conditional_halfwidth: float
    exact: dict
    mean_rounds_to_accept: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "eps": self.eps,
            "shots": self.shots,
            "rounds": self.rounds,
            "accept_rate": self.accept_rate,
            "first_accept_in_B_rate": self.first_in_b_rate,
            "first_accept_in_B_given_accept": self.first_in_b_given_accept,
            "halfwidth_99": self.halfwidth,
            "conditional_halfwidth_99": self.conditional_halfwidth,
            "exact": self.exact,
            "mean_rounds_to_accept": self.mean_rounds_to_accept,
        }


def run_counterexample(inst: CounterexampleInstance, config: EngineConfig,
                       rounds: int | None = None) -> CounterexampleResult:
    """Sample ``|A| + |B|`` rounds per shot and report where the first accept lands."""
    rounds = inst.m if rounds is None else int(rounds)
    cfg = EngineConfig(config.rng_seed, config.shots, True, config.workers)
    if inst.kind == "blended":
        batch = sample_blended_batch(inst.rho, inst.ens, rounds, cfg)
    else:
        batch = sample_random_batch(inst.rho, inst.ens, rounds, cfg)
    acc = batch.accepted
    in_b = acc & inst.in_b(batch.first_index)
    n_acc = int(acc.sum())
    cond = float(in_b.sum()) / n_acc if n_acc else 0.0
    mean_rounds = float(batch.first_round[acc].mean()) if n_acc else 0.0
    return CounterexampleResult(inst.kind, inst.eps, batch.shots, rounds, batch.accept_rate,
                                float(in_b.mean()), cond, hoeffding_halfwidth(batch.shots),
                                hoeffding_halfwidth(n_acc), exact_first_accept(inst, rounds), mean_rounds)
