"""Compiled inner loops for long trajectories and long exact profiles."""

from __future__ import annotations

import numba as nb
import numpy as np

from .rng import LANE_BORN, LANE_PICK, LANES, shot_key, uniform_from_key


@nb.njit(cache=True, nogil=True)
def _group_of(offsets, idx):
    lo = 0
    hi = offsets.shape[0] - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if offsets[mid] <= idx:
            lo = mid
        else:
            hi = mid
    return lo


@nb.njit(cache=True, nogil=True)
def random_pure_trajectories(psi0, accept_ops, reject_kraus, offsets, seed, shot_ids, rounds):
    """Halting random-order trajectories for a pure initial state.

    Returns 1-based first-accept rounds (0 = never), expanded measurement
    indices (-1 = never) and final state vectors.
    """
    n = shot_ids.shape[0]
    d = psi0.shape[0]
    m = offsets[offsets.shape[0] - 1]
    first_round = np.zeros(n, dtype=np.int64)
    first_index = np.full(n, -1, dtype=np.int64)
    finals = np.empty((n, d), dtype=np.complex128)
    v = np.empty(d, dtype=np.complex128)
    w = np.empty(d, dtype=np.complex128)
    for s in range(n):
        key = shot_key(seed, shot_ids[s])
        for a in range(d):
            v[a] = psi0[a]
        for r in range(rounds):
            u = uniform_from_key(key, r * LANES + LANE_PICK)
            idx = np.int64(u * m)
            if idx >= m:
                idx = m - 1
            g = _group_of(offsets, idx)
            mop = accept_ops[g]
            p = 0.0
            for a in range(d):
                acc = 0j
                for b in range(d):
                    acc += mop[a, b] * v[b]
                p += (v[a].conjugate() * acc).real
            if uniform_from_key(key, r * LANES + LANE_BORN) < p:
                first_round[s] = r + 1
                first_index[s] = idx
                # post-accept state sqrt(M) v is written by the caller
                break
            k = reject_kraus[g]
            nrm = 0.0
            for a in range(d):
                acc = 0j
                for b in range(d):
                    acc += k[a, b] * v[b]
                w[a] = acc
                nrm += acc.real * acc.real + acc.imag * acc.imag
            nrm = np.sqrt(nrm)
            for a in range(d):
                v[a] = w[a] / nrm
        for a in range(d):
            finals[s, a] = v[a]
    return first_round, first_index, finals


@nb.njit(cache=True, nogil=True)
def first_accept_totals(rho, accept_ops, weights, reject_kraus, kraus_weights, rounds, floor):
    """Exact first-accept probabilities summed over ``rounds`` rounds.

    The unnormalised all-reject state evolves as
    ``sigma <- sum_j kraus_weights[j] K_j sigma K_j^dag`` and the chance of a
    first accept on group ``g`` at the next round is
    ``weights[g] * Tr[accept_ops[g] sigma]``.  Iteration stops early once the
    survival probability drops below ``floor``.

    Returns per-group totals, the final survival probability and the number of
    rounds actually iterated.
    """
    d = rho.shape[0]
    ng = accept_ops.shape[0]
    nk = reject_kraus.shape[0]
    totals = np.zeros(ng)
    sigma = rho.copy()
    tmp = np.empty((d, d), dtype=np.complex128)
    new = np.empty((d, d), dtype=np.complex128)
    done = 0
    for r in range(rounds):
        surv = 0.0
        for a in range(d):
            surv += sigma[a, a].real
        if surv < floor:
            break
        for g in range(ng):
            mop = accept_ops[g]
            t = 0.0
            for a in range(d):
                for b in range(d):
                    t += (mop[a, b] * sigma[b, a]).real
            totals[g] += weights[g] * t
        for a in range(d):
            for b in range(d):
                new[a, b] = 0j
        for j in range(nk):
            k = reject_kraus[j]
            for a in range(d):
                for b in range(d):
                    acc = 0j
                    for c in range(d):
                        acc += k[a, c] * sigma[c, b]
                    tmp[a, b] = acc
            for a in range(d):
                for b in range(d):
                    acc = 0j
                    for c in range(d):
                        acc += tmp[a, c] * k[b, c].conjugate()
                    new[a, b] += kraus_weights[j] * acc
        for a in range(d):
            for b in range(d):
                sigma[a, b] = new[a, b]
        done = r + 1
    surv = 0.0
    for a in range(d):
        surv += sigma[a, a].real
    return totals, surv, done


@nb.njit(cache=True, nogil=True)
def first_accept_cumulative(rho, accept_ops, weights, reject_kraus, kraus_weights, checkpoints):
    """Cumulative per-group first-accept probabilities after each checkpoint round.

    ``checkpoints`` must be non-decreasing round counts; row ``c`` of the
    result holds the totals over the first ``checkpoints[c]`` rounds.
    """
    d = rho.shape[0]
    ng = accept_ops.shape[0]
    nk = reject_kraus.shape[0]
    ncp = checkpoints.shape[0]
    out = np.zeros((ncp, ng))
    totals = np.zeros(ng)
    sigma = rho.copy()
    tmp = np.empty((d, d), dtype=np.complex128)
    new = np.empty((d, d), dtype=np.complex128)
    c = 0
    r = 0
    while c < ncp:
        while c < ncp and checkpoints[c] == r:
            for g in range(ng):
                out[c, g] = totals[g]
            c += 1
        if c >= ncp:
            break
        for g in range(ng):
            mop = accept_ops[g]
            t = 0.0
            for a in range(d):
                for b in range(d):
                    t += (mop[a, b] * sigma[b, a]).real
            totals[g] += weights[g] * t
        for a in range(d):
            for b in range(d):
                new[a, b] = 0j
        for j in range(nk):
            k = reject_kraus[j]
            for a in range(d):
                for b in range(d):
                    acc = 0j
                    for e in range(d):
                        acc += k[a, e] * sigma[e, b]
                    tmp[a, b] = acc
            for a in range(d):
                for b in range(d):
                    acc = 0j
                    for e in range(d):
                        acc += tmp[a, e] * k[b, e].conjugate()
                    new[a, b] += kraus_weights[j] * acc
        for a in range(d):
            for b in range(d):
                sigma[a, b] = new[a, b]
        r += 1
    return out
