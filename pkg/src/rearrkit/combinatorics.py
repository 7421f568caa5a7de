"""Level matrices, map statistics and the order-statistic event.

Indices are 0-based throughout.  Junge's statistic is usually written with
1-based ``r`` as ``sup_r Card{i : j_i <= r} / r``; shifting both the map
values and ``r`` down by one gives ``sup_r Card{k : l_k <= r} / (r + 1)``
with ``r = 0 .. n-1``, which is what is computed here.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .measure import (
    ENUMERATION_CAP,
    TAU_MASS,
    CapacityError,
    DiscreteDistribution,
    disjoint_sum,
    rearrangement_sequence,
)
from .spaces import OrliczFunction, SeqSpaceSpec, mixed_modular_exact, sequence_quasinorm_rows

__all__ = [
    "LevelMatrix",
    "build_level_matrix",
    "iter_maps",
    "c_of_l",
    "map_statistic",
    "junge_statistic",
    "junge_statistic_mc",
    "junge_profile",
    "step2_upper_check",
    "step3_domination_check",
    "xi_eta_probability",
    "xi_eta_construct",
    "permutation_matrix",
    "uniform_matrix",
    "random_doubly_stochastic",
]


@dataclass(frozen=True, eq=False)
class LevelMatrix:
    """Doubly stochastic matrix ``P[k, l]`` with the levels ``(mu(l, f))_{l=0..n}``."""

    n: int
    P: np.ndarray
    levels: np.ndarray | None = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.shape != (self.n, self.n):
            raise ValueError(f"expected a {self.n}x{self.n} matrix")
        if np.any(P < -TAU_MASS):
            raise ValueError("matrix entries must be nonnegative")
        if not (np.allclose(P.sum(axis=1), 1, atol=TAU_MASS)
                and np.allclose(P.sum(axis=0), 1, atol=TAU_MASS)):
            raise ValueError("matrix is not doubly stochastic")
        P = np.clip(P, 0.0, None)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)


def build_level_matrix(fs) -> LevelMatrix:
    """``P[k, l]`` = mass of ``f_k`` in the level band ``(mu(l+1, f), mu(l, f)]``.

    The disjoint sum is laid out along (0, n) as its decreasing rearrangement,
    equal values ordered by ``k``.  Band ``l`` is the slice ``[l, l+1)`` of that
    layout, so a value tied across several integer levels has its mass split
    in proportion to where it sits; rows and columns then sum to exactly 1.
    """
    n = len(fs)
    if n == 0:
        raise ValueError("need at least one function")
    padded = [f.with_zero_atom() for f in fs]
    for f in padded:
        if abs(f.total_mass - 1) > TAU_MASS:
            raise ValueError("functions must be unit-interval laws")
    V = np.concatenate([f.values for f in padded])
    M = np.concatenate([f.masses for f in padded])
    K = np.concatenate([np.full(len(f), k) for k, f in enumerate(padded)])
    order = np.lexsort((K, -V))
    M, K = M[order], K[order]
    ends = np.cumsum(M)
    starts = ends - M
    P = np.zeros((n, n))
    for s, e, k in zip(starts, ends, K):
        lo = min(int(math.floor(s)), n - 1)
        hi = min(int(math.ceil(e)), n)
        for l in range(lo, max(hi, lo + 1)):
            overlap = min(e, l + 1) - max(s, l)
            if overlap > 0:
                P[k, l] += overlap
    levels = rearrangement_sequence(disjoint_sum([f.nonzero() for f in fs]), n)
    return LevelMatrix(n, P, levels)


# ----------------------------------------------------------------------
# maps {0..n-1} -> {0..n-1}


def iter_maps(n: int, cap: int = ENUMERATION_CAP, chunk: int = 1 << 18):
    """Yield all ``n**n`` maps as integer arrays of shape ``(m, n)``."""
    total = n**n
    if total > cap:
        raise CapacityError(f"{total} maps exceed the cap {cap}; use sampling")
    radix = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (idx[:, None] // radix) % n


def _prefix_counts(maps: np.ndarray) -> np.ndarray:
    n = maps.shape[1]
    hist = (maps[:, :, None] == np.arange(n)).sum(axis=1)
    return np.cumsum(hist, axis=1)


def map_statistic(maps) -> np.ndarray:
    """``sup_r Card{k : l_k <= r} / (r + 1)`` row-wise."""
    maps = np.atleast_2d(maps)
    n = maps.shape[1]
    return (_prefix_counts(maps) / np.arange(1, n + 1)).max(axis=1)


def c_of_l(l) -> int:
    """``C(l) = ceil(sup_r Card{k : l_k <= r} / (r + 1))``, exact integer arithmetic."""
    l = np.asarray(l, dtype=np.int64)
    n = l.size
    if n == 0 or l.min() < 0 or l.max() >= n:
        raise ValueError("l must map {0..n-1} into itself")
    counts = _prefix_counts(l[None, :])[0]
    return int(max(-(-int(c) // (r + 1)) for r, c in enumerate(counts)))


def _c_rows(maps: np.ndarray) -> np.ndarray:
    n = maps.shape[1]
    counts = _prefix_counts(maps)
    r1 = np.arange(1, n + 1)
    return (-(-counts // r1)).max(axis=1)


def _weights(P: np.ndarray, maps: np.ndarray) -> np.ndarray:
    return np.prod(P[np.arange(P.shape[0]), maps], axis=1)


def _as_matrix(P) -> np.ndarray:
    return P.P if isinstance(P, LevelMatrix) else np.asarray(P, dtype=float)


def junge_statistic(P, p: float, cap: int = ENUMERATION_CAP) -> float:
    """Brute-force ``[sum_l stat(l)^p prod_k P[k, l_k]]^(1/p)`` over all maps."""
    if p < 1:
        raise ValueError("p must be >= 1")
    P = _as_matrix(P)
    n = P.shape[0]
    parts = [np.sum(_weights(P, m) * map_statistic(m) ** p) for m in iter_maps(n, cap)]
    return float(math.fsum(parts) ** (1.0 / p))


def junge_statistic_mc(P, p: float, rng: np.random.Generator, samples: int = 100_000):
    """Sampled version for large ``n``: draw ``l_k`` from row ``k``.

    Returns ``(estimate, stderr)``.
    """
    P = _as_matrix(P)
    n = P.shape[0]
    cdf = np.cumsum(P, axis=1)
    u = rng.random((samples, n))
    maps = np.minimum((u[:, :, None] > cdf[None, :, :]).sum(axis=2), n - 1)
    vals = map_statistic(maps) ** p
    mean = vals.mean()
    se = vals.std(ddof=1) / math.sqrt(samples)
    return mean ** (1.0 / p), se * mean ** (1.0 / p - 1.0) / p


def junge_profile(P, ps) -> list[tuple[float, float, float]]:
    """Rows ``(p, statistic, statistic / (p / (1 + log p)))``."""
    rows = []
    for p in ps:
        s = junge_statistic(P, p)
        rows.append((float(p), s, s / (p / (1.0 + math.log(p)))))
    return rows


# ----------------------------------------------------------------------
# the two combinatorial steps of the vector p-estimate


def step2_upper_check(fs, E: SeqSpaceSpec, p: float, cap: int = ENUMERATION_CAP):
    """Both sides of ``int ||(f_k)||_E^p <= sum_l ||(a_{l_k})||_E^p prod P[k, l_k]``.

    Returns ``(lhs, rhs)`` with ``a_k = mu(k, f)``.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    lm = build_level_matrix(fs)
    a = lm.levels[: lm.n]
    lhs = mixed_modular_exact(OrliczFunction.power(p), E, fs, cap)
    parts = [
        np.sum(sequence_quasinorm_rows(E, a[m]) ** p * _weights(lm.P, m))
        for m in iter_maps(lm.n, cap)
    ]
    return lhs, math.fsum(parts)


def step3_domination_check(a, cap: int = ENUMERATION_CAP) -> int:
    """Count maps ``l`` violating ``mu((a_{l_k})_k) <= sigma_{C(l)} a``.

    ``a`` must be non-increasing; the comparison is between stored floats,
    so the check is exact.
    """
    a = np.asarray(a, dtype=float)
    if np.any(np.diff(a) > 0):
        raise ValueError("a must be non-increasing")
    n = a.size
    j = np.arange(n)
    failures = 0
    for m in iter_maps(n, cap):
        b = -np.sort(-a[m], axis=1)
        C = _c_rows(m)
        dil = a[j[None, :] // C[:, None]]
        failures += int(np.any(b > dil, axis=1).sum())
    return failures


# ----------------------------------------------------------------------
# the order-statistic event


def xi_eta_probability(P, x, cap: int = ENUMERATION_CAP) -> float:
    """Exact ``m{eta_k >= x_{4k-3} for all 1 <= k <= floor((n+3)/4)}``.

    ``xi_k`` independent with ``P(xi_k = x[l+1]) = P[k, l]``; ``x`` holds
    ``x_0 >= x_1 >= ... >= x_n``.  Since ``eta_k >= y`` iff at least ``k`` of
    the ``xi`` reach ``y``, each ``xi_k`` only matters through the first
    threshold it reaches; the product space of those bands is enumerated
    exhaustively (or, past ``cap``, by an exact dynamic program).
    """
    P = _as_matrix(P)
    x = np.asarray(x, dtype=float)
    n = P.shape[0]
    if x.size != n + 1 or np.any(np.diff(x) > 0):
        raise ValueError("x must be a non-increasing array of length n + 1")
    K = (n + 3) // 4
    thresholds = x[4 * np.arange(1, K + 1) - 3]
    column_values = x[1:]
    reach = column_values[:, None] >= thresholds[None, :]
    band = np.where(reach.any(axis=1), reach.argmax(axis=1), K)
    q = np.zeros((n, K + 1))
    for l in range(n):
        q[:, band[l]] += P[:, l]
    if (K + 1) ** n <= cap:
        total = []
        for combo in _band_chunks(n, K + 1):
            counts = np.stack([(combo <= k).sum(axis=1) for k in range(K)], axis=1)
            ok = np.all(counts >= np.arange(1, K + 1), axis=1)
            w = np.prod(q[np.arange(n), combo], axis=1)
            total.append(np.sum(w[ok]))
        return float(math.fsum(total))
    return _xi_eta_dp(q, K)


def _band_chunks(n, base, chunk=1 << 18):
    total = base**n
    radix = base ** np.arange(n - 1, -1, -1, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        yield (idx[:, None] // radix) % base


def _xi_eta_dp(q: np.ndarray, K: int) -> float:
    # state: counts of variables in bands <= k, capped at k+1
    states = {tuple([0] * K): 1.0}
    for row in q:
        nxt: dict[tuple, float] = {}
        for st, w in states.items():
            for b, pb in enumerate(row):
                if pb == 0:
                    continue
                new = tuple(min(c + (b <= k), k + 1) for k, c in enumerate(st))
                nxt[new] = nxt.get(new, 0.0) + w * pb
        states = nxt
    target = tuple(range(1, K + 1))
    return math.fsum(w for st, w in states.items() if st == target)


def xi_eta_construct(fs, x=None) -> float:
    """Round each ``f_k`` down to the level grid ``x_l = mu(l, f)`` and return
    the probability of the order-statistic event for the resulting ``xi_k``.
    """
    lm = build_level_matrix(fs)
    if x is not None and not np.allclose(np.asarray(x, dtype=float), lm.levels):
        raise ValueError("x must be the level sequence mu(l, f), l = 0..n")
    return xi_eta_probability(lm.P, lm.levels)


# ----------------------------------------------------------------------
# matrix families


def permutation_matrix(perm) -> np.ndarray:
    perm = np.asarray(perm)
    P = np.zeros((perm.size, perm.size))
    P[np.arange(perm.size), perm] = 1.0
    return P


def uniform_matrix(n: int) -> np.ndarray:
    return np.full((n, n), 1.0 / n)


def random_doubly_stochastic(n: int, rng: np.random.Generator, terms: int | None = None):
    """Random convex combination of permutation matrices."""
    terms = terms or n
    w = rng.dirichlet(np.ones(terms))
    P = sum(wi * permutation_matrix(rng.permutation(n)) for wi in w)
    return P
