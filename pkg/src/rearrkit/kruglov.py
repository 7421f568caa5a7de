"""The Kruglov operator on laws: exact (truncated) and sampled.

``Kf`` is a compound-Poisson(1) sum of independent copies of ``f``: with
probability ``1/(e n!)`` it is the sum of ``n`` independent draws.  Thinning
the zero part of ``f`` gives the same law as a compound-Poisson(lambda) sum of
the nonzero atoms, ``lambda = m(supp f)``, which is what the exact
computation convolves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .measure import (
    ENUMERATION_CAP,
    TAU_MASS,
    Ambient,
    CapacityError,
    DiscreteDistribution,
    merge_atoms,
    quantile_transform,
    rearrangement_dominated,
    disjoint_sum,
    sum_of_independent,
)
from .spaces import OrliczFunction, PsiTable, lp_norm, orlicz_modular

__all__ = [
    "DEFAULT_TRUNCATION",
    "KruglovLaw",
    "kruglov_distribution",
    "kruglov_sample",
    "kruglov_samples",
    "poisson_tail_bound",
    "psi_table",
    "psi_asymptotic",
    "poisson_moment_profile",
    "modular_bound_constant",
    "ModularBound",
    "kruglov_modular_bound_check",
    "sum_vs_kruglov_check",
]

DEFAULT_TRUNCATION = 17


def poisson_tail_bound(n_max: int) -> float:
    """``sum_{n > n_max} 1/(e n!)``."""
    total, n = 0.0, n_max + 1
    term = math.exp(-1.0 - math.lgamma(n + 1))
    while term > 1e-300 and n < n_max + 400:
        total += term
        n += 1
        term /= n
    return total


@dataclass(frozen=True)
class KruglovLaw:
    base: DiscreteDistribution
    truncation: int
    law: DiscreteDistribution
    tail_mass_bound: float
    coarsened: bool = False


def _coarsen_down(values, masses, max_atoms):
    """Merge atoms onto a geometric grid, each group taking its *smallest* value.

    The result is stochastically dominated by the input, so it can only make
    a lower bound on ``Kf`` weaker, never wrong.
    """
    rel = 1e-9
    while values.size > max_atoms:
        pos = values > 0
        keys = np.full(values.size, np.iinfo(np.int64).min, dtype=np.int64)
        keys[pos] = np.floor(np.log(values[pos]) / math.log1p(rel)).astype(np.int64)
        uniq, inv = np.unique(keys, return_inverse=True)
        lo = np.full(uniq.size, np.inf)
        np.minimum.at(lo, inv, values)
        mass = np.zeros(uniq.size)
        np.add.at(mass, inv, masses)
        values, masses = merge_atoms(lo, mass, 0.0)
        rel *= 10
    return values, masses


def kruglov_distribution(f: DiscreteDistribution, N: int = DEFAULT_TRUNCATION,
                         cap: int = ENUMERATION_CAP, max_atoms: int | None = None) -> KruglovLaw:
    """Law of ``Kf`` keeping the terms with at most ``N`` nonzero summands.

    Parameters
    ----------
    f : DiscreteDistribution
        Unit-interval law.
    N : int
        Truncation of the Poisson count.
    cap : int
        Largest intermediate convolution allowed before :class:`CapacityError`.
    max_atoms : int, optional
        If given, intermediate convolutions larger than this are coarsened
        downward (see :func:`_coarsen_down`) instead of raising.
    """
    if f.ambient is not Ambient.UNIT:
        raise ValueError("Kruglov operator acts on unit-interval laws")
    if N < 1:
        raise ValueError("truncation must be at least 1")
    jumps = f.nonzero()
    lam = jumps.total_mass
    tail = poisson_tail_bound(N)
    if lam == 0:
        law = DiscreteDistribution.from_atoms([(0.0, 1.0)])
        return KruglovLaw(f, N, law, tail)
    jv, jm = jumps.values, jumps.masses / lam
    weight = math.exp(-lam)
    out_v, out_m = [np.zeros(1)], [np.array([weight])]
    conv_v, conv_m = np.zeros(1), np.ones(1)
    coarsened = False
    for j in range(1, N + 1):
        if conv_v.size * jv.size > cap:
            raise CapacityError(
                f"{conv_v.size * jv.size} atoms in the {j}-fold convolution exceed {cap}"
            )
        conv_v, conv_m = merge_atoms(np.add.outer(conv_v, jv), np.multiply.outer(conv_m, jm))
        if max_atoms is not None and conv_v.size > max_atoms:
            conv_v, conv_m = _coarsen_down(conv_v, conv_m, max_atoms)
            coarsened = True
        weight *= lam / j
        out_v.append(conv_v)
        out_m.append(conv_m * weight)
    law = DiscreteDistribution.from_arrays(np.concatenate(out_v), np.concatenate(out_m))
    return KruglovLaw(f, N, law, tail, coarsened)


def kruglov_samples(f: DiscreteDistribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` independent draws of ``Kf``."""
    counts = rng.poisson(1.0, size=size)
    draws = quantile_transform(f, rng.random(int(counts.sum())))
    owner = np.repeat(np.arange(size), counts)
    return np.bincount(owner, weights=draws, minlength=size)


def kruglov_sample(f: DiscreteDistribution, rng: np.random.Generator) -> float:
    """One draw of ``Kf``: a Poisson(1) count of independent draws of ``f``, summed."""
    n = rng.poisson(1.0)
    return float(quantile_transform(f, rng.random(n)).sum()) if n else 0.0


# ----------------------------------------------------------------------
# the Poisson profile of K chi_(0,1)


def _indicator() -> DiscreteDistribution:
    return DiscreteDistribution.constant(1.0, 1.0)


def psi_table(N: int = DEFAULT_TRUNCATION, knots: int = 0) -> PsiTable:
    """``psi(t) = int_0^t mu(s, K chi_(0,1)) ds`` as an exact piecewise-linear table.

    Breakpoints sit at the tail probabilities of the Poisson(1) law.  ``knots``
    extra log-spaced abscissae in [1e-12, 1] are inserted (values stay exact,
    since psi is linear between breakpoints).
    """
    if N < 1 or knots < 0:
        raise ValueError("need N >= 1 and knots >= 0")
    law = kruglov_distribution(_indicator(), N).law
    extra = np.geomspace(1e-12, 1.0, knots) if knots else ()
    return PsiTable.from_distribution(law, extra)


def psi_asymptotic(t):
    """Comparison profile ``t log(1/t) / log(e log(1/t))`` on (0, 1/e)."""
    t = np.asarray(t, dtype=float)
    L = np.log(1.0 / t)
    return t * L / np.log(np.e * L)


def poisson_moment_profile(p_grid, N: int = DEFAULT_TRUNCATION):
    """Rows ``(p, ||K chi||_p, p / log(ep))`` for ``p`` in ``p_grid``."""
    law = kruglov_distribution(_indicator(), max(N, 60)).law
    rows = []
    for p in p_grid:
        if not 1 <= p <= 50:
            raise ValueError("p must lie in [1, 50]")
        rows.append((float(p), lp_norm(law, p), p / math.log(math.e * p)))
    return rows


# ----------------------------------------------------------------------
# modular bound with the explicit constant


def modular_bound_constant(delta2_constant: float) -> tuple[float, float]:
    """Return ``(c, sum_{m>=1} m^(c+1) / (e m!))`` with ``c = 2 log2 C``."""
    c = 2.0 * math.log2(delta2_constant)
    terms = []
    m = 1
    while True:
        term = math.exp((c + 1) * math.log(m) - 1.0 - math.lgamma(m + 1))
        terms.append(term)
        if m > c + 10 and term < 1e-18 * math.fsum(terms):
            break
        m += 1
    return c, math.fsum(terms)


class ModularBound(NamedTuple):
    lhs: float
    rhs_constant: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-300


def kruglov_modular_bound_check(psi_fn: OrliczFunction, f: DiscreteDistribution,
                                N: int = DEFAULT_TRUNCATION) -> ModularBound:
    """``int Psi(Kf)`` against ``(sum_m m^(c+1)/(e m!)) int Psi(f)``."""
    if psi_fn.delta2_constant is None:
        raise ValueError("Psi needs a certified Delta_2 constant")
    _, const = modular_bound_constant(psi_fn.delta2_constant)
    base = orlicz_modular(psi_fn, f)
    if base == 0:
        return ModularBound(0.0, const, 0.0)
    lhs = orlicz_modular(psi_fn, kruglov_distribution(f, N).law)
    return ModularBound(lhs, const, const * base)


def sum_vs_kruglov_check(fs, N: int = DEFAULT_TRUNCATION, max_atoms: int = 4096):
    """Check ``mu(sum_k f_k) <= 3 sigma_3 mu(Kf)`` for ``f`` the disjoint sum.

    Needs nonnegative unit-interval laws whose supports have total measure at
    most 1.  Returns ``(holds, worst_slack)``; the Kruglov side may be
    coarsened downward, which only makes the check stricter.
    """
    if not fs:
        raise ValueError("need at least one function")
    supp = math.fsum(f.support_mass for f in fs)
    if supp > 1 + TAU_MASS:
        raise ValueError(f"supports have total measure {supp} > 1")
    total = sum_of_independent(fs)
    f = disjoint_sum([g.nonzero() for g in fs])
    if not len(f):
        return True, 0.0
    kf = kruglov_distribution(f.as_unit(), N, max_atoms=max_atoms).law
    return rearrangement_dominated(total, kf, factor=3.0, dilation=3.0)
