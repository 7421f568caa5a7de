"""Exact arithmetic on discrete distributions.

A :class:`DiscreteDistribution` stands for the equimeasurability class of a
nonnegative measurable function: finitely many ``(value, mass)`` atoms on
either the unit interval (the rest filled by the value 0) or the half line
(0 outside a set of finite measure).  Everything downstream -- norms,
modulars, Kruglov laws, the inequality checks -- only ever looks at these laws.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "TAU_VAL",
    "TAU_MASS",
    "ENUMERATION_CAP",
    "CapacityError",
    "Ambient",
    "DiscreteDistribution",
    "as_sequence",
    "sequence_rearrangement",
    "distribution_function",
    "rearrangement",
    "rearrangement_sequence",
    "quantile_transform",
    "disjoint_sum",
    "dilate",
    "dilate_sequence",
    "power",
    "scale",
    "split_at_level",
    "restrict_head",
    "sum_of_independent",
    "max_of_independent",
    "product_atoms",
    "rearrangement_dominated",
    "merge_atoms",
]

TAU_VAL = 1e-12
TAU_MASS = 1e-9
ENUMERATION_CAP = 10**7


class CapacityError(RuntimeError):
    """Exact enumeration would exceed :data:`ENUMERATION_CAP`; use Monte Carlo."""


class Ambient(str, enum.Enum):
    UNIT = "unit"
    HALFLINE = "halfline"


def merge_atoms(values, masses, tol: float = TAU_VAL):
    """Sort atoms by decreasing value and merge values closer than ``tol``.

    Closeness is relative above 1 and absolute below.  A merged group keeps
    the value of its largest member and the summed mass.  Zero masses are
    dropped.
    """
    values = np.asarray(values, dtype=float).ravel()
    masses = np.asarray(masses, dtype=float).ravel()
    keep = masses > 0
    values, masses = values[keep], masses[keep]
    if values.size == 0:
        return np.empty(0), np.empty(0)
    order = np.argsort(-values, kind="stable")
    values, masses = values[order], masses[order]
    gaps = values[:-1] - values[1:]
    new_group = gaps > tol * np.maximum(1.0, np.abs(values[:-1]))
    starts = np.concatenate(([0], np.flatnonzero(new_group) + 1))
    return values[starts], np.add.reduceat(masses, starts)


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Law of a nonnegative function with finitely many atoms.

    Parameters
    ----------
    values : array_like
        Atom values, strictly decreasing, all >= 0.
    masses : array_like
        Atom masses, all > 0.
    ambient : Ambient
        ``UNIT`` for functions on (0, 1) -- total mass at most 1 with the
        remainder implicitly carrying the value 0 -- or ``HALFLINE`` for
        functions on (0, inf).

    Use :meth:`from_atoms` to build one from unsorted, possibly repeated
    atoms; the constructor itself only validates.
    """

    values: np.ndarray
    masses: np.ndarray
    ambient: Ambient = Ambient.UNIT

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        m = np.array(self.masses, dtype=float).ravel()
        if v.shape != m.shape:
            raise ValueError("values and masses must have the same length")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(m))):
            raise ValueError("atoms must be finite")
        if np.any(v < 0):
            raise ValueError("atom values must be nonnegative")
        if np.any(m <= 0):
            raise ValueError("atom masses must be positive")
        if np.any(np.diff(v) >= 0):
            raise ValueError("atom values must be strictly decreasing")
        ambient = Ambient(self.ambient)
        if ambient is Ambient.UNIT and math.fsum(m) > 1 + TAU_MASS:
            raise ValueError(f"unit-interval law has total mass {math.fsum(m)} > 1")
        v.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "ambient", ambient)

    @classmethod
    def from_atoms(cls, atoms: Iterable[Sequence[float]], ambient="unit", tol=TAU_VAL):
        atoms = [tuple(a) for a in atoms]
        if not atoms:
            return cls(np.empty(0), np.empty(0), Ambient(ambient))
        values, masses = zip(*atoms)
        return cls.from_arrays(values, masses, ambient, tol)

    @classmethod
    def from_arrays(cls, values, masses, ambient="unit", tol=TAU_VAL):
        """Sort and merge raw atoms; zero masses are dropped, negative ones rejected."""
        values = np.asarray(values, dtype=float)
        masses = np.asarray(masses, dtype=float)
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(masses))):
            raise ValueError("atoms must be finite")
        if np.any(masses < 0) or np.any(values < 0):
            raise ValueError("atom values and masses must be nonnegative")
        v, m = merge_atoms(values, masses, tol)
        return cls(v, m, Ambient(ambient))

    @classmethod
    def constant(cls, value: float, mass: float = 1.0, ambient="unit"):
        return cls.from_atoms([(value, mass)], ambient)

    @classmethod
    def zero(cls, ambient="unit"):
        return cls(np.empty(0), np.empty(0), Ambient(ambient))

    # ------------------------------------------------------------------
    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.masses.tolist()))

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    @property
    def support_mass(self) -> float:
        """Measure of the set where the function is nonzero."""
        return math.fsum(self.masses[self.values > 0])

    @property
    def max_value(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"DiscreteDistribution({self.atoms!r}, ambient={self.ambient.value!r})"

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return (
            self.ambient is other.ambient
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.masses, other.masses)
        )

    __hash__ = None

    def isclose(self, other: "DiscreteDistribution", rtol=1e-12, atol=1e-12) -> bool:
        """Atom-wise comparison ignoring explicit zero atoms."""
        a, b = self.nonzero(), other.nonzero()
        return (
            len(a) == len(b)
            and np.allclose(a.values, b.values, rtol=rtol, atol=atol)
            and np.allclose(a.masses, b.masses, rtol=rtol, atol=atol)
        )

    def nonzero(self) -> "DiscreteDistribution":
        keep = self.values > 0
        return DiscreteDistribution(self.values[keep], self.masses[keep], self.ambient)

    def with_zero_atom(self) -> "DiscreteDistribution":
        """Materialize the implicit zero atom of a unit-interval law."""
        if self.ambient is not Ambient.UNIT:
            raise ValueError("only unit-interval laws carry an implicit zero atom")
        rest = 1.0 - self.total_mass
        if rest <= 0:
            return self
        return DiscreteDistribution.from_arrays(
            np.append(self.values, 0.0), np.append(self.masses, rest), Ambient.UNIT
        )

    def as_unit(self) -> "DiscreteDistribution":
        """Reinterpret a half-line law of total mass <= 1 as living on (0, 1)."""
        return DiscreteDistribution(self.values, self.masses, Ambient.UNIT)

    def as_halfline(self) -> "DiscreteDistribution":
        return DiscreteDistribution(self.values, self.masses, Ambient.HALFLINE)

    def mean(self) -> float:
        return math.fsum(self.values * self.masses)

    def moment(self, p: float) -> float:
        return math.fsum(self.values**p * self.masses)

    def cumulative_masses(self) -> np.ndarray:
        return np.cumsum(self.masses)

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"ambient": self.ambient.value, "atoms": [list(a) for a in self.atoms]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteDistribution":
        try:
            ambient = data.get("ambient", "unit")
            atoms = data["atoms"]
        except (AttributeError, KeyError) as exc:
            raise ValueError(f"malformed distribution: {data!r}") from exc
        return cls.from_atoms(atoms, ambient)

    @classmethod
    def from_json(cls, text: str) -> "DiscreteDistribution":
        return cls.from_dict(json.loads(text))


# ----------------------------------------------------------------------
# sequences


def as_sequence(a) -> np.ndarray:
    """Validate a finite nonnegative sequence and return it as a float array."""
    arr = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(arr)):
        raise ValueError("sequence entries must be finite")
    if np.any(arr < 0):
        raise ValueError("sequence entries must be nonnegative")
    return arr


def sequence_rearrangement(a) -> np.ndarray:
    """Decreasing rearrangement ``(mu(k, a))_k`` of a finite sequence."""
    return np.sort(as_sequence(a))[::-1]


def dilate_sequence(a, m: int) -> np.ndarray:
    """Repeat each entry ``m`` times: entry ``a_j`` lands at ``jm .. jm+m-1``."""
    if int(m) != m or m < 1:
        raise ValueError(f"dilation factor must be a positive integer, got {m}")
    return np.repeat(as_sequence(a), int(m))


# ----------------------------------------------------------------------
# distribution functions and rearrangements


def distribution_function(d: DiscreteDistribution, s: float) -> float:
    """Measure of ``{f > s}``."""
    if s < 0:
        raise ValueError(f"distribution function needs s >= 0, got {s}")
    return math.fsum(d.masses[d.values > s])


def rearrangement(d: DiscreteDistribution, t: float) -> float:
    """Right-continuous decreasing rearrangement ``mu(t, f)`` at ``t > 0``."""
    if not t > 0:
        raise ValueError(f"rearrangement needs t > 0, got {t}")
    cum = d.cumulative_masses()
    i = int(np.searchsorted(cum, t, side="right"))
    return float(d.values[i]) if i < len(d) else 0.0


def quantile_transform(d: DiscreteDistribution, u) -> np.ndarray:
    """``mu(u, f)`` elementwise; for ``u`` uniform on (0, 1) this has the law of ``f``."""
    cum = d.cumulative_masses()
    idx = np.searchsorted(cum, np.asarray(u, dtype=float), side="right")
    return np.append(d.values, 0.0)[np.minimum(idx, len(d))]


def _rearrangement_many(d: DiscreteDistribution, ts) -> np.ndarray:
    cum = d.cumulative_masses()
    idx = np.searchsorted(cum, np.asarray(ts, dtype=float), side="right")
    padded = np.append(d.values, 0.0)
    return padded[np.minimum(idx, len(d))]


def rearrangement_sequence(d: DiscreteDistribution, k_max: int) -> np.ndarray:
    """``(mu(k, f))_{k=0..k_max}`` with ``mu(0, f)`` the essential supremum."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    out = np.empty(int(k_max) + 1)
    out[0] = d.max_value
    if k_max:
        out[1:] = _rearrangement_many(d, np.arange(1, int(k_max) + 1))
    return out


def restrict_head(d: DiscreteDistribution, length: float = 1.0) -> DiscreteDistribution:
    """Law of ``mu(f) * chi_(0, length)``, as a unit-interval law when length <= 1."""
    cum = d.cumulative_masses()
    k = int(np.searchsorted(cum, length, side="left"))
    values = d.values[: k + 1]
    masses = d.masses[: k + 1].copy()
    if k < len(d):
        masses[-1] = length - (cum[k - 1] if k else 0.0)
    keep = masses > 0
    ambient = Ambient.UNIT if length <= 1 else d.ambient
    return DiscreteDistribution(values[keep], masses[keep], ambient)


# ----------------------------------------------------------------------
# constructions


def disjoint_sum(ds: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    """Law of the disjoint sum on (0, inf): distribution functions add up."""
    if not ds:
        raise ValueError("disjoint_sum needs at least one distribution")
    values = np.concatenate([d.values for d in ds])
    masses = np.concatenate([d.masses for d in ds])
    return DiscreteDistribution.from_arrays(values, masses, Ambient.HALFLINE)


def dilate(d: DiscreteDistribution, s: float) -> DiscreteDistribution:
    """Dilation ``sigma_s``: stretch the time axis, i.e. multiply every mass by ``s``."""
    if not s > 0:
        raise ValueError(f"dilation needs s > 0, got {s}")
    ambient = d.ambient if s <= 1 else Ambient.HALFLINE
    return DiscreteDistribution(d.values, d.masses * s, ambient)


def power(d: DiscreteDistribution, p: float) -> DiscreteDistribution:
    if not p > 0:
        raise ValueError(f"power needs p > 0, got {p}")
    if p == 1:
        return d
    return DiscreteDistribution.from_arrays(d.values**p, d.masses, d.ambient)


def scale(d: DiscreteDistribution, c: float) -> DiscreteDistribution:
    """Law of ``c * f``; ``c = 0`` gives the zero function."""
    if c < 0:
        raise ValueError("scale factor must be nonnegative")
    if c == 0:
        return DiscreteDistribution.zero(d.ambient)
    return DiscreteDistribution.from_arrays(d.values * c, d.masses, d.ambient)


def split_at_level(d: DiscreteDistribution, c: float):
    """Split into ``f chi_{f > c}`` and ``f chi_{f <= c}`` (nonzero atoms only)."""
    if c < 0:
        raise ValueError("level must be nonnegative")
    hi = d.values > c
    lo = ~hi & (d.values > 0)
    head = DiscreteDistribution(d.values[hi], d.masses[hi], d.ambient)
    tail = DiscreteDistribution(d.values[lo], d.masses[lo], d.ambient)
    return head, tail


# ----------------------------------------------------------------------
# product-space laws


def _require_unit(ds):
    for d in ds:
        if d.ambient is not Ambient.UNIT:
            raise ValueError("independent families must live on the unit interval")


def _padded_counts(ds) -> int:
    return math.prod(len(d.with_zero_atom()) for d in ds)


def sum_of_independent(
    ds: Sequence[DiscreteDistribution], cap: int = ENUMERATION_CAP
) -> DiscreteDistribution:
    """Exact law of ``f_0(w_0) + ... + f_{n-1}(w_{n-1})`` under the product measure."""
    if not ds:
        raise ValueError("need at least one distribution")
    _require_unit(ds)
    if _padded_counts(ds) > cap:
        raise CapacityError(
            f"{_padded_counts(ds)} product atoms exceed the cap {cap}; use Monte Carlo"
        )
    padded = [d.with_zero_atom() for d in ds]
    values, masses = padded[0].values, padded[0].masses
    for d in padded[1:]:
        values, masses = merge_atoms(
            np.add.outer(values, d.values), np.multiply.outer(masses, d.masses)
        )
    return DiscreteDistribution(values, masses, Ambient.UNIT)


def max_of_independent(ds: Sequence[DiscreteDistribution]) -> DiscreteDistribution:
    """Exact law of ``max_k f_k`` via ``P(max > v) = 1 - prod_k (1 - P(f_k > v))``."""
    if not ds:
        raise ValueError("need at least one distribution")
    _require_unit(ds)
    grid, _ = merge_atoms(np.concatenate([d.values for d in ds] + [[0.0]]),
                          np.ones(sum(len(d) for d in ds) + 1))
    # at = P(max <= v), below = P(max < v)
    below = np.ones(grid.size)
    at = np.ones(grid.size)
    for d in ds:
        cum = np.concatenate(([0.0], d.cumulative_masses()))
        # mass of atoms with value >= v and > v
        ge = cum[np.searchsorted(-d.values, -grid, side="right")]
        gt = cum[np.searchsorted(-d.values, -grid, side="left")]
        below *= 1.0 - ge
        at *= 1.0 - gt
    below[grid == 0] = 0.0
    masses = at - below  # P(max <= v) - P(max < v)
    masses = np.where(masses > 0, masses, 0.0)
    return DiscreteDistribution.from_arrays(grid, masses, Ambient.UNIT)


def product_atoms(ds: Sequence[DiscreteDistribution], cap: int = ENUMERATION_CAP,
                  chunk: int = 1 << 18):
    """Iterate over the product space of unit-interval laws in chunks.

    Yields ``(points, weights)`` where ``points`` has shape ``(m, n)`` holding
    the coordinate values ``(f_k(w_k))_k`` and ``weights`` the product masses.
    Zero atoms are materialized so the weights of all chunks sum to 1.
    """
    _require_unit(ds)
    padded = [d.with_zero_atom() for d in ds]
    sizes = [len(d) for d in padded]
    total = math.prod(sizes)
    if total > cap:
        raise CapacityError(f"{total} product atoms exceed the cap {cap}; use Monte Carlo")
    n = len(padded)
    # split the coordinates: the leading ones are iterated, the trailing block is a grid
    tail_len, block = n, 1
    while tail_len > 0 and block * sizes[tail_len - 1] <= chunk:
        tail_len -= 1
        block *= sizes[tail_len]
    tail = padded[tail_len:]
    if tail:
        tidx = np.indices([len(d) for d in tail]).reshape(len(tail), -1)
        tvals = np.stack([d.values[i] for d, i in zip(tail, tidx)], axis=1)
        tw = np.prod(np.stack([d.masses[i] for d, i in zip(tail, tidx)], axis=1), axis=1)
    else:
        tvals, tw = np.empty((1, 0)), np.ones(1)
    for head in itertools.product(*(range(s) for s in sizes[:tail_len])):
        hv = np.array([padded[k].values[i] for k, i in enumerate(head)])
        hw = math.prod(padded[k].masses[i] for k, i in enumerate(head))
        pts = np.hstack([np.broadcast_to(hv, (tvals.shape[0], hv.size)), tvals])
        yield pts, tw * hw


# ----------------------------------------------------------------------
# rearrangement inequalities


def rearrangement_dominated(
    lower: DiscreteDistribution,
    upper: DiscreteDistribution,
    factor: float = 1.0,
    dilation: float = 1.0,
    mass_tol: float = 1e-12,
) -> tuple[bool, float]:
    """Check ``mu(lower) <= factor * sigma_dilation mu(upper)`` pointwise.

    Uses the equivalent distribution-function form
    ``d_lower(s) <= dilation * d_upper(s / factor)`` for all ``s >= 0``.  Both
    sides are right-continuous step functions, so it suffices to compare
    them at the left end of every interval between consecutive jump points.
    Intervals shorter than ``TAU_VAL`` (relative) are skipped, so a lower
    value and a scaled upper value that agree up to rounding count as equal.
    Returns ``(holds, worst_slack)`` where the slack is the minimum of
    ``dilation * d_upper - d_lower`` over the compared points.
    """
    lv = lower.nonzero()
    uv = upper.nonzero()
    scaled = uv.values * factor
    points = np.unique(np.concatenate(([0.0], lv.values, scaled)))
    width = np.diff(points) > TAU_VAL * np.maximum(1.0, points[1:])
    points = points[np.append(width, True)]
    lcum = np.concatenate(([0.0], lv.cumulative_masses()))
    ucum = np.concatenate(([0.0], uv.cumulative_masses()))
    # mass strictly above s: atoms with -value < -s
    d_low = lcum[np.searchsorted(-lv.values, -points, side="left")]
    d_up = ucum[np.searchsorted(-scaled, -points, side="left")]
    slack = dilation * d_up - d_low
    worst = float(slack.min())
    return worst >= -mass_tol, worst
