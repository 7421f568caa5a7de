"""Quasi-norms and modulars of concrete symmetric spaces.

Sequence spaces ``E``: ``ell_q`` (any q > 0), ``ell_inf`` and weak ``ell_1``.
Function spaces ``X``: ``L_p``, ``L_p + L_q`` (through the disjointification
proxy), ``L_p cap L_q``, Luxemburg-normed Orlicz spaces and Marcinkiewicz
spaces.  All evaluators take laws (:class:`DiscreteDistribution`) or plain
arrays and are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .measure import (
    ENUMERATION_CAP,
    TAU_MASS,
    CapacityError,
    DiscreteDistribution,
    as_sequence,
    max_of_independent,
    power,
    product_atoms,
    rearrangement_sequence,
    restrict_head,
    sum_of_independent,
)

__all__ = [
    "OrliczFunction",
    "SeqSpaceSpec",
    "SpaceSpec",
    "PsiTable",
    "sequence_quasinorm",
    "sequence_quasinorm_rows",
    "function_quasinorm",
    "lp_norm",
    "luxemburg_norm",
    "marcinkiewicz_norm",
    "orlicz_modular",
    "rhs_theorem_main",
    "rhs_modular",
    "norm_law",
    "mixed_norm_exact",
    "mixed_modular_exact",
    "marcinkiewicz_sup_p_equiv",
]

_GRID = np.geomspace(1e-6, 1e6, 241)


# ----------------------------------------------------------------------
# Orlicz functions


@dataclass(frozen=True, eq=False)
class OrliczFunction:
    """Increasing function with ``Phi(0) = 0`` and a certified Delta_2 constant.

    Build through :meth:`power`, :meth:`power_log`, :meth:`tabulated` or
    :meth:`compose_root`.  ``delta2_constant`` is ``C`` with
    ``Phi(2t) <= C Phi(t)``; ``None`` means no certificate.
    """

    kind: str
    params: tuple
    delta2_constant: float | None
    _fn: Callable = field(repr=False, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self._fn(t)

    @classmethod
    def power(cls, p: float) -> "OrliczFunction":
        if not p > 0:
            raise ValueError("power exponent must be positive")
        p = float(p)
        return cls._checked("Power", (p,), 2.0**p, lambda t: t**p)

    @classmethod
    def power_log(cls, p: float, a: float) -> "OrliczFunction":
        """``t^p log(e + t)^a``; uses ``log(e+2t) <= log 2 + log(e+t)``."""
        if not p > 0 or a < 0:
            raise ValueError("need p > 0 and a >= 0")
        p, a = float(p), float(a)
        c = 2.0**p * (1.0 + math.log(2.0)) ** a
        return cls._checked("PowerLog", (p, a), c, lambda t: t**p * np.log(np.e + t) ** a)

    @classmethod
    def tabulated(cls, knots) -> "OrliczFunction":
        """Piecewise linear through ``(0, 0)`` and ``knots``, extended linearly."""
        arr = np.asarray(knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ValueError("tabulated Orlicz function needs [[t, phi], ...] knots")
        ts, ph = arr[:, 0], arr[:, 1]
        if ts[0] == 0:
            if ph[0] != 0:
                raise ValueError("Phi(0) must be 0")
            ts, ph = ts[1:], ph[1:]
        ts = np.concatenate(([0.0], ts))
        ph = np.concatenate(([0.0], ph))
        if np.any(np.diff(ts) <= 0) or np.any(np.diff(ph) <= 0):
            raise ValueError("knots must be strictly increasing in t and Phi")
        slope = (ph[-1] - ph[-2]) / (ts[-1] - ts[-2])

        def fn(t, ts=ts, ph=ph, slope=slope):
            out = np.interp(t, ts, ph)
            return np.where(t > ts[-1], ph[-1] + slope * (t - ts[-1]), out)

        # ratio Phi(2t)/Phi(t) is monotone between breakpoints of both sides
        cand = np.unique(np.concatenate((ts[1:], ts[1:] / 2)))
        ratio = fn(2 * cand) / fn(cand)
        c = float(max(2.0, ratio.max()))
        return cls._checked("Tabulated", tuple(map(tuple, arr.tolist())), c, fn)

    def compose_root(self, p: float) -> "OrliczFunction":
        """``t -> Phi(t^(1/p))`` with constant ``C_Phi^ceil(1/p)``."""
        if not p > 0:
            raise ValueError("p must be positive")
        if self.delta2_constant is None:
            raise ValueError("base function has no Delta_2 certificate")
        base = self
        c = self.delta2_constant ** math.ceil(1.0 / p - 1e-12)
        return OrliczFunction._checked(
            "Root", (self.params, self.kind, float(p)), c, lambda t: base(t ** (1.0 / p))
        )

    @classmethod
    def _checked(cls, kind, params, c, fn) -> "OrliczFunction":
        phi = cls(kind, params, c, fn)
        if phi(np.array(0.0)) != 0:
            raise ValueError("Phi(0) must be 0")
        vals = phi(_GRID)
        if np.any(np.diff(vals) <= 0):
            raise ValueError("Phi must be strictly increasing")
        if c is not None and np.any(phi(2 * _GRID) > c * vals * (1 + TAU_MASS)):
            raise ValueError(f"Delta_2 certificate {c} fails on the sample grid")
        return phi

    # ------------------------------------------------------------------
    def to_json(self):
        if self.kind == "Power":
            return {"Power": self.params[0]}
        if self.kind == "PowerLog":
            return {"PowerLog": list(self.params)}
        if self.kind == "Tabulated":
            return {"Tabulated": [list(k) for k in self.params]}
        raise ValueError(f"{self.kind} functions are not serializable")

    @classmethod
    def from_json(cls, obj) -> "OrliczFunction":
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ValueError(f"malformed Orlicz function: {obj!r}")
        (kind, arg), = obj.items()
        if kind == "Power":
            return cls.power(float(arg))
        if kind == "PowerLog":
            return cls.power_log(*map(float, arg))
        if kind == "Tabulated":
            return cls.tabulated(arg)
        raise ValueError(f"unknown Orlicz function kind {kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "Power":
            return f"t^{self.params[0]:g}"
        if self.kind == "PowerLog":
            return f"t^{self.params[0]:g}log^{self.params[1]:g}"
        return self.kind


# ----------------------------------------------------------------------
# Marcinkiewicz weight


@dataclass(frozen=True, eq=False)
class PsiTable:
    """Piecewise-linear concave increasing ``psi`` on [0, 1] given by knots."""

    t: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        psi = np.array(self.psi, dtype=float)
        if t.shape != psi.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("psi table needs matching 1-D knot arrays")
        if t[0] != 0 or psi[0] != 0:
            raise ValueError("psi table must start at (0, 0)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("knot abscissae must increase")
        if np.any(np.diff(psi) < -TAU_MASS * max(1.0, psi[-1])):
            raise ValueError("psi must be non-decreasing")
        slopes = np.diff(psi) / np.diff(t)
        if np.any(np.diff(slopes) > TAU_MASS * np.maximum(1.0, slopes[:-1])):
            raise ValueError("psi must be concave")
        t.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "psi", psi)

    def __call__(self, t):
        return np.interp(t, self.t, self.psi)

    def slopes(self) -> np.ndarray:
        return np.diff(self.psi) / np.diff(self.t)

    @classmethod
    def from_distribution(cls, d: DiscreteDistribution, extra=()) -> "PsiTable":
        """``psi(t) = int_0^t mu(s, f) ds`` for a unit-interval law ``f``."""
        head = restrict_head(d, 1.0)
        cum = np.concatenate(([0.0], head.cumulative_masses()))
        integ = np.concatenate(([0.0], np.cumsum(head.values * head.masses)))
        t = np.unique(np.concatenate((cum, [1.0], np.asarray(extra, dtype=float))))
        t = t[(t >= 0) & (t <= 1)]
        psi = np.interp(t, cum, integ)
        return cls(t, psi)


# ----------------------------------------------------------------------
# space descriptors


@dataclass(frozen=True)
class SeqSpaceSpec:
    """Symmetric sequence space with ``||e_k|| = 1``."""

    kind: str
    q: float | None = None

    def __post_init__(self):
        if self.kind == "ellq":
            if self.q is None or not self.q > 0:
                raise ValueError("ell_q needs q > 0")
            object.__setattr__(self, "q", float(self.q))
        elif self.kind in ("ellinfty", "weak_ell1"):
            object.__setattr__(self, "q", None)
        else:
            raise ValueError(f"unknown sequence space {self.kind!r}")

    @classmethod
    def ellq(cls, q: float) -> "SeqSpaceSpec":
        return cls("ellq", q)

    @classmethod
    def ellinfty(cls) -> "SeqSpaceSpec":
        return cls("ellinfty")

    @classmethod
    def weak_ell1(cls) -> "SeqSpaceSpec":
        return cls("weak_ell1")

    @property
    def concavity_modulus(self) -> float:
        if self.kind == "ellq":
            return max(1.0, 2.0 ** (1.0 / self.q - 1.0))
        return 1.0 if self.kind == "ellinfty" else 2.0

    @property
    def label(self) -> str:
        return f"ellq({self.q:g})" if self.kind == "ellq" else self.kind

    def to_json(self):
        return {"ellq": self.q} if self.kind == "ellq" else self.kind

    @classmethod
    def from_json(cls, obj) -> "SeqSpaceSpec":
        if isinstance(obj, str):
            return cls(obj)
        if isinstance(obj, dict) and len(obj) == 1:
            (kind, arg), = obj.items()
            return cls(kind, arg) if kind == "ellq" else cls(kind)
        raise ValueError(f"malformed sequence space: {obj!r}")


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    """Symmetric function space ``X``."""

    kind: str
    p: float | None = None
    q: float | None = None
    phi: OrliczFunction | None = None
    psi: PsiTable | None = None

    def __post_init__(self):
        k = self.kind
        if k == "Lp":
            _positive(self.p)
        elif k in ("LpPlusLq", "LpCapLq"):
            _positive(self.p)
            _positive(self.q)
            if k == "LpPlusLq" and self.p > self.q:
                raise ValueError("L_p + L_q needs p <= q")
            if k == "LpCapLq" and self.q > self.p:
                raise ValueError("L_p cap L_q needs q <= p")
        elif k == "OrliczLux":
            if self.phi is None:
                raise ValueError("Orlicz space needs Phi")
        elif k == "Marcinkiewicz":
            if self.psi is None:
                raise ValueError("Marcinkiewicz space needs psi")
        else:
            raise ValueError(f"unknown function space {k!r}")

    @classmethod
    def lp(cls, p):
        return cls("Lp", p=float(p))

    @classmethod
    def lp_plus_lq(cls, p, q):
        return cls("LpPlusLq", p=float(p), q=float(q))

    @classmethod
    def lp_cap_lq(cls, p, q):
        return cls("LpCapLq", p=float(p), q=float(q))

    @classmethod
    def orlicz(cls, phi: OrliczFunction):
        return cls("OrliczLux", phi=phi)

    @classmethod
    def marcinkiewicz(cls, psi: PsiTable):
        return cls("Marcinkiewicz", psi=psi)

    @property
    def label(self) -> str:
        if self.kind == "Lp":
            return f"Lp({self.p:g})"
        if self.kind in ("LpPlusLq", "LpCapLq"):
            return f"{self.kind}({self.p:g},{self.q:g})"
        if self.kind == "OrliczLux":
            return f"OrliczLux({self.phi.label})"
        return "Marcinkiewicz"

    def to_json(self):
        if self.kind == "Lp":
            return {"Lp": self.p}
        if self.kind in ("LpPlusLq", "LpCapLq"):
            return {self.kind: [self.p, self.q]}
        if self.kind == "OrliczLux":
            return {"OrliczLux": self.phi.to_json()}
        return {"Marcinkiewicz": {"knots": np.column_stack((self.psi.t, self.psi.psi)).tolist()}}

    @classmethod
    def from_json(cls, obj) -> "SpaceSpec":
        if not isinstance(obj, dict) or len(obj) != 1:
            raise ValueError(f"malformed function space: {obj!r}")
        (kind, arg), = obj.items()
        if kind == "Lp":
            return cls.lp(arg)
        if kind in ("LpPlusLq", "LpCapLq"):
            p, q = arg
            return cls(kind, p=float(p), q=float(q))
        if kind == "OrliczLux":
            return cls.orlicz(OrliczFunction.from_json(arg))
        if kind == "Marcinkiewicz":
            if isinstance(arg, dict) and "knots" in arg:
                knots = np.asarray(arg["knots"], dtype=float)
                return cls.marcinkiewicz(PsiTable(knots[:, 0], knots[:, 1]))
            from .kruglov import psi_table

            n = int(arg.get("N", 17)) if isinstance(arg, dict) else 17
            return cls.marcinkiewicz(psi_table(n))
        raise ValueError(f"unknown function space {kind!r}")


def _positive(x):
    if x is None or not x > 0:
        raise ValueError(f"exponent must be positive, got {x}")


# ----------------------------------------------------------------------
# sequence quasi-norms


def _ellq(a: np.ndarray, q: float, axis=-1):
    top = a.max(axis=axis, keepdims=True) if a.size else np.zeros(1)
    safe = np.where(top > 0, top, 1.0)
    s = np.sum((a / safe) ** q, axis=axis)
    return np.squeeze(safe, axis=axis) * s ** (1.0 / q)


def sequence_quasinorm(E: SeqSpaceSpec, a) -> float:
    a = as_sequence(a)
    if a.size == 0:
        return 0.0
    return float(sequence_quasinorm_rows(E, a[None, :])[0])


def sequence_quasinorm_rows(E: SeqSpaceSpec, rows: np.ndarray) -> np.ndarray:
    """Row-wise quasi-norm of a 2-D array of nonnegative sequences."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[1] == 0:
        return np.zeros(rows.shape[0])
    if E.kind == "ellq":
        return _ellq(rows, E.q, axis=1)
    if E.kind == "ellinfty":
        return rows.max(axis=1)
    mu = -np.sort(-rows, axis=1)
    return (mu * np.arange(1, rows.shape[1] + 1)).max(axis=1)


# ----------------------------------------------------------------------
# function quasi-norms


def lp_norm(d: DiscreteDistribution, p: float) -> float:
    if not len(d) or d.max_value == 0:
        return 0.0
    top = d.max_value
    return top * math.fsum(d.masses * (d.values / top) ** p) ** (1.0 / p)


def orlicz_modular(phi: OrliczFunction, d: DiscreteDistribution) -> float:
    """``int Phi(|f|)``."""
    if not len(d):
        return 0.0
    return math.fsum(d.masses * phi(d.values))


def luxemburg_norm(phi: OrliczFunction, d: DiscreteDistribution,
                   tol: float = 1e-10, max_iter: int = 200) -> float:
    """``inf{lam > 0 : int Phi(f / lam) <= 1}`` by bracketing and bisection."""
    d = d.nonzero()
    if not len(d):
        return 0.0

    def modular(lam):
        return math.fsum(d.masses * phi(d.values / lam))

    hi = d.max_value
    for _ in range(2000):
        if modular(hi) <= 1:
            break
        hi *= 2
    lo = hi
    for _ in range(2000):
        if modular(lo) > 1:
            break
        lo /= 2
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if modular(mid) > 1:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return hi


def marcinkiewicz_norm(psi: PsiTable, d: DiscreteDistribution) -> float:
    """``sup_{0 < t <= 1} int_0^t mu(f) / psi(t)``.

    Both numerator and denominator are piecewise linear, so the supremum is
    attained on the union of their breakpoints.
    """
    head = restrict_head(d.nonzero(), 1.0)
    if not len(head):
        return 0.0
    cum = np.concatenate(([0.0], head.cumulative_masses()))
    integ = np.concatenate(([0.0], np.cumsum(head.values * head.masses)))
    t = np.unique(np.concatenate((psi.t[1:], cum[1:], [1.0])))
    t = t[(t > 0) & (t <= 1)]
    num = np.interp(t, cum, integ)
    return float(np.max(num / psi(t)))


def function_quasinorm(X: SpaceSpec, d: DiscreteDistribution) -> float:
    """Quasi-norm of a function in ``X`` through its law.

    ``L_p + L_q`` is evaluated by the proxy
    ``||mu(f) chi_(0,1)||_p + ||(mu(k, f))_{k>=1}||_q``, which is equivalent
    to (not equal to) the infimal-convolution norm.
    """
    if X.kind == "Lp":
        return lp_norm(d, X.p)
    if X.kind == "LpPlusLq":
        k_max = max(1, math.ceil(d.support_mass - TAU_MASS))
        seq = rearrangement_sequence(d.nonzero(), k_max)[1:]
        return lp_norm(restrict_head(d, 1.0), X.p) + sequence_quasinorm(
            SeqSpaceSpec.ellq(X.q), seq
        )
    if X.kind == "LpCapLq":
        return max(lp_norm(d, X.p), lp_norm(d, X.q))
    if X.kind == "OrliczLux":
        return luxemburg_norm(X.phi, d)
    return marcinkiewicz_norm(X.psi, d)


# ----------------------------------------------------------------------
# deterministic right-hand sides


def _check_tail(f: DiscreteDistribution, k_max: int):
    if f.support_mass > k_max + TAU_MASS:
        raise ValueError(
            f"k_max={k_max} does not exhaust the support (measure {f.support_mass:g})"
        )


def rhs_theorem_main(X: SpaceSpec, E: SeqSpaceSpec, f: DiscreteDistribution,
                     k_max: int) -> float:
    """``||mu(f) chi_(0,1)||_X + ||(mu(k, f))_{k=1..k_max}||_E``."""
    _check_tail(f, k_max)
    seq = rearrangement_sequence(f.nonzero(), k_max)[1:]
    return function_quasinorm(X, restrict_head(f, 1.0)) + sequence_quasinorm(E, seq)


def rhs_modular(phi: OrliczFunction, E: SeqSpaceSpec, f: DiscreteDistribution,
                n: int) -> float:
    """``int_0^1 Phi(mu(t, f)) dt + Phi(||(mu(k, f))_{k=1..n}||_E)``."""
    _check_tail(f, n)
    seq = rearrangement_sequence(f.nonzero(), n)[1:]
    tail = float(phi(np.array(sequence_quasinorm(E, seq))))
    return orlicz_modular(phi, restrict_head(f, 1.0)) + tail


# ----------------------------------------------------------------------
# exact mixed norms of independent families


def norm_law(E: SeqSpaceSpec, fs: Sequence[DiscreteDistribution],
             cap: int = ENUMERATION_CAP, generic: bool = False) -> DiscreteDistribution:
    """Exact law of ``t -> ||(f_k(t))_k||_E`` for independent ``f_k`` on (0, 1).

    ``ell_q`` and ``ell_inf`` go through exact convolution / product of CDFs;
    other spaces (or ``generic=True``) enumerate the product space.
    """
    if not fs:
        raise ValueError("need at least one function")
    total = math.prod(len(f.with_zero_atom()) for f in fs)
    if total > cap:
        raise CapacityError(f"{total} product atoms exceed the cap {cap}; use Monte Carlo")
    if not generic and E.kind == "ellq":
        s = sum_of_independent([power(f, E.q) for f in fs], cap)
        return power(s, 1.0 / E.q)
    if not generic and E.kind == "ellinfty":
        return max_of_independent(fs)
    values, masses = [], []
    for pts, w in product_atoms(fs, cap):
        values.append(sequence_quasinorm_rows(E, pts))
        masses.append(w)
    return DiscreteDistribution.from_arrays(np.concatenate(values), np.concatenate(masses))


def mixed_norm_exact(X: SpaceSpec, E: SeqSpaceSpec, fs, cap: int = ENUMERATION_CAP) -> float:
    """``|| ||(f_k)_k||_E ||_X`` by exact enumeration of the product space."""
    return function_quasinorm(X, norm_law(E, fs, cap))


def mixed_modular_exact(phi: OrliczFunction, E: SeqSpaceSpec, fs,
                        cap: int = ENUMERATION_CAP) -> float:
    """``int_0^1 Phi(||(f_k(t))_k||_E) dt`` by exact enumeration."""
    return orlicz_modular(phi, norm_law(E, fs, cap))


def marcinkiewicz_sup_p_equiv(g: DiscreteDistribution, psi: PsiTable, p_grid):
    """Return ``(||g||_{M_psi}, max_p log(ep)/p * ||g||_p)`` over ``p_grid``."""
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(p_grid < 1):
        raise ValueError("p grid must lie in [1, inf)")
    lhs = marcinkiewicz_norm(psi, g)
    rhs = max((math.log(math.e * p) / p * lp_norm(g, p) for p in p_grid), default=0.0)
    return lhs, rhs
