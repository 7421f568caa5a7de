"""Seeded random families of independent nonnegative simple functions."""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .measure import DiscreteDistribution

__all__ = ["FamilySpec", "substream"]


def substream(*key: int) -> np.random.Generator:
    """Counter-based generator for the substream labelled by ``key``.

    Trial ``i`` of a run seeded with ``s`` always draws from ``substream(s, i, ...)``,
    so serial and threaded runs see identical numbers.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


@dataclass(frozen=True)
class FamilySpec:
    """Generator of ``n`` independent laws on (0, 1).

    Each law has 1 to ``max_atoms`` values drawn without replacement from a
    log-spaced grid over ``value_range``.  Its support measure is uniform on
    (0, budget], or, with ``joint=True``, the supports of the whole family
    share a Dirichlet split of ``budget``.  Masses inside a law are a
    Dirichlet split of its support measure; a positive ``mass_denominator``
    rounds every mass down to a multiple of ``1/mass_denominator``.
    """

    value_range: tuple[float, float] = (1e-3, 1e3)
    grid_points: int = 61
    max_atoms: int = 3
    budget: float = 1.0
    joint: bool = False
    mass_denominator: int = 0
    seed: int | None = None

    def __post_init__(self):
        lo, hi = self.value_range
        if not 0 < lo <= hi:
            raise ValueError("value range must satisfy 0 < lo <= hi")
        if self.grid_points < 1 or self.max_atoms < 1:
            raise ValueError("grid_points and max_atoms must be positive")
        if self.max_atoms > self.grid_points:
            raise ValueError("max_atoms cannot exceed grid_points")
        if not 0 < self.budget <= 1:
            raise ValueError("budget must lie in (0, 1]")
        if self.mass_denominator < 0:
            raise ValueError("mass_denominator must be >= 0")
        object.__setattr__(self, "value_range", (float(lo), float(hi)))

    @property
    def grid(self) -> np.ndarray:
        lo, hi = self.value_range
        return np.geomspace(lo, hi, self.grid_points)

    def generate(self, n: int, rng: np.random.Generator) -> list[DiscreteDistribution]:
        if n < 1:
            raise ValueError("n must be >= 1")
        grid = self.grid
        if self.joint:
            supports = rng.dirichlet(np.ones(n + 1))[:n] * self.budget
        else:
            supports = self.budget * (1.0 - rng.random(n))
        out = []
        for s in supports:
            k = int(rng.integers(1, self.max_atoms + 1))
            values = rng.choice(grid, size=k, replace=False)
            masses = rng.dirichlet(np.ones(k)) * s
            if self.mass_denominator:
                masses = np.floor(masses * self.mass_denominator) / self.mass_denominator
            out.append(DiscreteDistribution.from_arrays(values, masses))
        return out

    def to_json(self) -> dict:
        d = asdict(self)
        d["value_range"] = list(self.value_range)
        if d["seed"] is None:
            del d["seed"]
        return d

    @classmethod
    def from_json(cls, obj: dict | None) -> "FamilySpec":
        obj = dict(obj or {})
        if "value_range" in obj:
            obj["value_range"] = tuple(obj["value_range"])
        return cls(**obj)
