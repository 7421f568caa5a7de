"""Both sides of the two-sided estimates over random independent families.

Each trial generates a family, evaluates the mixed norm (or modular) of the
independent vector either exactly or by seeded Monte Carlo, evaluates the
deterministic right-hand side on the disjoint sum, and reports the ratio.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

from .families import FamilySpec, substream
from .measure import (
    Ambient,
    DiscreteDistribution,
    disjoint_sum,
    quantile_transform,
)
from .spaces import (
    OrliczFunction,
    SeqSpaceSpec,
    SpaceSpec,
    function_quasinorm,
    mixed_modular_exact,
    mixed_norm_exact,
    rhs_modular,
    rhs_theorem_main,
    sequence_quasinorm_rows,
)

__all__ = [
    "THEOREMS",
    "MIN_TRIALS",
    "ExperimentConfig",
    "RatioReport",
    "CSV_COLUMNS",
    "config_schema",
    "validate_config",
    "sample_independent",
    "sample_matrix",
    "family_for",
    "evaluate_lhs_exact",
    "evaluate_lhs_mc",
    "evaluate_rhs",
    "run_experiment",
    "run_corpus",
    "corpus_csv",
    "write_reports",
]

THEOREMS = ("MainEq", "CorollaryPQ", "Modular")
MIN_TRIALS = 1000
BATCHES = 20
CSV_COLUMNS = ("theorem", "n", "X", "E", "mode", "seed", "trial",
               "lhs", "rhs", "ratio", "stderr", "degenerate")


# ----------------------------------------------------------------------
# configuration


def config_schema() -> dict:
    text = resources.files("rearrkit").joinpath("data/experiment_config.schema.json").read_text()
    return json.loads(text)


def validate_config(obj: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``obj`` does not match the schema."""
    import jsonschema

    jsonschema.validate(obj, config_schema())


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """One experiment cell.

    ``X`` is a :class:`SpaceSpec` for ``MainEq`` and ``CorollaryPQ`` (for the
    latter it must be ``LpPlusLq(p, q)`` or ``LpCapLq(p, q)``, and ``E``
    defaults to ``ell_q``), and an :class:`OrliczFunction` for ``Modular``.
    ``trials == 0`` means exact mode.
    """

    theorem: str
    n: int
    X: SpaceSpec | OrliczFunction
    E: SeqSpaceSpec | None = None
    family: FamilySpec = field(default_factory=FamilySpec)
    trials: int = 0
    seed: int = 42

    def __post_init__(self):
        if self.theorem not in THEOREMS:
            raise ValueError(f"theorem must be one of {THEOREMS}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.trials and self.trials < MIN_TRIALS:
            raise ValueError(f"Monte Carlo needs at least {MIN_TRIALS} trials")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        if self.theorem == "Modular":
            if not isinstance(self.X, OrliczFunction):
                raise ValueError("Modular experiments take an Orlicz function as X")
        elif not isinstance(self.X, SpaceSpec):
            raise ValueError("X must be a function space")
        if self.theorem == "CorollaryPQ":
            if self.X.kind not in ("LpPlusLq", "LpCapLq"):
                raise ValueError("CorollaryPQ needs X = LpPlusLq(p, q) or LpCapLq(p, q)")
            if self.E is None:
                object.__setattr__(self, "E", SeqSpaceSpec.ellq(self.X.q))
            elif self.E.kind != "ellq" or self.E.q != self.X.q:
                raise ValueError("CorollaryPQ needs E = ell_q with the q of X")
        if self.E is None:
            raise ValueError("E is required")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def exact(self) -> bool:
        return self.trials == 0

    @property
    def mode_label(self) -> str:
        return "Exact" if self.exact else f"MonteCarlo({self.trials})"

    @property
    def family_seed(self) -> int:
        return self.seed if self.family.seed is None else self.family.seed

    def replace(self, **changes) -> "ExperimentConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return ExperimentConfig(**kw)

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem,
            "n": self.n,
            "X": self.X.to_json(),
            "E": self.E.to_json(),
            "family": self.family.to_json(),
            "mode": "Exact" if self.exact else {"MonteCarlo": self.trials},
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict, validate: bool = True) -> "ExperimentConfig":
        if validate:
            validate_config(obj)
        theorem = obj["theorem"]
        X = (OrliczFunction.from_json(obj["X"]) if theorem == "Modular"
             else SpaceSpec.from_json(obj["X"]))
        E = SeqSpaceSpec.from_json(obj["E"]) if "E" in obj else None
        mode = obj.get("mode", "Exact")
        trials = 0 if mode == "Exact" else int(mode["MonteCarlo"])
        return cls(theorem, int(obj["n"]), X, E, FamilySpec.from_json(obj.get("family")),
                   trials, int(obj.get("seed", 42)))


@dataclass(frozen=True)
class RatioReport:
    """One trial of an experiment: both sides, their ratio, and the config echo."""

    theorem: str
    n: int
    X: str
    E: str
    mode: str
    seed: int
    trial: int
    lhs: float
    rhs: float
    ratio: float
    stderr: float
    degenerate: bool

    def row(self) -> list[str]:
        out = []
        for name in CSV_COLUMNS:
            v = getattr(self, name)
            if isinstance(v, bool):
                out.append("true" if v else "false")
            elif isinstance(v, float):
                out.append(repr(v))
            else:
                out.append(str(v))
        return out

    def to_json(self) -> dict:
        return {name: getattr(self, name) for name in CSV_COLUMNS}


# ----------------------------------------------------------------------
# sampling


def sample_matrix(fs, rng: np.random.Generator, size: int) -> np.ndarray:
    """``size`` joint draws of independent ``(f_k)_k``, shape ``(size, n)``."""
    for f in fs:
        if f.ambient is not Ambient.UNIT:
            raise ValueError("independent families must live on the unit interval")
    u = rng.random((size, len(fs)))
    return np.column_stack([quantile_transform(f, u[:, k]) for k, f in enumerate(fs)])


def sample_independent(fs, rng: np.random.Generator) -> np.ndarray:
    """One joint draw of independent ``(f_k)_k`` by inverse transform."""
    return sample_matrix(fs, rng, 1)[0]


# ----------------------------------------------------------------------
# the two sides


def family_for(cfg: ExperimentConfig, trial: int) -> list[DiscreteDistribution]:
    """The family of trial ``trial``; it does not depend on the mode."""
    return cfg.family.generate(cfg.n, substream(cfg.family_seed, trial, 0))


def _lhs_space(cfg: ExperimentConfig) -> SpaceSpec:
    if cfg.theorem == "CorollaryPQ":
        return SpaceSpec.lp(cfg.X.p)
    return cfg.X


def evaluate_rhs(cfg: ExperimentConfig, fs) -> float:
    f = disjoint_sum([g.nonzero() for g in fs])
    if cfg.theorem == "Modular":
        return rhs_modular(cfg.X, cfg.E, f, cfg.n)
    if cfg.theorem == "MainEq":
        return rhs_theorem_main(cfg.X, cfg.E, f, cfg.n)
    return function_quasinorm(cfg.X, f)


def evaluate_lhs_exact(cfg: ExperimentConfig, fs) -> float:
    if cfg.theorem == "Modular":
        return mixed_modular_exact(cfg.X, cfg.E, fs)
    return mixed_norm_exact(_lhs_space(cfg), cfg.E, fs)


def _empirical(g: np.ndarray) -> DiscreteDistribution:
    return DiscreteDistribution.from_arrays(g, np.full(g.size, 1.0 / g.size))


def evaluate_lhs_mc(cfg: ExperimentConfig, fs, rng: np.random.Generator,
                    trials: int | None = None) -> tuple[float, float]:
    """Monte Carlo estimate of the left side and its standard error.

    Modulars are plain means.  ``L_p`` norms use the delta method on the mean
    of ``g^p``.  Other spaces use the full-sample plug-in estimate with the
    spread of ``BATCHES`` disjoint batch estimates as the error bar.
    """
    T = trials or cfg.trials
    g = sequence_quasinorm_rows(cfg.E, sample_matrix(fs, rng, T))
    if cfg.theorem == "Modular":
        vals = cfg.X(g)
        return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(T))
    X = _lhs_space(cfg)
    if X.kind == "Lp":
        p = X.p
        top = g.max()
        if top == 0:
            return 0.0, 0.0
        vals = (g / top) ** p
        m = vals.mean()
        se_m = vals.std(ddof=1) / math.sqrt(T)
        return float(top * m ** (1 / p)), float(top * se_m * m ** (1 / p - 1) / p)
    est = function_quasinorm(X, _empirical(g))
    batches = [function_quasinorm(X, _empirical(b)) for b in np.array_split(g, BATCHES)]
    return float(est), float(np.std(batches, ddof=1) / math.sqrt(BATCHES))


def run_experiment(cfg: ExperimentConfig, trial: int = 0) -> RatioReport:
    """Evaluate one trial.  Deterministic in ``(cfg, trial)``."""
    fs = family_for(cfg, trial)
    rhs = evaluate_rhs(cfg, fs)
    if cfg.exact:
        lhs, se = evaluate_lhs_exact(cfg, fs), 0.0
    else:
        lhs, se = evaluate_lhs_mc(cfg, fs, substream(cfg.seed, trial, 1))
    degenerate = False
    if rhs > 0:
        ratio = lhs / rhs
    elif lhs == 0:
        ratio, degenerate = 1.0, True
    else:
        raise RuntimeError(f"right-hand side vanished with lhs={lhs!r} (trial {trial})")
    label = cfg.X.label
    return RatioReport(cfg.theorem, cfg.n, label, cfg.E.label, cfg.mode_label, cfg.seed,
                       trial, float(lhs), float(rhs), float(ratio), float(se), degenerate)


def run_corpus(cfg: ExperimentConfig, count: int, threads: int = 1,
               start: int = 0) -> list[RatioReport]:
    """Trials ``start .. start+count-1``, in trial order whatever ``threads`` is."""
    trials = range(start, start + count)
    if threads <= 1:
        return [run_experiment(cfg, i) for i in trials]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: run_experiment(cfg, i), trials))


# ----------------------------------------------------------------------
# output


def write_reports(reports, fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps([r.to_json() for r in reports], indent=2) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def corpus_csv(reports, path) -> str:
    """Write ``reports`` as CSV to ``path`` and return the path."""
    text = write_reports(reports, "csv")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write report file {path}: {exc}") from exc
    return str(path)
