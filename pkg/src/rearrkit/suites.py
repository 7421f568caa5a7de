"""Named verification suites.

Every suite takes a seed and returns a list of :class:`CheckRow`; a suite
passes when all of its rows pass.  Instance ``i`` of check ``c`` draws from
the substream ``(seed, c, i)``, so results never depend on threading.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .combinatorics import (
    build_level_matrix,
    junge_statistic,
    permutation_matrix,
    random_doubly_stochastic,
    step2_upper_check,
    step3_domination_check,
    uniform_matrix,
    xi_eta_probability,
)
from .families import FamilySpec, substream
from .harness import (
    ExperimentConfig,
    evaluate_lhs_exact,
    evaluate_lhs_mc,
    evaluate_rhs,
    family_for,
    run_corpus,
)
from .kruglov import (
    kruglov_distribution,
    kruglov_modular_bound_check,
    psi_asymptotic,
    psi_table,
    sum_vs_kruglov_check,
)
from .measure import (
    DiscreteDistribution,
    dilate_sequence,
    disjoint_sum,
    distribution_function,
    max_of_independent,
    rearrangement_dominated,
    rearrangement_sequence,
    split_at_level,
)
from .spaces import OrliczFunction, SeqSpaceSpec, SpaceSpec, lp_norm, sequence_quasinorm

__all__ = ["CheckRow", "SUITES", "run_suite", "run_exact_constant_suite", "suite_names"]

CHECK_COLUMNS = ("suite", "check", "instance", "n", "value", "bound", "passed")


@dataclass(frozen=True)
class CheckRow:
    suite: str
    check: str
    instance: int
    n: int
    value: float
    bound: float
    passed: bool

    def row(self) -> list[str]:
        return [self.suite, self.check, str(self.instance), str(self.n),
                repr(float(self.value)), repr(float(self.bound)),
                "true" if self.passed else "false"]

    def to_json(self) -> dict:
        return {c: getattr(self, c) for c in CHECK_COLUMNS}


def _key(name: str) -> int:
    return zlib.crc32(name.encode())


def _rng(seed: int, check: str, i: int) -> np.random.Generator:
    return substream(seed, _key(check), i)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------
# Kruglov operator


def suite_kruglov(seed: int, threads: int = 1, instances: int = 100) -> list[CheckRow]:
    rows = []
    law = kruglov_distribution(DiscreteDistribution.constant(1.0), 17).law
    for n in range(16):
        got = law.masses[law.values == n]
        got = float(got[0]) if got.size else 0.0
        err = abs(got - math.exp(-1.0 - math.lgamma(n + 1)))
        rows.append(CheckRow("kruglov", "poisson-pmf", n, n, err, 1e-12, err < 1e-12))

    fam = FamilySpec(max_atoms=3)
    psis = [OrliczFunction.power(1), OrliczFunction.power(2), OrliczFunction.power_log(1, 1)]

    def one(i):
        rng = _rng(seed, "modular-kruglov-bound", i)
        f = fam.generate(1, rng)[0]
        psi = psis[i % len(psis)]
        b = kruglov_modular_bound_check(psi, f)
        ratio = b.lhs / b.rhs if b.rhs > 0 else 0.0
        return CheckRow("kruglov", f"modular-bound[{psi.label}]", i, 1, ratio, 1.0, b.holds)

    rows += _map(one, range(instances), threads)
    return rows


# ----------------------------------------------------------------------
# disjoint sums


def suite_disjoint(seed: int, threads: int = 1, families: int = 1000,
                   points: int = 100) -> list[CheckRow]:
    """Distribution function of a disjoint sum against the sum of distribution functions.

    Masses are multiples of 1/1024 so both sides are sums of dyadic rationals
    and must agree bit for bit.
    """
    fam = FamilySpec(max_atoms=3, mass_denominator=1024)
    rows = []
    for i in range(families):
        rng = _rng(seed, "disjoint", i)
        n = int(rng.integers(1, 9))
        fs = fam.generate(n, rng)
        f = disjoint_sum(fs)
        grid = np.concatenate([g.values for g in fs] + [[0.0]])
        s = np.concatenate([rng.choice(grid, points // 2),
                            np.exp(rng.uniform(math.log(1e-4), math.log(2e3), points - points // 2))])
        worst = 0.0
        for x in s:
            lhs = distribution_function(f, x)
            rhs = math.fsum(distribution_function(g, x) for g in fs)
            worst = max(worst, abs(lhs - rhs))
        rows.append(CheckRow("disjoint", "distribution-additivity", i, n, worst, 0.0, worst == 0.0))
    return rows


# ----------------------------------------------------------------------
# exact-constant inequalities


def _check_max_domination(rng, n, joint=True):
    fam = FamilySpec(max_atoms=3, joint=joint)
    fs = fam.generate(n, rng)
    if not joint:
        # keep only the part above mu(1, f); its supports have total measure <= 1
        f = disjoint_sum([g.nonzero() for g in fs])
        level = rearrangement_sequence(f, 1)[1]
        fs = [split_at_level(g, level)[0] for g in fs]
    g = disjoint_sum([h.nonzero() for h in fs])
    m = max_of_independent(fs)
    return rearrangement_dominated(g, m, factor=1.0, dilation=2.0)


def _check_dilation(rng, n):
    a = -np.sort(-np.exp(rng.uniform(-5, 5, size=n)))
    m = int(rng.integers(1, 9))
    rows = []
    for E in (SeqSpaceSpec.ellq(0.5), SeqSpaceSpec.ellq(1.0), SeqSpaceSpec.ellq(3.0),
              SeqSpaceSpec.ellinfty(), SeqSpaceSpec.weak_ell1()):
        C = E.concavity_modulus
        lhs = sequence_quasinorm(E, dilate_sequence(a, m))
        rhs = C * m ** (1 + math.log2(C)) * sequence_quasinorm(E, a)
        rows.append(lhs / rhs)
    worst = max(rows)
    return worst <= 1 + 1e-12, worst


_STEP2_SPACES = (SeqSpaceSpec.ellq(1.0), SeqSpaceSpec.ellq(2.0), SeqSpaceSpec.ellq(0.5),
                 SeqSpaceSpec.ellinfty(), SeqSpaceSpec.weak_ell1())


def run_exact_constant_suite(seed: int, threads: int = 1, instances: int = 500) -> list[CheckRow]:
    """Every one-sided inequality with an explicit constant, on a seeded corpus."""
    fam = FamilySpec(max_atoms=3)
    joint = FamilySpec(max_atoms=3, joint=True)

    def max_dom(i):
        rng = _rng(seed, "max-domination", i)
        n = int(rng.integers(1, 7))
        ok, slack = _check_max_domination(rng, n, joint=True)
        return CheckRow("exact-constants", "max-domination", i, n, slack, 0.0, ok)

    def head_max(i):
        rng = _rng(seed, "head-max-domination", i)
        n = int(rng.integers(1, 7))
        ok, slack = _check_max_domination(rng, n, joint=False)
        return CheckRow("exact-constants", "head-max-domination", i, n, slack, 0.0, ok)

    def sum_kruglov(i):
        rng = _rng(seed, "sum-vs-kruglov", i)
        n = int(rng.integers(1, 6))
        ok, slack = sum_vs_kruglov_check(joint.generate(n, rng))
        return CheckRow("exact-constants", "sum-vs-kruglov", i, n, slack, 0.0, ok)

    def step2(i):
        rng = _rng(seed, "level-band-upper", i)
        n = int(rng.integers(1, 5))
        E = _STEP2_SPACES[i % len(_STEP2_SPACES)]
        p = (1.0, 2.0, 3.0)[i % 3]
        lhs, rhs = step2_upper_check(fam.generate(n, rng), E, p)
        ratio = lhs / rhs if rhs > 0 else 0.0
        return CheckRow("exact-constants", "level-band-upper", i, n, ratio, 1.0,
                        lhs <= rhs * (1 + 1e-12))

    def step3(i):
        rng = _rng(seed, "dilation-domination", i)
        n = int(rng.integers(1, 7))
        fs = fam.generate(n, rng)
        a = build_level_matrix(fs).levels[:n]
        bad = step3_domination_check(a)
        return CheckRow("exact-constants", "dilation-domination", i, n, bad, 0.0, bad == 0)

    def order_stat(i):
        rng = _rng(seed, "order-statistic", i)
        n = int(rng.integers(1, 9))
        lm = build_level_matrix(fam.generate(n, rng))
        prob = xi_eta_probability(lm.P, lm.levels)
        return CheckRow("exact-constants", "order-statistic", i, n, prob, 0.1, prob > 0.1)

    def dilation(i):
        rng = _rng(seed, "sequence-dilation", i)
        n = int(rng.integers(1, 9))
        ok, worst = _check_dilation(rng, n)
        return CheckRow("exact-constants", "sequence-dilation", i, n, worst, 1.0, ok)

    rows = []
    for fn in (max_dom, head_max, sum_kruglov, step2, step3, order_stat, dilation):
        rows += _map(fn, range(instances), threads)
    return rows


# ----------------------------------------------------------------------
# exact two-sided checks with computable constants


def suite_modular(seed: int, threads: int = 1, instances: int = 200) -> list[CheckRow]:
    """``Phi = t^2``, ``E = ell_2``: the ratio must lie in [1/2, 1]."""
    def one(i):
        n = 1 + i % 10
        cfg = ExperimentConfig("Modular", n, OrliczFunction.power(2), SeqSpaceSpec.ellq(2),
                               seed=seed)
        fs = family_for(cfg, i)
        lhs, rhs = evaluate_lhs_exact(cfg, fs), evaluate_rhs(cfg, fs)
        ratio = lhs / rhs if rhs > 0 else 1.0
        ok = 0.5 - 1e-9 <= ratio <= 1 + 1e-9
        return CheckRow("modular", "square-sandwich", i, n, ratio, 0.5, ok)

    return _map(one, range(instances), threads)


def suite_fubini(seed: int, threads: int = 1, instances: int = 200) -> list[CheckRow]:
    """``|| ||(f_k)||_p ||_p = ||f||_p`` for the disjoint sum ``f``."""
    ps = (0.5, 1.0, 2.0, 4.0)

    def one(i):
        rng = _rng(seed, "fubini", i)
        n = int(rng.integers(1, 9))
        fs = FamilySpec(max_atoms=3).generate(n, rng)
        rows = []
        for p in ps:
            cfg = ExperimentConfig("MainEq", n, SpaceSpec.lp(p), SeqSpaceSpec.ellq(p))
            lhs = evaluate_lhs_exact(cfg, fs)
            rhs = lp_norm(disjoint_sum([g.nonzero() for g in fs]), p)
            err = abs(lhs - rhs) / max(1.0, rhs)
            rows.append(CheckRow("fubini", f"p={p:g}", i, n, err, 1e-9, err <= 1e-9))
        return rows

    return [r for rows in _map(one, range(instances), threads) for r in rows]


# ----------------------------------------------------------------------
# Junge's statistic


def junge_corpus(seed: int, n_max: int = 6, random_per_n: int = 3):
    """Labelled doubly stochastic matrices: one permutation, the uniform one and random mixtures."""
    out = []
    for n in range(1, n_max + 1):
        rng = _rng(seed, "junge", n)
        out.append((f"perm", n, permutation_matrix(rng.permutation(n))))
        out.append(("uniform", n, uniform_matrix(n)))
        for j in range(random_per_n):
            out.append((f"random{j}", n, random_doubly_stochastic(n, rng)))
    return out


def suite_junge(seed: int, threads: int = 1, ps=(1.0, 2.0, 4.0)) -> list[CheckRow]:
    """Monotone in ``p`` on every matrix; one fitted ``c0`` bounds the whole corpus.

    The fitted constant is the corpus maximum of ``stat / (p / (1 + log p))``
    and is reported in the ``bound`` column of the ``c0`` row.
    """
    corpus = junge_corpus(seed)
    stats = _map(lambda item: [junge_statistic(item[2], p) for p in ps], corpus, threads)
    scale = np.array([p / (1 + math.log(p)) for p in ps])
    c0 = max(float(np.max(np.array(s) / scale)) for s in stats)
    rows = []
    for i, ((label, n, _), s) in enumerate(zip(corpus, stats)):
        mono = all(b >= a * (1 - 1e-12) for a, b in zip(s, s[1:]))
        rows.append(CheckRow("junge", f"monotone[{label}]", i, n, s[-1] - s[0], 0.0, mono))
        worst = float(np.max(np.array(s) / (c0 * scale)))
        rows.append(CheckRow("junge", f"bounded[{label}]", i, n, worst, 1.0,
                             math.isfinite(worst) and worst <= 1 + 1e-12))
    rows.append(CheckRow("junge", "c0", len(corpus), 0, c0, c0, math.isfinite(c0) and c0 > 0))
    return rows


# ----------------------------------------------------------------------
# Monte Carlo checks


def suite_stability(seed: int, threads: int = 1, families: int = 50,
                    trials: int = 10_000, ns=(4, 8, 16), max_widening: float = 1.5):
    """Ratio band ``max/min`` per ``(p, q)`` cell must not widen by more than
    ``max_widening`` per doubling of ``n``."""
    rows = []
    grid = (0.5, 1.0, 2.0, 4.0)
    for ci, (p, q) in enumerate((p, q) for p in grid for q in grid):
        X = SpaceSpec.lp_plus_lq(p, q) if p <= q else SpaceSpec.lp_cap_lq(p, q)
        bands = []
        for n in ns:
            cfg = ExperimentConfig("CorollaryPQ", n, X, trials=trials, seed=seed)
            ratios = np.array([r.ratio for r in run_corpus(cfg, families, threads)])
            bands.append(float(ratios.max() / ratios.min()))
        widen = max(b / a for a, b in zip(bands, bands[1:]))
        rows.append(CheckRow("stability", f"band[p={p:g},q={q:g}]", ci, ns[-1], widen,
                             max_widening, widen <= max_widening))
    return rows


def _mc_cells():
    cells = []
    for p in (0.5, 1.0, 2.0, 4.0):
        for E in (SeqSpaceSpec.ellq(0.5), SeqSpaceSpec.ellq(1.0), SeqSpaceSpec.ellq(2.0),
                  SeqSpaceSpec.ellinfty(), SeqSpaceSpec.weak_ell1()):
            cells.append(("MainEq", SpaceSpec.lp(p), E))
    for phi in (OrliczFunction.power(1), OrliczFunction.power(2), OrliczFunction.power_log(1, 1)):
        for E in (SeqSpaceSpec.ellq(1.0), SeqSpaceSpec.ellq(2.0), SeqSpaceSpec.ellinfty()):
            cells.append(("Modular", phi, E))
    return cells


def suite_mc_exact(seed: int, threads: int = 1, pairs: int = 1000, trials: int = 10_000,
                   n_max: int = 8, rate: float = 0.99) -> list[CheckRow]:
    """Share of paired runs with ``|MC - exact| <= 3 stderr``, over mixed cells and ``n``."""
    cells = _mc_cells()

    def one(i):
        theorem, X, E = cells[i % len(cells)]
        n = 1 + (i // len(cells)) % n_max
        cfg = ExperimentConfig(theorem, n, X, E, trials=trials, seed=seed)
        fs = family_for(cfg, i)
        exact = evaluate_lhs_exact(cfg, fs)
        mc, se = evaluate_lhs_mc(cfg, fs, substream(seed, i, 1))
        return abs(mc - exact) <= 3 * se

    hits = _map(one, range(pairs), threads)
    share = sum(hits) / pairs
    return [CheckRow("mc-exact", "three-sigma-agreement", 0, n_max, share, rate, share >= rate)]


# ----------------------------------------------------------------------
# psi profile


def suite_psi(seed: int = 0, threads: int = 1) -> list[CheckRow]:
    table = psi_table(17, knots=64)
    rows = []
    err = abs(float(table(1.0)) - 1.0)
    rows.append(CheckRow("psi", "value-at-one", 0, 17, err, 1e-10, err <= 1e-10))
    inc = float(np.min(np.diff(table.psi)))
    rows.append(CheckRow("psi", "non-decreasing", 0, 17, inc, 0.0, inc >= 0))
    slopes = table.slopes()
    conc = float(np.max(np.diff(slopes)))
    rows.append(CheckRow("psi", "concave", 0, 17, conc, 1e-12, conc <= 1e-12))
    ts = 10.0 ** -np.arange(3, 9)
    ratios = table(ts) / psi_asymptotic(ts)
    spread = float(ratios.max() / ratios.min())
    ok = bool(np.all(np.isfinite(ratios)) and ratios.min() > 0 and spread <= 1.25)
    rows.append(CheckRow("psi", "asymptotic-ratio-spread", 0, 17, spread, 1.25, ok))
    return rows


SUITES = {
    "kruglov": suite_kruglov,
    "disjoint": suite_disjoint,
    "exact-constants": run_exact_constant_suite,
    "modular": suite_modular,
    "fubini": suite_fubini,
    "junge": suite_junge,
    "psi": suite_psi,
    "mc-exact": suite_mc_exact,
    "stability": suite_stability,
}


def suite_names() -> list[str]:
    return list(SUITES) + ["all"]


def run_suite(name: str, seed: int, threads: int = 1) -> list[CheckRow]:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed, threads)]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {suite_names()}")
    return SUITES[name](seed, threads)
