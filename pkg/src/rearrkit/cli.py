"""Command-line entry point: ``rearrkit {verify,experiment,kruglov,junge,psi}``.

A human summary always goes to standard output.  Machine output (CSV or
JSON) goes to ``--out`` when given; the inspection commands (kruglov, junge,
psi) print it to standard output otherwise.  Exit codes: 0 success, 1 a
check or inequality failed, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .combinatorics import junge_profile, junge_statistic, permutation_matrix, random_doubly_stochastic, uniform_matrix
from .families import substream
from .harness import ExperimentConfig, run_corpus, validate_config, write_reports
from .kruglov import DEFAULT_TRUNCATION, kruglov_distribution, psi_asymptotic, psi_table
from .measure import CapacityError, DiscreteDistribution
from .suites import CHECK_COLUMNS, run_suite, suite_names

DEFAULT_SEED = 42
SEED_ENV = "REARRKIT_SEED"


class UsageError(Exception):
    pass


def _table(header, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(header, r)) for r in rows], indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _check_out(path):
    if path is None:
        return
    parent = os.path.dirname(os.path.abspath(path)) or "."
    if not os.path.isdir(parent) or not os.access(parent, os.W_OK):
        raise UsageError(f"cannot write output file {path}")
    if os.path.isdir(path):
        raise UsageError(f"output path {path} is a directory")


def _emit(args, text: str, inspect: bool):
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write output file {args.out}: {exc}") from exc
    elif inspect:
        sys.stdout.write(text)


def _load_config(path):
    if path is None:
        return None
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        validate_config(obj)
    except Exception as exc:  # jsonschema.ValidationError
        raise UsageError(f"invalid config {path}: {getattr(exc, 'message', exc)}") from exc
    return obj


def resolve_seed(flag, config: dict | None) -> int:
    """Flag, then environment variable, then config file, then the default."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    if config is not None and "seed" in config:
        return int(config["seed"])
    return DEFAULT_SEED


# ----------------------------------------------------------------------
# subcommands


def cmd_verify(args) -> int:
    config = _load_config(args.config)
    seed = resolve_seed(args.seed, config)
    _check_out(args.out)
    rows = run_suite(args.suite, seed, args.threads)
    summary: dict[tuple[str, str], list[int]] = {}
    for r in rows:
        key = (r.suite, r.check.split("[")[0])
        s = summary.setdefault(key, [0, 0])
        s[0] += r.passed
        s[1] += 1
    print(f"suite {args.suite}, seed {seed}")
    for (suite, check), (ok, total) in summary.items():
        status = "PASS" if ok == total else "FAIL"
        print(f"  {status} {suite}/{check}: {ok}/{total}")
    failed = sum(not r.passed for r in rows)
    print(f"{len(rows) - failed}/{len(rows)} rows passed")
    if args.format == "json":
        text = json.dumps([r.to_json() for r in rows], indent=2) + "\n"
    else:
        text = _table(CHECK_COLUMNS, [r.row() for r in rows], "csv")
    _emit(args, text, inspect=False)
    return 0 if failed == 0 else 1


def _experiment_config(args, config):
    if config is None:
        if args.theorem is None or args.n is None or args.X is None:
            raise UsageError("give --config or all of --theorem, --n and --X")
        config = {"theorem": args.theorem, "n": args.n}
        try:
            config["X"] = json.loads(args.X)
            if args.E is not None:
                config["E"] = json.loads(args.E)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--X/--E must be JSON: {exc}") from exc
        if args.trials:
            config["mode"] = {"MonteCarlo": args.trials}
        try:
            validate_config(config)
        except Exception as exc:
            raise UsageError(f"invalid experiment: {getattr(exc, 'message', exc)}") from exc
    config = dict(config)
    config["seed"] = resolve_seed(args.seed, config)
    try:
        return ExperimentConfig.from_json(config)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid experiment: {exc}") from exc


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args, _load_config(args.config))
    _check_out(args.out)
    try:
        reports = run_corpus(cfg, args.count, args.threads)
    except CapacityError as exc:
        raise UsageError(f"{exc}") from exc
    except RuntimeError as exc:
        print(f"FAIL {exc}")
        return 1
    ratios = np.array([r.ratio for r in reports])
    print(f"{cfg.theorem} n={cfg.n} X={cfg.X.label} E={cfg.E.label} "
          f"mode={cfg.mode_label} seed={cfg.seed}")
    print(f"  trials {len(reports)}, degenerate {sum(r.degenerate for r in reports)}")
    print(f"  ratio min {ratios.min():.6g}  median {np.median(ratios):.6g}  max {ratios.max():.6g}")
    _emit(args, write_reports(reports, args.format), inspect=False)
    return 0


def cmd_kruglov(args) -> int:
    if args.indicator == (args.dist is not None):
        raise UsageError("give exactly one of --indicator and --dist")
    if args.indicator:
        f = DiscreteDistribution.constant(1.0)
    else:
        try:
            f = DiscreteDistribution.from_dict(json.loads(args.dist))
        except (ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"malformed --dist: {exc}") from exc
    _check_out(args.out)
    try:
        k = kruglov_distribution(f, args.n)
    except CapacityError as exc:
        raise UsageError(str(exc)) from exc
    law = k.law
    p0 = float(law.masses[law.values == 0].sum())
    print(f"law of Kf truncated at {args.n} summands: {len(law)} atoms")
    print(f"  P(Kf=0) = {p0:.6f}, omitted tail mass <= {k.tail_mass_bound:.3g}")
    if args.format == "json":
        text = json.dumps({"truncation": args.n, "tail_mass_bound": k.tail_mass_bound,
                           **law.to_dict()}, indent=2) + "\n"
    else:
        text = _table(("value", "mass"), [(float(v), float(m)) for v, m in law.atoms], "csv")
    _emit(args, text, inspect=True)
    return 0


def _junge_matrix(kind: str, n: int, seed: int):
    rng = substream(seed, n)
    if kind == "uniform":
        return uniform_matrix(n)
    if kind == "perm":
        return permutation_matrix(rng.permutation(n))
    return random_doubly_stochastic(n, rng)


def cmd_junge(args) -> int:
    seed = resolve_seed(args.seed, None)
    if args.n < 1 or args.p < 1:
        raise UsageError("need --n >= 1 and --p >= 1")
    _check_out(args.out)
    P = _junge_matrix(args.matrix, args.n, seed)
    try:
        value = junge_statistic(P, args.p)
        ps = sorted({1.0, 2.0, 4.0, 8.0, float(args.p)})
        profile = junge_profile(P, ps)
    except CapacityError as exc:
        raise UsageError(str(exc)) from exc
    c0 = max(r[2] for r in profile)
    print(f"{args.matrix} matrix, n={args.n}: statistic(p={args.p:g}) = {value:.6g}")
    print(f"  fitted c0 over p in {{{', '.join(f'{p:g}' for p in ps)}}}: {c0:.6g}")
    _emit(args, _table(("p", "statistic", "ratio"), profile, args.format), inspect=True)
    return 0


def cmd_psi(args) -> int:
    if args.n < 1 or args.knots < 0:
        raise UsageError("need --n >= 1 and --knots >= 0")
    _check_out(args.out)
    table = psi_table(args.n, args.knots)
    ts = 10.0 ** -np.arange(3, 9)
    ratios = table(ts) / psi_asymptotic(ts)
    print(f"psi from K chi_(0,1), truncation {args.n}: {table.t.size} knots")
    print(f"  psi(1) = {float(table(1.0)):.12f}")
    print(f"  psi / asymptotic on t=1e-3..1e-8: min {ratios.min():.6g} max {ratios.max():.6g}")
    rows = [("knot", float(t), float(v)) for t, v in zip(table.t, table.psi)]
    rows += [("asymptotic-ratio", float(t), float(r)) for t, r in zip(ts, ratios)]
    _emit(args, _table(("kind", "t", "value"), rows, args.format), inspect=True)
    return 0


# ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", help="write machine output here")
    common.add_argument("--seed", type=int, help=f"overrides ${SEED_ENV} and the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads")

    parser = argparse.ArgumentParser(
        prog="rearrkit",
        description="Exact and Monte Carlo checks of rearrangement estimates "
                    "for sums and norms of independent random variables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", choices=suite_names(), default="exact-constants")
    p.add_argument("--config", help="JSON file; only its seed is used")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("experiment", parents=[common], help="ratio reports for one cell")
    p.add_argument("--config", help="experiment JSON (see data/experiment_config.schema.json)")
    p.add_argument("--theorem", choices=("MainEq", "CorollaryPQ", "Modular"))
    p.add_argument("--n", type=int)
    p.add_argument("--X", help='function space or Orlicz function as JSON, e.g. \'{"Lp": 2}\'')
    p.add_argument("--E", help='sequence space as JSON, e.g. \'{"ellq": 2}\'')
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0 = exact)")
    p.add_argument("--count", type=int, default=1, help="number of random families")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("kruglov", parents=[common], help="print the law of Kf")
    p.add_argument("--indicator", action="store_true", help="f = indicator of (0,1)")
    p.add_argument("--dist", help='law as JSON, e.g. \'{"atoms": [[1, 0.5]]}\'')
    p.add_argument("--n", type=int, default=DEFAULT_TRUNCATION, help="Poisson truncation")
    p.set_defaults(func=cmd_kruglov)

    p = sub.add_parser("junge", parents=[common], help="brute-force map statistic")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=1.0)
    p.add_argument("--matrix", choices=("uniform", "perm", "random"), default="uniform")
    p.set_defaults(func=cmd_junge)

    p = sub.add_parser("psi", parents=[common], help="the concave profile psi")
    p.add_argument("--n", type=int, default=DEFAULT_TRUNCATION, help="Poisson truncation")
    p.add_argument("--knots", type=int, default=0, help="extra log-spaced abscissae")
    p.set_defaults(func=cmd_psi)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    if getattr(args, "count", 1) < 1:
        parser.error("--count must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rearrkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
