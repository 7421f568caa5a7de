import csv
import io
import json
import math

import jsonschema
import numpy as np
import pytest

from rearrkit import harness
from rearrkit.families import FamilySpec, substream
from rearrkit.harness import (
    CSV_COLUMNS,
    ExperimentConfig,
    corpus_csv,
    evaluate_lhs_exact,
    evaluate_lhs_mc,
    family_for,
    run_corpus,
    run_experiment,
    sample_independent,
    sample_matrix,
    validate_config,
    write_reports,
)
from rearrkit.measure import DiscreteDistribution, distribution_function
from rearrkit.spaces import OrliczFunction, SeqSpaceSpec, SpaceSpec

D = DiscreteDistribution
ell = SeqSpaceSpec.ellq


def main_cfg(**kw):
    base = dict(theorem="MainEq", n=3, X=SpaceSpec.lp(2), E=ell(2))
    base.update(kw)
    return ExperimentConfig(**base)


# ----------------------------------------------------------------------
# families and sampling


def test_family_generation_is_deterministic_and_valid():
    spec = FamilySpec()
    a = spec.generate(5, substream(1, 2, 0))
    b = spec.generate(5, substream(1, 2, 0))
    assert [f.atoms for f in a] == [f.atoms for f in b]
    for f in a:
        assert 1 <= len(f) <= 3 and f.total_mass <= 1
        assert np.all(np.isin(f.values, spec.grid))


def test_joint_family_shares_budget():
    fs = FamilySpec(joint=True, budget=0.5).generate(6, substream(3))
    assert math.fsum(f.total_mass for f in fs) <= 0.5 + 1e-12


def test_mass_denominator_rounds_down():
    fs = FamilySpec(mass_denominator=16).generate(4, substream(5))
    for f in fs:
        np.testing.assert_array_equal(f.masses * 16, np.round(f.masses * 16))


def test_family_spec_validation_and_json():
    with pytest.raises(ValueError):
        FamilySpec(value_range=(0, 1))
    with pytest.raises(ValueError):
        FamilySpec(budget=2)
    with pytest.raises(ValueError):
        FamilySpec(max_atoms=5, grid_points=3)
    spec = FamilySpec(joint=True, mass_denominator=8, seed=9)
    assert FamilySpec.from_json(spec.to_json()) == spec
    assert FamilySpec.from_json(None) == FamilySpec()


def test_substreams_are_distinct():
    assert substream(1, 0, 0).random() != substream(1, 0, 1).random()
    assert substream(1, 0, 0).random() == substream(1, 0, 0).random()


def test_sample_independent_degenerate_and_mean():
    rng = np.random.default_rng(0)
    assert sample_independent([D.constant(1.0)] * 3, rng).tolist() == [1, 1, 1]
    h = D.from_atoms([(1, 0.5)])
    T = 100_000
    draws = sample_matrix([h, h], rng, T)
    assert draws[:, 0].mean() == pytest.approx(0.5, abs=0.02)
    # the product of two centred Bernoulli(1/2) has standard deviation 1/4
    assert abs(np.cov(draws.T)[0, 1]) < 3 * 0.25 / math.sqrt(T)
    with pytest.raises(ValueError):
        sample_independent([D.from_atoms([(1, 2)], ambient="halfline")], rng)


def test_sample_marginals_within_dkw_band():
    f = D.from_atoms([(3, 0.2), (2, 0.3), (1, 0.1)])
    T = 50_000
    draws = sample_matrix([f, f], np.random.default_rng(8), T)
    eps = math.sqrt(math.log(2 / 0.001) / (2 * T))
    for col in draws.T:
        for s in (0, 1, 1.5, 2, 2.5, 3):
            assert abs(np.mean(col > s) - distribution_function(f, s)) <= eps


# ----------------------------------------------------------------------
# configuration


def test_config_validation_rules():
    with pytest.raises(ValueError):
        main_cfg(theorem="Other")
    with pytest.raises(ValueError):
        main_cfg(n=0)
    with pytest.raises(ValueError):
        main_cfg(trials=10)
    with pytest.raises(ValueError):
        main_cfg(seed=-1)
    with pytest.raises(ValueError):
        main_cfg(E=None)
    with pytest.raises(ValueError):
        main_cfg(theorem="Modular")
    with pytest.raises(ValueError):
        main_cfg(theorem="CorollaryPQ")
    with pytest.raises(ValueError):
        main_cfg(theorem="CorollaryPQ", X=SpaceSpec.lp_plus_lq(1, 2), E=ell(3))
    cfg = main_cfg(theorem="CorollaryPQ", X=SpaceSpec.lp_plus_lq(1, 2), E=None)
    assert cfg.E == ell(2)


def test_config_json_roundtrip_and_schema():
    cfgs = [
        main_cfg(),
        main_cfg(theorem="Modular", X=OrliczFunction.power_log(1, 1), E=SeqSpaceSpec.weak_ell1(),
                 trials=2000, family=FamilySpec(joint=True)),
        main_cfg(theorem="CorollaryPQ", X=SpaceSpec.lp_cap_lq(4, 2), E=None, seed=2**64 - 1),
        main_cfg(X=SpaceSpec.from_json({"Marcinkiewicz": {"N": 10}}), E=SeqSpaceSpec.ellinfty()),
    ]
    for cfg in cfgs:
        obj = json.loads(json.dumps(cfg.to_json()))
        validate_config(obj)
        assert ExperimentConfig.from_json(obj).to_json() == obj


@pytest.mark.parametrize("bad", [
    {"n": 2, "X": {"Lp": 2}},
    {"theorem": "MainEq", "n": 0, "X": {"Lp": 2}},
    {"theorem": "MainEq", "n": 2, "X": {"Lp": 2}, "mode": {"MonteCarlo": 10}},
    {"theorem": "MainEq", "n": 2, "X": {"Lp": 2}, "colour": "red"},
    {"theorem": "MainEq", "n": 2, "X": {"Lorentz": 2}},
    {"theorem": "MainEq", "n": 2, "X": {"Lp": 2}, "seed": -5},
])
def test_schema_rejects(bad):
    with pytest.raises(jsonschema.ValidationError):
        ExperimentConfig.from_json(bad)


def test_mode_label():
    assert main_cfg().mode_label == "Exact"
    assert main_cfg(trials=5000).mode_label == "MonteCarlo(5000)"


# ----------------------------------------------------------------------
# experiments


def test_single_function_ratio_is_one():
    for p in (0.5, 1, 2):
        cfg = main_cfg(n=1, X=SpaceSpec.lp(p), E=ell(p))
        for r in run_corpus(cfg, 5):
            assert r.ratio == pytest.approx(1.0, rel=1e-12)


def test_modular_ratio_band():
    cfg = main_cfg(theorem="Modular", X=OrliczFunction.power(2), E=ell(2), n=4)
    for r in run_corpus(cfg, 20):
        assert 0.5 - 1e-9 <= r.ratio <= 1 + 1e-9


def test_degenerate_family():
    cfg = main_cfg(family=FamilySpec(budget=1e-6, mass_denominator=2))
    r = run_experiment(cfg, 0)
    assert r.degenerate and r.ratio == 1.0 and r.lhs == r.rhs == 0


def test_vanishing_rhs_is_an_error(monkeypatch):
    monkeypatch.setattr(harness, "evaluate_rhs", lambda cfg, fs: 0.0)
    with pytest.raises(RuntimeError):
        run_experiment(main_cfg(), 0)


def test_runs_are_deterministic_and_thread_independent():
    cfg = main_cfg(theorem="Modular", X=OrliczFunction.power(1.5), E=SeqSpaceSpec.weak_ell1(),
                   trials=1000, n=4)
    serial = write_reports(run_corpus(cfg, 8, threads=1))
    assert write_reports(run_corpus(cfg, 8, threads=4)) == serial
    assert write_reports(run_corpus(cfg, 8, threads=1)) == serial
    assert run_corpus(cfg, 4, start=4)[0].row() == run_experiment(cfg, 4).row()


def test_family_does_not_depend_on_mode():
    cfg = main_cfg()
    assert [f.atoms for f in family_for(cfg, 3)] == [f.atoms for f in family_for(cfg.replace(trials=1000), 3)]


@pytest.mark.parametrize("cfg", [
    main_cfg(),
    main_cfg(X=SpaceSpec.lp_plus_lq(1, 2), E=SeqSpaceSpec.ellinfty()),
    main_cfg(theorem="Modular", X=OrliczFunction.power(2), E=SeqSpaceSpec.weak_ell1()),
    main_cfg(theorem="CorollaryPQ", X=SpaceSpec.lp_cap_lq(3, 1), E=None),
], ids=["lp", "lp+lq", "modular", "corollary"])
def test_monte_carlo_agrees_with_exact(cfg):
    fs = family_for(cfg, 0)
    exact = evaluate_lhs_exact(cfg, fs)
    est, se = evaluate_lhs_mc(cfg, fs, substream(1, 0, 1), trials=20_000)
    assert abs(est - exact) <= 5 * se + 1e-12


# ----------------------------------------------------------------------
# output


def reports(k):
    return run_corpus(main_cfg(n=2), k)


def test_csv_line_counts():
    assert write_reports([]) == ",".join(CSV_COLUMNS) + "\n"
    assert write_reports(reports(1)).count("\n") == 2
    assert write_reports(reports(100)).count("\n") == 101


def test_csv_roundtrip_is_exact():
    rs = reports(5)
    rows = list(csv.DictReader(io.StringIO(write_reports(rs))))
    for r, row in zip(rs, rows):
        assert float(row["lhs"]) == r.lhs and float(row["ratio"]) == r.ratio
        assert row["degenerate"] in ("true", "false") and int(row["trial"]) == r.trial


def test_json_output():
    rs = reports(3)
    data = json.loads(write_reports(rs, "json"))
    assert [d["trial"] for d in data] == [0, 1, 2]
    assert data[0]["rhs"] == rs[0].rhs
    with pytest.raises(ValueError):
        write_reports(rs, "xml")


def test_corpus_csv_reports_the_path(tmp_path):
    out = tmp_path / "r.csv"
    assert corpus_csv(reports(2), out) == str(out)
    assert out.read_text().count("\n") == 3
    bad = tmp_path / "missing" / "r.csv"
    with pytest.raises(OSError, match="missing"):
        corpus_csv(reports(1), bad)
