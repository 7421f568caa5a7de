import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import atoms_of, families, unit_laws
from rearrkit.measure import (
    Ambient,
    CapacityError,
    DiscreteDistribution,
    dilate,
    dilate_sequence,
    disjoint_sum,
    distribution_function,
    max_of_independent,
    merge_atoms,
    power,
    product_atoms,
    quantile_transform,
    rearrangement,
    rearrangement_dominated,
    rearrangement_sequence,
    restrict_head,
    split_at_level,
    sum_of_independent,
)

D = DiscreteDistribution
two_step = D.from_atoms([(2, 0.5), (1, 0.5)])


# ----------------------------------------------------------------------
# construction and serialization


def test_atoms_are_sorted_and_merged():
    d = D.from_atoms([(1, 0.2), (3, 0.1), (1, 0.3)])
    assert d.atoms == [(3.0, 0.1), (1.0, 0.5)]


def test_values_within_tolerance_merge_to_the_larger():
    d = D.from_atoms([(1.0, 0.25), (1.0 + 1e-14, 0.25)])
    assert len(d) == 1 and d.masses[0] == 0.5 and d.values[0] == 1.0 + 1e-14


def test_unit_interval_mass_is_capped():
    with pytest.raises(ValueError):
        D.from_atoms([(1, 0.7), (2, 0.7)])
    assert D.from_atoms([(1, 0.7), (2, 0.7)], ambient="halfline").total_mass == pytest.approx(1.4)


@pytest.mark.parametrize("bad", [[(-1, 0.5)], [(1, -0.5)], [(math.inf, 0.5)], [(1, math.nan)]])
def test_invalid_atoms_rejected(bad):
    with pytest.raises(ValueError):
        D.from_atoms(bad)


def test_arrays_are_read_only():
    with pytest.raises(ValueError):
        two_step.values[0] = 5


def test_json_roundtrip():
    text = two_step.to_json()
    assert json.loads(text) == {"ambient": "unit", "atoms": [[2.0, 0.5], [1.0, 0.5]]}
    assert D.from_json(text) == two_step
    with pytest.raises(ValueError):
        D.from_dict({"values": []})


@given(unit_laws(dyadic=False))
def test_json_roundtrip_property(d):
    assert D.from_json(d.to_json()) == d


def test_merge_atoms_drops_nonpositive_mass():
    v, m = merge_atoms(np.array([1.0, 2.0]), np.array([0.0, 0.5]))
    assert v.tolist() == [2.0] and m.tolist() == [0.5]


# ----------------------------------------------------------------------
# distribution function and rearrangement


def test_distribution_function_examples():
    assert distribution_function(two_step, 1) == 0.5
    assert distribution_function(D.constant(1.0), 1) == 0
    assert distribution_function(two_step, 10) == 0
    with pytest.raises(ValueError):
        distribution_function(two_step, -0.1)


def test_rearrangement_examples():
    assert rearrangement(two_step, 0.25) == 2
    assert rearrangement(two_step, 0.75) == 1
    assert rearrangement(D.constant(1.0), 2) == 0
    with pytest.raises(ValueError):
        rearrangement(two_step, 0)


def test_rearrangement_is_right_continuous_at_steps():
    assert rearrangement(two_step, 0.5) == 1
    assert rearrangement(two_step, 1.0) == 0


def test_rearrangement_sequence_examples():
    f = disjoint_sum([D.constant(2.0), D.constant(1.0)])
    assert rearrangement_sequence(f, 2).tolist() == [2, 1, 0]
    assert rearrangement_sequence(D.from_atoms([(1, 0.5)]), 1).tolist() == [1, 0]
    g = D.from_atoms([(3, 1.5), (1, 1.5)], ambient="halfline")
    assert rearrangement_sequence(g, 3).tolist() == [3, 3, 1, 0]


@given(unit_laws(), st.lists(st.integers(0, 64), min_size=1, max_size=10))
def test_rearrangement_matches_oracle(d, ts):
    atoms = atoms_of(d)
    for t in ts:
        t = (t + 1) / 64
        assert rearrangement(d, t) == float(oracles.mu(atoms, t))
        assert distribution_function(d, t) == pytest.approx(float(oracles.dist_fn(atoms, t)), abs=1e-15)


@given(unit_laws(dyadic=False))
def test_rearrangement_non_increasing_and_vanishes_past_support(d):
    ts = np.linspace(1e-6, 1.5, 200)
    vals = [rearrangement(d, t) for t in ts]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert rearrangement(d, d.total_mass + 1e-9) == 0


@given(unit_laws(dyadic=False), st.floats(0.01, 0.99))
def test_quantile_transform_is_mu(d, u):
    assert quantile_transform(d, np.array([u]))[0] == rearrangement(d, u)


# ----------------------------------------------------------------------
# disjoint sums, dilations, powers, splits


def test_disjoint_sum_examples():
    h = D.from_atoms([(1, 0.5)])
    assert disjoint_sum([h, h]).atoms == [(1.0, 1.0)]
    s = disjoint_sum([D.from_atoms([(2, 0.3)]), D.from_atoms([(1, 0.4)])])
    assert s.atoms == [(2.0, 0.3), (1.0, 0.4)] and s.ambient is Ambient.HALFLINE


@given(families(n_max=6), st.lists(st.integers(0, 600), min_size=1, max_size=20))
def test_disjoint_sum_adds_distribution_functions_exactly(fs, ss):
    f = disjoint_sum(fs)
    for s in ss:
        s = s / 64
        assert distribution_function(f, s) == math.fsum(distribution_function(g, s) for g in fs)


def test_dilate_examples():
    assert dilate(D.constant(1.0), 0.5).atoms == [(1.0, 0.5)]
    d = dilate(D.from_atoms([(2, 0.5)]), 3)
    assert d.atoms == [(2.0, 1.5)] and d.ambient is Ambient.HALFLINE
    assert dilate(D.from_atoms([(2, 0.5)]), 1).ambient is Ambient.UNIT
    with pytest.raises(ValueError):
        dilate(two_step, 0)


@given(unit_laws(), st.sampled_from([0.25, 0.5, 2.0, 4.0]), st.integers(1, 63))
def test_dilation_commutes_with_rearrangement(d, s, k):
    t = k / 64
    assert rearrangement(dilate(d, s), s * t) == rearrangement(d, t)
    assert dilate(dilate(d, s), 1 / s).atoms == d.atoms


def test_dilate_sequence_examples():
    assert dilate_sequence([1, 0.5], 2).tolist() == [1, 1, 0.5, 0.5]
    assert dilate_sequence([3, 2, 1], 1).tolist() == [3, 2, 1]
    assert dilate_sequence(np.ones(5), 7).size == 35
    with pytest.raises(ValueError):
        dilate_sequence([1], 0)


def test_power_examples():
    assert power(D.from_atoms([(2, 0.5)]), 2).atoms == [(4.0, 0.5)]
    assert power(two_step, 1) == two_step
    with pytest.raises(ValueError):
        power(two_step, 0)


@given(unit_laws(dyadic=False), st.floats(0.1, 5), st.floats(0.01, 0.99))
def test_power_commutes_with_rearrangement(d, p, t):
    assert rearrangement(power(d, p), t) == pytest.approx(rearrangement(d, t) ** p, rel=1e-12)


def test_split_examples():
    d = D.from_atoms([(2, 0.3), (1, 0.5)])
    head, tail = split_at_level(d, 1)
    assert head.atoms == [(2.0, 0.3)] and tail.atoms == [(1.0, 0.5)]
    head, tail = split_at_level(d, 0)
    assert head == d and len(tail) == 0
    head, tail = split_at_level(d, 5)
    assert len(head) == 0 and tail == d


@given(unit_laws(), st.integers(0, 70))
def test_split_conserves_atoms(d, c):
    head, tail = split_at_level(d, c / 8)
    merged = disjoint_sum([head, tail]).as_unit() if len(head) + len(tail) else D.zero()
    assert merged.atoms == d.nonzero().atoms


def test_restrict_head_keeps_first_unit():
    f = D.from_atoms([(3, 0.5), (2, 1.0), (1, 1.0)], ambient="halfline")
    assert restrict_head(f).atoms == [(3.0, 0.5), (2.0, 0.5)]


# ----------------------------------------------------------------------
# independent sums and maxima


def test_sum_of_two_halves():
    h = D.from_atoms([(1, 0.5)])
    assert sum_of_independent([h, h]).atoms == [(2.0, 0.25), (1.0, 0.5), (0.0, 0.25)]
    assert sum_of_independent([h]).atoms == [(1.0, 0.5), (0.0, 0.5)]


def test_max_of_two_halves():
    h = D.from_atoms([(1, 0.5)])
    assert max_of_independent([h, h]).atoms == [(1.0, 0.75), (0.0, 0.25)]
    assert max_of_independent([h]).nonzero() == h


@pytest.mark.parametrize("n,q", [(1, 0.3), (3, 0.25), (5, 0.1)])
def test_max_of_iid_closed_form(n, q):
    m = max_of_independent([D.from_atoms([(1, q)])] * n)
    assert m.nonzero().masses[0] == pytest.approx(1 - (1 - q) ** n, rel=1e-14)


@given(families(n_max=4))
def test_sum_and_max_match_enumeration(fs):
    for got, want in ((sum_of_independent(fs), oracles.sum_law([atoms_of(f) for f in fs])),
                      (max_of_independent(fs), oracles.max_law([atoms_of(f) for f in fs]))):
        assert got.values.tolist() == [float(v) for v, _ in want]
        np.testing.assert_allclose(got.masses, [float(m) for _, m in want], rtol=1e-12, atol=1e-15)


@given(families(n_max=5))
def test_sum_mean_is_linear(fs):
    assert sum_of_independent(fs).mean() == pytest.approx(math.fsum(f.mean() for f in fs), rel=1e-12)


def test_sum_of_independent_capacity():
    d = D.from_arrays(np.arange(1, 10), np.full(9, 0.1))
    with pytest.raises(CapacityError):
        sum_of_independent([d] * 8)
    with pytest.raises(CapacityError):
        list(product_atoms([d] * 8))


def test_halfline_inputs_rejected():
    with pytest.raises(ValueError):
        sum_of_independent([D.from_atoms([(1, 2.0)], ambient="halfline")])


@given(families(n_max=4))
def test_product_atoms_weights_and_points(fs):
    total = 0.0
    for pts, w in product_atoms(fs, chunk=4):
        assert pts.shape[1] == len(fs)
        total += w.sum()
    assert total == pytest.approx(1.0, abs=1e-12)


def test_sum_law_within_dkw_band():
    rng = np.random.default_rng(11)
    fs = [D.from_atoms([(3, 0.2), (1, 0.5)]), D.from_atoms([(2, 0.4)]), D.from_atoms([(0.5, 0.9)])]
    law = sum_of_independent(fs)
    T = 100_000
    draws = sum(quantile_transform(f, rng.random(T)) for f in fs)
    eps = math.sqrt(math.log(2 / 0.001) / (2 * T))
    for s in np.concatenate([law.values, law.values + 0.01]):
        emp = np.mean(draws > s)
        assert abs(emp - distribution_function(law, s)) <= eps


# ----------------------------------------------------------------------
# rearrangement domination


def test_domination_example():
    g = D.from_atoms([(1, 0.8)])
    m = D.from_atoms([(1, 0.64)])
    assert rearrangement_dominated(g, m, dilation=2)[0]
    assert not rearrangement_dominated(g, m, dilation=1)[0]


def test_domination_uses_factor_on_values():
    low = D.from_atoms([(3, 0.5)])
    up = D.from_atoms([(1, 0.5)])
    assert rearrangement_dominated(low, up, factor=3)[0]
    assert not rearrangement_dominated(low, up, factor=2.9)[0]
