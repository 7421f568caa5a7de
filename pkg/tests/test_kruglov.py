import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import atoms_of, families, unit_laws
from rearrkit.kruglov import (
    kruglov_distribution,
    kruglov_modular_bound_check,
    kruglov_sample,
    kruglov_samples,
    modular_bound_constant,
    poisson_moment_profile,
    poisson_tail_bound,
    psi_asymptotic,
    psi_table,
    sum_vs_kruglov_check,
)
from rearrkit.measure import CapacityError, DiscreteDistribution, distribution_function
from rearrkit.spaces import OrliczFunction

D = DiscreteDistribution


def test_indicator_gives_poisson_law():
    law = kruglov_distribution(D.constant(1.0)).law
    assert law.values.tolist() == list(range(17, -1, -1))
    for k, m in zip(law.values, law.masses):
        assert m == pytest.approx(math.exp(-1) / math.factorial(int(k)), rel=1e-12)


def test_half_indicator_zero_mass():
    law = kruglov_distribution(D.from_atoms([(1, 0.5)])).law
    assert law.atoms[-1] == (0.0, pytest.approx(math.exp(-0.5), rel=1e-12))


def test_zero_function():
    k = kruglov_distribution(D.zero())
    assert k.law.atoms == [(0.0, 1.0)]


def test_law_matches_term_by_term_enumeration():
    f = D.from_atoms([(2, 0.25), (1, 0.25)])
    want = oracles.poisson_mixture_law(atoms_of(f), 10)
    got = kruglov_distribution(f).law
    got_map = dict(zip(got.values.tolist(), got.masses.tolist()))
    for v, m in want:
        assert got_map.get(float(v), 0.0) == pytest.approx(m, abs=1e-7)


def test_tail_bound_and_truncation():
    assert poisson_tail_bound(0) == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert poisson_tail_bound(17) < 1e-15
    k = kruglov_distribution(D.constant(1.0), N=3)
    assert k.law.total_mass + k.tail_mass_bound == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        kruglov_distribution(D.constant(1.0), N=0)
    with pytest.raises(ValueError):
        kruglov_distribution(D.from_atoms([(1, 2)], ambient="halfline"))


def test_capacity_and_coarsening():
    f = D.from_arrays(np.linspace(1, 2, 30) + np.pi * 1e-3, np.full(30, 1 / 30))
    with pytest.raises(CapacityError):
        kruglov_distribution(f, N=17, cap=10_000)
    k = kruglov_distribution(f, N=6, max_atoms=50)
    assert k.coarsened
    exact = kruglov_distribution(f, N=6).law
    assert k.law.mean() <= exact.mean() * (1 + 1e-12)


@given(unit_laws(dyadic=False))
def test_mean_is_preserved(f):
    assert kruglov_distribution(f).law.mean() == pytest.approx(f.mean(), rel=1e-10)


def test_sampler_within_dkw_band():
    f = D.from_atoms([(3, 0.2), (1, 0.3)])
    law = kruglov_distribution(f).law
    T = 100_000
    draws = kruglov_samples(f, np.random.default_rng(1), T)
    eps = math.sqrt(math.log(2 / 0.001) / (2 * T))
    for s in np.concatenate([law.values[law.values < 20], [0.5, 2.5]]):
        assert abs(np.mean(draws > s) - distribution_function(law, s)) <= eps


def test_single_sampler_mean():
    f = D.from_atoms([(2, 0.5)])
    rng = np.random.default_rng(2)
    draws = [kruglov_sample(f, rng) for _ in range(20_000)]
    assert np.mean(draws) == pytest.approx(1.0, abs=4 * math.sqrt(2 / 20_000) * 2)


# ----------------------------------------------------------------------
# psi


def test_psi_endpoint_and_shape():
    psi = psi_table()
    assert psi(1.0) == pytest.approx(1.0, abs=1e-10)
    assert psi(0.0) == 0
    s = psi.slopes()
    assert np.all(np.diff(psi.psi) >= 0) and np.all(np.diff(s) <= 1e-12)


def test_psi_extra_knots_leave_values_unchanged():
    a, b = psi_table(), psi_table(knots=200)
    t = np.geomspace(1e-10, 1, 500)
    np.testing.assert_allclose(a(t), b(t), rtol=1e-12, atol=1e-300)
    with pytest.raises(ValueError):
        psi_table(knots=-1)


def test_psi_tracks_asymptotic_profile():
    psi = psi_table()
    t = np.geomspace(1e-8, 1 / np.e, 400)
    ratio = psi(t) / psi_asymptotic(t)
    assert np.all((ratio >= 0.1) & (ratio <= 10))


def test_moment_profile():
    rows = poisson_moment_profile([1, 2, 3])
    assert rows[0][1] == pytest.approx(1.0, rel=1e-12)
    assert rows[1][1] == pytest.approx(math.sqrt(2), rel=1e-12)
    assert rows[2][1] == pytest.approx(5 ** (1 / 3), rel=1e-12)
    assert rows[1][2] == pytest.approx(2 / math.log(2 * math.e))
    with pytest.raises(ValueError):
        poisson_moment_profile([0.5])


# ----------------------------------------------------------------------
# modular bound


@pytest.mark.parametrize("C,bell", [(2.0, 5), (4.0, 52)])
def test_modular_constant_is_a_bell_number(C, bell):
    # m^k summed against Poisson(1) weights is the k-th Bell number
    c, const = modular_bound_constant(C)
    assert c == 2 * math.log2(C)
    assert const == pytest.approx(bell, rel=1e-12)


def test_modular_bound_examples():
    res = kruglov_modular_bound_check(OrliczFunction.power(1), D.from_atoms([(1, 0.5)]))
    assert res.lhs == pytest.approx(0.5) and res.rhs == pytest.approx(2.5) and res.holds
    # Kf is Poisson(1/2) here, so E (Kf)^2 = 1/2 + 1/4
    res = kruglov_modular_bound_check(OrliczFunction.power(2), D.from_atoms([(1, 0.5)]))
    assert res.lhs == pytest.approx(0.75, rel=1e-12) and res.rhs == pytest.approx(26) and res.holds
    res = kruglov_modular_bound_check(OrliczFunction.power(2), D.zero())
    assert res.lhs == 0 and res.holds


def test_modular_bound_needs_certificate():
    phi = OrliczFunction("Bare", (), None, lambda t: t)
    with pytest.raises(ValueError):
        kruglov_modular_bound_check(phi, D.constant(1.0))


@given(unit_laws(dyadic=False), st.sampled_from([OrliczFunction.power(1), OrliczFunction.power(2),
                                                 OrliczFunction.power_log(1, 1)]))
def test_modular_bound_holds(f, phi):
    assert kruglov_modular_bound_check(phi, f).holds


# ----------------------------------------------------------------------
# independent sums against the Kruglov law


def test_sum_vs_kruglov_examples():
    h = D.from_atoms([(1, 0.5)])
    holds, slack = sum_vs_kruglov_check([h, h])
    assert holds and slack >= 0
    assert sum_vs_kruglov_check([D.zero()]) == (True, 0.0)
    with pytest.raises(ValueError):
        sum_vs_kruglov_check([D.from_atoms([(1, 0.7)]), D.from_atoms([(1, 0.7)])])
    with pytest.raises(ValueError):
        sum_vs_kruglov_check([])


@given(families(n_max=4, joint=True))
def test_sum_vs_kruglov_holds(fs):
    assert sum_vs_kruglov_check(fs)[0]
