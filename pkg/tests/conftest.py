import math
import os
import sys

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from rearrkit.measure import DiscreteDistribution  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# dyadic values and masses keep sums exact in floating point
dyadic_value = st.integers(1, 64).map(lambda k: k / 8)


@st.composite
def unit_laws(draw, max_atoms=3, max_support=1.0, dyadic=True):
    k = draw(st.integers(1, max_atoms))
    values = draw(st.lists(dyadic_value, min_size=k, max_size=k, unique=True))
    if dyadic:
        weights = draw(st.lists(st.integers(1, 16), min_size=k, max_size=k))
        # power-of-two denominator large enough to fit the support budget
        denom = 2 ** math.ceil(math.log2(sum(weights) / max_support))
        masses = [w / denom for w in weights]
    else:
        masses = draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k))
        s = sum(masses)
        masses = [m * max_support / s * draw(st.floats(0.05, 1.0)) for m in masses]
    return DiscreteDistribution.from_arrays(values, masses)


@st.composite
def families(draw, n_min=1, n_max=4, max_atoms=3, joint=False):
    n = draw(st.integers(n_min, n_max))
    budget = 1.0 / n if joint else 1.0
    return [draw(unit_laws(max_atoms=max_atoms, max_support=budget)) for _ in range(n)]


def atoms_of(d):
    return [(float(v), float(m)) for v, m in zip(d.values, d.masses)]


def rng(seed=0):
    return np.random.default_rng(seed)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
