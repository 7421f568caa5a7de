"""Rearrangements, symmetric quasi-norms and the Kruglov operator for
independent random variables with finitely many values."""

from .measure import (
    Ambient,
    CapacityError,
    DiscreteDistribution,
    disjoint_sum,
    dilate,
    distribution_function,
    max_of_independent,
    rearrangement,
    rearrangement_dominated,
    rearrangement_sequence,
    sum_of_independent,
)
from .spaces import (
    OrliczFunction,
    PsiTable,
    SeqSpaceSpec,
    SpaceSpec,
    function_quasinorm,
    mixed_modular_exact,
    mixed_norm_exact,
    rhs_modular,
    rhs_theorem_main,
    sequence_quasinorm,
)
from .kruglov import kruglov_distribution, kruglov_samples, psi_table
from .combinatorics import LevelMatrix, build_level_matrix, c_of_l, junge_statistic
from .families import FamilySpec
from .harness import ExperimentConfig, RatioReport, run_corpus, run_experiment
from .suites import run_suite

__version__ = "0.1.0"
