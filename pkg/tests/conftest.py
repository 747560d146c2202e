import itertools

import pytest

from ggti.model import (
    Adversarial,
    AlwaysNegative,
    AlwaysPositive,
    ClassicalDefectives,
    ClassicalInhibitors,
    ComplexDefectives,
    ComplexInhibitors,
    ModelSpec,
    NoInhibitors,
    PerRunRole,
    PerTestRole,
    RandomSeeded,
    ThresholdDefectives,
    ThresholdInhibitors,
)

# four defective and four inhibitor semantics after canonicalisation
DEFECTIVE_MODELS = [
    ClassicalDefectives(),
    ThresholdDefectives(1, 2),
    ThresholdDefectives(0, 2),
    ComplexDefectives([(0, 1), (1, 2)]),
]
INHIBITOR_MODELS = [
    NoInhibitors(),
    ClassicalInhibitors(),
    ThresholdInhibitors(0, 2),
    ComplexInhibitors([(0, 1), (0, 2)]),
]
GAP_POLICIES = [AlwaysNegative(), AlwaysPositive(), RandomSeeded(11), Adversarial()]
HYBRID_POLICIES = [PerRunRole(), PerTestRole(5)]


def semantics_grid():
    """Every defective x inhibitor pairing with a fixed deterministic policy pair."""
    return list(itertools.product(DEFECTIVE_MODELS, INHIBITOR_MODELS))


def make_spec(defective, inhibitor, d=2, h=2, b=1, gap=None, hybrid=None):
    if isinstance(inhibitor, NoInhibitors):
        h = b = 0
    return ModelSpec(
        defective=defective,
        inhibitor=inhibitor,
        hybrid=hybrid or PerTestRole(3),
        gap=gap or RandomSeeded(7),
        d=d,
        h=h,
        b=b,
    )


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20261018)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
