"""Test outcomes: the pool rule ``test(S)``, the matrix product ``T . x``, noise.

Evaluation of one pool runs in a fixed order.  Hybrid items in the pool are
first given a single effective role for this test.  The inhibitor stage runs
next and may force the outcome negative; only if it does not does the
defective stage decide the outcome.  Counts that fall strictly inside a
threshold window are resolved by the spec's gap policy.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterator, Sequence

import numpy as np

from ggti.errors import MatrixFormatError, ScaleError, ValidationError
from ggti.matrix import MeasurementMatrix
from ggti.model import (
    Adversarial,
    AlwaysNegative,
    AlwaysPositive,
    ClassicalDefectives,
    ClassicalInhibitors,
    ComplexDefectives,
    ComplexInhibitors,
    GroundTruth,
    ItemType,
    ModelSpec,
    NoInhibitors,
    NoiseSpec,
    RandomSeeded,
    ThresholdDefectives,
    ThresholdInhibitors,
    stable_bit,
)

ADVERSARY_LIMIT = 200_000


@dataclass(frozen=True)
class TestContext:
    """Everything a single test evaluation may depend on."""

    __test__ = False

    truth: GroundTruth
    spec: ModelSpec
    test_id: int = 0

    def __post_init__(self):
        if self.test_id < 0:
            raise ValidationError("test_id must be non-negative")


def _band(ctx: TestContext, stage: str, component, pool: tuple[int, ...]) -> int:
    """Resolve a count strictly inside a threshold window.

    In the defective stage the result is the outcome bit.  In the inhibitor
    stage 0 means the pool is inhibited and 1 means evaluation continues.
    """
    policy = ctx.spec.gap
    if isinstance(policy, AlwaysNegative):
        return 0
    if isinstance(policy, AlwaysPositive):
        return 1
    if isinstance(policy, RandomSeeded):
        return stable_bit("gap", policy.seed, ctx.test_id, stage, component, pool)
    if isinstance(policy, Adversarial):
        return 1 if stage == "inhibitor" else 0
    raise ValidationError(f"unknown gap policy {policy!r}")


def _window(count: int, lo: int, hi: int) -> int | None:
    """1 / 0 outside the window, ``None`` strictly inside it."""
    if count >= hi:
        return 1
    if count <= lo:
        return 0
    return None


def test_subset(S, ctx: TestContext) -> int:
    """Outcome (0 or 1) of one test on the item set ``S``."""
    truth, spec = ctx.truth, ctx.spec
    # negatives never influence a test, not even the gap resolution
    pool = tuple(j for j in sorted({int(j) for j in S}) if truth.roles[j] is not ItemType.NEGATIVE)
    defectives: list[int] = []
    inhibitors: list[int] = []
    for j in pool:
        role = truth.roles[j]
        if role is ItemType.HYBRID:
            role = spec.hybrid.role(j, ctx.test_id)
        if role is ItemType.DEFECTIVE:
            defectives.append(j)
        elif role is ItemType.INHIBITOR:
            inhibitors.append(j)

    inhibitor = spec.inhibitor
    if inhibitors and not isinstance(inhibitor, NoInhibitors):
        if isinstance(inhibitor, ClassicalInhibitors):
            return 0
        if isinstance(inhibitor, ThresholdInhibitors):
            state = _window(len(inhibitors), inhibitor.lower, inhibitor.upper)
            if state == 1 or (state is None and not _band(ctx, "inhibitor", 0, pool)):
                return 0
        elif isinstance(inhibitor, ComplexInhibitors):
            counts = [0] * len(inhibitor.windows)
            for j in inhibitors:
                a = truth.inhibitor_group[j]
                if a < len(counts):
                    counts[a] += 1
            states = [_window(c, lo, hi) for c, (lo, hi) in zip(counts, inhibitor.windows)]
            if 1 in states:
                return 0
            if None in states and not _band(ctx, "inhibitor", 0, pool):
                return 0
        else:
            raise ValidationError(f"unknown inhibitor model {inhibitor!r}")

    defective = spec.defective
    if isinstance(defective, ClassicalDefectives):
        return int(bool(defectives))
    if isinstance(defective, ThresholdDefectives):
        state = _window(len(defectives), defective.lower, defective.upper)
        return state if state is not None else _band(ctx, "defective", 0, pool)
    if isinstance(defective, ComplexDefectives):
        counts = [0] * len(defective.windows)
        for j in defectives:
            a = truth.defective_group[j]
            if a < len(counts):
                counts[a] += 1
        for a, (c, (lo, hi)) in enumerate(zip(counts, defective.windows)):
            state = _window(c, lo, hi)
            if state == 1 or (state is None and _band(ctx, "defective", a, pool)):
                return 1
        return 0
    raise ValidationError(f"unknown defective model {defective!r}")


test_subset.__test__ = False


def _check_dims(T: MeasurementMatrix, truth: GroundTruth):
    if T.n != truth.n:
        raise ValidationError(f"dimension mismatch: matrix has {T.n} columns, truth has {truth.n} items")


def _is_plain(truth: GroundTruth, spec: ModelSpec) -> bool:
    return (
        isinstance(spec.defective, ClassicalDefectives)
        and isinstance(spec.inhibitor, (NoInhibitors, ClassicalInhibitors))
        and ItemType.HYBRID not in truth.roles
    )


def iter_outcomes(
    T: MeasurementMatrix, truth: GroundTruth, spec: ModelSpec, first_test_id: int = 0
) -> Iterator[int]:
    """Lazily yield ``y_i = test(supp(T_i) & supp(x))`` row by row."""
    _check_dims(T, truth)
    pools = T.dense & truth.support_mask()
    for i in range(T.t):
        yield test_subset(np.flatnonzero(pools[i]), TestContext(truth, spec, first_test_id + i))


def run_tests(
    T: MeasurementMatrix, truth: GroundTruth, spec: ModelSpec, first_test_id: int = 0
) -> np.ndarray:
    """Noiseless outcome vector ``T . x`` as a ``uint8`` array.

    Row ``i`` is evaluated with test id ``first_test_id + i``, so a block of a
    larger design can be evaluated on its own with matching ids.
    """
    _check_dims(T, truth)
    if _is_plain(truth, spec):
        roles = truth.roles
        dmask = np.array([r is ItemType.DEFECTIVE for r in roles])
        y = (T.dense & dmask).any(axis=1)
        if isinstance(spec.inhibitor, ClassicalInhibitors):
            hmask = np.array([r is ItemType.INHIBITOR for r in roles])
            y &= ~(T.dense & hmask).any(axis=1)
        return y.astype(np.uint8)
    return np.fromiter(iter_outcomes(T, truth, spec, first_test_id), dtype=np.uint8, count=T.t)


def apply_noise(
    y,
    noise: NoiseSpec,
    adversary: Callable[[np.ndarray], float] | None = None,
    limit: int = ADVERSARY_LIMIT,
) -> np.ndarray:
    """Corrupt up to ``noise.z`` outcomes.

    ``"random"`` mode flips exactly ``z`` distinct positions chosen with
    ``noise.seed``.  ``"adversarial"`` mode searches every flip set of size at
    most ``z`` and keeps the first one maximising ``adversary(noisy_y)``;
    without an adversary it flips the first ``z`` positions.
    """
    y = np.asarray(y, dtype=np.uint8)
    t, z = len(y), noise.z
    if z < 0:
        raise ValidationError("negative noise budget")
    if z > t:
        raise ValidationError(f"noise exceeds test count (z={z}, t={t})")
    out = y.copy()
    if z == 0:
        return out
    if noise.mode == "random":
        rng = np.random.default_rng(noise.seed)
        out[rng.choice(t, size=z, replace=False)] ^= 1
        return out
    if noise.mode != "adversarial":
        raise ValidationError(f"unknown noise mode {noise.mode!r}")
    if adversary is None:
        out[:z] ^= 1
        return out
    total = sum(math.comb(t, k) for k in range(z + 1))
    if total > limit:
        raise ScaleError(f"adversarial search too large ({total} flip sets)")
    best, best_score = out, None
    for k in range(z + 1):
        for flips in combinations(range(t), k):
            cand = y.copy()
            cand[list(flips)] ^= 1
            score = adversary(cand)
            if best_score is None or score > best_score:
                best, best_score = cand, score
    return best


def format_outcomes(y: Sequence[int]) -> str:
    return "".join("1" if v else "0" for v in y) + "\n"


def parse_outcomes(text: str) -> np.ndarray:
    line = text[:-1] if text.endswith("\n") else text
    if "\n" in line or not line:
        raise MatrixFormatError("outcome file must hold exactly one non-empty line")
    if set(line) - {"0", "1"}:
        raise MatrixFormatError("non-binary entry in outcome file")
    return (np.frombuffer(line.encode(), dtype=np.uint8) == ord("1")).astype(np.uint8)


def write_outcomes(y, path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_outcomes(y))


def read_outcomes(path: str | os.PathLike) -> np.ndarray:
    with open(path) as fh:
        return parse_outcomes(fh.read())
