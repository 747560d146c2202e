"""Block decoding over a perfect pair ``(G, M)``, plus two baseline decoders.

The measurement matrix is ``T = G (x) M`` (see :func:`ggti.matrix.tensor_product`),
so the outcome vector splits into ``g`` blocks of ``k = M.t`` bits, block ``i``
being ``M . (diag(G_i) x)``.  Each block is handed to per-family decoders
that only ever see the block bits and ``M``.  A decoder returns the support of
the sparse vector it recovers, or ``None`` when it cannot decode (FAIL).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Callable, Optional

import numpy as np

from ggti.errors import DecoderContractError, ScaleError, ValidationError
from ggti.matrix import (
    MeasurementMatrix,
    bit_test_matrix,
    default_blocks,
    isolation_matrix,
    tensor_product,
)
from ggti.model import ComplexDefectives, ComplexInhibitors, GroundTruth, ModelSpec
from ggti.oracle import iter_outcomes

BlockDecoder = Callable[[np.ndarray, MeasurementMatrix], Optional[frozenset]]

DECODERS: dict[str, BlockDecoder] = {}

BRUTE_FORCE_MAX_N = 14
BRUTE_FORCE_MAX_SPECIAL = 4


def register_decoder(name: str):
    """Register a block decoder under ``name`` for use from configs and the CLI."""

    def wrap(fn: BlockDecoder) -> BlockDecoder:
        if name in DECODERS:
            raise ValueError(f"decoder {name!r} already registered")
        DECODERS[name] = fn
        return fn

    return wrap


def get_decoder(name: str) -> BlockDecoder:
    try:
        return DECODERS[name]
    except KeyError:
        raise ValidationError(f"unknown decoder {name!r}; known: {sorted(DECODERS)}") from None


@register_decoder("bit-test")
def bit_test_decoder(block, M: MeasurementMatrix) -> frozenset | None:
    """Read a single item index off a :func:`ggti.matrix.bit_test_matrix` block.

    A negative all-ones row means the pool held nothing.  Otherwise the bit
    rows spell the index; when several items were pooled the bits are their
    OR and the answer is some (possibly wrong) single item.
    """
    block = np.asarray(block)
    if len(block) != M.t:
        raise ValidationError("block misalignment")
    if not block[-1]:
        return frozenset()
    index = sum(int(bit) << r for r, bit in enumerate(block[:-1]))
    if index >= M.n:
        return None
    return frozenset({index})


@dataclass(frozen=True)
class PerfectPair:
    """Matrices ``G`` (``g x n``) and ``M`` (``k x n``) with their block decoders.

    ``defective_decoder``, ``inhibitor_decoder`` and ``hybrid_decoder`` recover
    pools satisfying the defective, inhibitor and hybrid properties.  A
    missing decoder contributes nothing.  Every answer must have at most
    ``m0`` items.
    """

    G: MeasurementMatrix
    M: MeasurementMatrix
    m0: int
    defective_decoder: BlockDecoder | None = None
    inhibitor_decoder: BlockDecoder | None = None
    hybrid_decoder: BlockDecoder | None = None

    def __post_init__(self):
        if self.G.n != self.M.n:
            raise ValidationError(f"incompatible shapes: {self.G.shape} and {self.M.shape}")
        if self.m0 < 1:
            raise ValidationError("m0 must be at least 1")

    @property
    def g_blocks(self) -> int:
        return self.G.t

    @property
    def k(self) -> int:
        return self.M.t

    @property
    def n(self) -> int:
        return self.G.n

    def measurement_matrix(self) -> MeasurementMatrix:
        return tensor_product(self.G, self.M)


def make_single_isolation_pair(n: int, d: int, seed: int, g_blocks: int | None = None) -> PerfectPair:
    """Random isolating ``G`` with a bit-test ``M``, for classical defectives."""
    if d < 1 or n < 2:
        raise ValidationError("single-isolation pair needs d >= 1 and n >= 2")
    g_blocks = g_blocks or default_blocks(n, d)
    G = isolation_matrix(n, d, g_blocks, seed)
    return PerfectPair(G, bit_test_matrix(n), d, defective_decoder=bit_test_decoder)


def isolated_items(G: MeasurementMatrix, truth: GroundTruth) -> frozenset[int]:
    """Items that are the only non-negative member of at least one row of ``G``."""
    pools = G.dense & truth.support_mask()
    single = pools.sum(axis=1) == 1
    return frozenset(np.flatnonzero(pools[single].any(axis=0)).tolist())


@dataclass(frozen=True)
class DecodedSets:
    """Candidate defective, inhibitor and hybrid sets."""

    S1: frozenset[int]
    S2: frozenset[int]
    S3: frozenset[int]

    def as_lines(self) -> str:
        return "".join(" ".join(map(str, sorted(s))) + "\n" for s in (self.S1, self.S2, self.S3))


def algorithm1_decode(y, pair: PerfectPair) -> DecodedSets:
    """Union the per-block decoder answers into ``(S1, S2, S3)``.

    If ``pair`` is a perfect pair for the truth that produced ``y`` then
    ``D <= S1``, ``H <= S2`` and ``B <= S3``.  Each set has at most
    ``g_blocks * m0`` items regardless.
    """
    y = np.asarray(y, dtype=np.uint8)
    k = pair.k
    if y.ndim != 1 or len(y) != pair.g_blocks * k:
        raise ValidationError(
            f"block misalignment: {len(y)} outcomes for {pair.g_blocks} blocks of {k}"
        )
    found: tuple[set[int], set[int], set[int]] = (set(), set(), set())
    decoders = (pair.defective_decoder, pair.inhibitor_decoder, pair.hybrid_decoder)
    for i in range(pair.g_blocks):
        block = y[i * k : (i + 1) * k]
        for acc, dec in zip(found, decoders):
            if dec is None:
                continue
            support = dec(block, pair.M)
            if support is None:
                continue
            if len(support) > pair.m0:
                raise DecoderContractError(
                    f"decoder returned {len(support)} items, more than m0 = {pair.m0}"
                )
            acc.update(support)
    return DecodedSets(*(frozenset(s) for s in found))


def majority_vote(y, block_len: int, reps: int) -> np.ndarray:
    """Collapse outcomes of a design built by :func:`ggti.matrix.repeat_blocks`."""
    if reps < 1 or reps % 2 == 0:
        raise ValidationError("repetition factor must be odd for a majority vote")
    y = np.asarray(y, dtype=np.uint8)
    if len(y) % (block_len * reps):
        raise ValidationError("block misalignment")
    votes = y.reshape(-1, reps, block_len).sum(axis=1)
    return (votes > reps // 2).astype(np.uint8).reshape(-1)


def comp_decode(y, T: MeasurementMatrix) -> frozenset[int]:
    """Items that appear in no negative test."""
    y = np.asarray(y, dtype=np.uint8)
    if len(y) != T.t:
        raise ValidationError(f"dimension mismatch: {len(y)} outcomes for {T.t} tests")
    excluded = T.dense[y == 0].any(axis=0)
    return frozenset(np.flatnonzero(~excluded).tolist())


def _group_labelings(acting: tuple[int, ...], parts: int | None):
    if parts is None:
        yield None
        return
    for labels in product(range(parts), repeat=len(acting)):
        yield dict(zip(acting, labels))


def enumerate_truths(n: int, spec: ModelSpec):
    """Every role assignment with ``|D| <= d``, ``|H| <= h``, ``|B| <= b``.

    Under complex models every labelling of the acting items into components
    is enumerated as well.
    """
    cd = len(spec.defective.windows) if isinstance(spec.defective, ComplexDefectives) else None
    ci = len(spec.inhibitor.windows) if isinstance(spec.inhibitor, ComplexInhibitors) else None
    items = range(n)
    for kd in range(spec.d + 1):
        for D in combinations(items, kd):
            rest = [j for j in items if j not in D]
            for kh in range(min(spec.h, len(rest)) + 1):
                for H in combinations(rest, kh):
                    rest2 = [j for j in rest if j not in H]
                    for kb in range(min(spec.b, len(rest2)) + 1):
                        for B in combinations(rest2, kb):
                            for dg in _group_labelings(tuple(sorted(D + B)), cd):
                                for ig in _group_labelings(tuple(sorted(H + B)), ci):
                                    yield GroundTruth.from_sets(n, D, H, B, dg, ig)


def brute_force_decode(y, T: MeasurementMatrix, spec: ModelSpec, z: int | None = None) -> frozenset[GroundTruth]:
    """All truths within the spec's bounds whose outcomes are within ``z`` flips of ``y``.

    ``z`` defaults to the spec's noise budget.
    """
    y = np.asarray(y, dtype=np.uint8)
    if len(y) != T.t:
        raise ValidationError(f"dimension mismatch: {len(y)} outcomes for {T.t} tests")
    if T.n > BRUTE_FORCE_MAX_N or spec.d + spec.h + spec.b > BRUTE_FORCE_MAX_SPECIAL:
        raise ScaleError(
            f"oracle scale exceeded (n={T.n}, d+h+b={spec.d + spec.h + spec.b})"
        )
    z = spec.noise.z if z is None else z
    consistent = set()
    for truth in enumerate_truths(T.n, spec):
        misses = 0
        for got, want in zip(iter_outcomes(T, truth, spec), y):
            if got != want:
                misses += 1
                if misses > z:
                    break
        else:
            consistent.add(truth)
    return frozenset(consistent)
