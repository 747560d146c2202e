"""Binary measurement matrices and their constructions.

Rows are tests, columns are items.  Entries are stored bit-packed per row
(``numpy.packbits`` layout); :attr:`MeasurementMatrix.dense` gives a
read-only boolean view for vectorised work.
"""

from __future__ import annotations

import itertools
import math
import os
from functools import cached_property

import numpy as np

from ggti.errors import MatrixFormatError, ScaleError, ValidationError

EXACT_ORDER_LIMIT = 14


class MeasurementMatrix:
    """Immutable ``t x n`` 0/1 matrix."""

    def __init__(self, packed: np.ndarray, t: int, n: int):
        if t < 1 or n < 1:
            raise ValidationError(f"matrix must be at least 1x1, got {t}x{n}")
        packed = np.array(packed, dtype=np.uint8, order="C")
        if packed.shape != (t, (n + 7) // 8):
            raise ValidationError("packed buffer does not match shape")
        packed.setflags(write=False)
        self.t = t
        self.n = n
        self.packed = packed

    @classmethod
    def from_dense(cls, bits) -> "MeasurementMatrix":
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise ValidationError("matrix must be two-dimensional")
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError("non-binary entry")
        t, n = arr.shape
        return cls(np.packbits(arr.astype(bool), axis=1), t, n)

    @classmethod
    def identity(cls, n: int) -> "MeasurementMatrix":
        return cls.from_dense(np.eye(n, dtype=bool))

    @cached_property
    def dense(self) -> np.ndarray:
        out = np.unpackbits(self.packed, axis=1, count=self.n).astype(bool)
        out.setflags(write=False)
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.t, self.n

    def row_support(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.dense[i])

    def column(self, j: int) -> np.ndarray:
        return self.dense[:, j]

    def density(self) -> float:
        return float(self.dense.mean())

    def row_distances(self) -> np.ndarray:
        """Pairwise Hamming distances between rows, from the packed words."""
        xor = self.packed[:, None, :] ^ self.packed[None, :, :]
        return np.bitwise_count(xor).sum(axis=2, dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, MeasurementMatrix):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.packed, other.packed)

    def __hash__(self):
        return hash((self.t, self.n, self.packed.tobytes()))

    def __repr__(self):
        return f"MeasurementMatrix(t={self.t}, n={self.n}, density={self.density():.3f})"


# --- constructions ---------------------------------------------------------


def tensor_product(A: MeasurementMatrix, S: MeasurementMatrix) -> MeasurementMatrix:
    """Stack ``S x diag(A[i])`` for every row ``i`` of ``A``.

    Entry ``(i * s + k, j)`` of the result is ``A[i, j] AND S[k, j]``.
    """
    if A.n != S.n:
        raise ValidationError(f"incompatible shapes: {A.shape} and {S.shape}")
    # the AND of packed rows is the AND of their bits
    packed = A.packed[:, None, :] & S.packed[None, :, :]
    return MeasurementMatrix(packed.reshape(A.t * S.t, -1), A.t * S.t, A.n)


def repeat_blocks(T: MeasurementMatrix, block_len: int, reps: int) -> MeasurementMatrix:
    """Repeat each consecutive block of ``block_len`` rows ``reps`` times in place."""
    if reps < 1 or block_len < 1 or T.t % block_len:
        raise ValidationError("block misalignment")
    blocks = T.packed.reshape(T.t // block_len, 1, block_len, -1)
    packed = np.repeat(blocks, reps, axis=1).reshape(T.t * reps, -1)
    return MeasurementMatrix(packed, T.t * reps, T.n)


def bernoulli_matrix(t: int, n: int, p: float, seed: int) -> MeasurementMatrix:
    if not 0 < p < 1:
        raise ValidationError(f"invalid density {p}")
    rng = np.random.default_rng(seed)
    return MeasurementMatrix.from_dense(rng.random((t, n)) < p)


def bit_test_matrix(n: int) -> MeasurementMatrix:
    """Binary-expansion rows followed by an all-ones row.

    Row ``r`` (for ``r < k - 1``) holds bit ``r`` of each column index, so a
    pool containing exactly one item reports that item's index in binary,
    and the all-ones row tells an empty pool from item 0.
    """
    if n < 1:
        raise ValidationError("bit_test_matrix needs n >= 1")
    bits = math.ceil(math.log2(n)) if n > 1 else 0
    idx = np.arange(n)
    rows = [((idx >> r) & 1).astype(bool) for r in range(bits)]
    rows.append(np.ones(n, dtype=bool))
    return MeasurementMatrix.from_dense(np.vstack(rows))


def default_blocks(n: int, m0: int) -> int:
    """``ceil(e * m0 * ln n)``: rows needed so each of ``m0`` items is isolated w.h.p."""
    return max(1, math.ceil(math.e * m0 * math.log(n)))


def isolation_matrix(n: int, m0: int, g_blocks: int, seed: int) -> MeasurementMatrix:
    """Each entry is 1 independently with probability ``1 / m0``."""
    if m0 < 1 or g_blocks < 1:
        raise ValidationError("isolation_matrix needs m0 >= 1 and g_blocks >= 1")
    if m0 == 1:
        return MeasurementMatrix.from_dense(np.ones((g_blocks, n), dtype=bool))
    rng = np.random.default_rng(seed)
    return MeasurementMatrix.from_dense(rng.random((g_blocks, n)) < 1.0 / m0)


def packing_matrix(n: int, t: int, weight: int, seed: int, max_attempts: int = 200) -> MeasurementMatrix:
    """Constant-weight columns whose pairwise overlap is at most one row.

    Each column is grown row by row from a random order, skipping rows already
    paired with a chosen row by an earlier column.  Such a matrix is
    ``(weight - 1)``-disjunct.
    """
    if weight < 1 or weight > t:
        raise ValidationError("packing weight must lie in [1, t]")
    rng = np.random.default_rng(seed)
    paired = np.zeros((t, t), dtype=bool)
    cols = np.zeros((t, n), dtype=bool)
    for j in range(n):
        for _ in range(max_attempts):
            chosen: list[int] = []
            blocked = np.zeros(t, dtype=bool)
            for r in rng.permutation(t):
                if not blocked[r]:
                    chosen.append(int(r))
                    blocked |= paired[r]
                    blocked[r] = True
                    if len(chosen) == weight:
                        break
            if len(chosen) == weight:
                for a, b in itertools.combinations(chosen, 2):
                    paired[a, b] = paired[b, a] = True
                cols[chosen, j] = True
                break
        else:
            raise ValidationError(f"could not place column {j}; increase t or lower weight")
    return MeasurementMatrix.from_dense(cols)


def disjunct_certificate(T: MeasurementMatrix) -> int:
    """Largest ``d`` for which ``T`` is provably ``d``-disjunct from weights alone.

    A column of weight ``w`` sharing at most ``lam`` rows with any other column
    cannot be covered by ``d`` others when ``d * lam < w``.
    """
    cols = T.dense.astype(np.int64)
    gram = cols.T @ cols
    weights = np.diag(gram).copy()
    np.fill_diagonal(gram, 0)
    lam = int(gram.max()) if T.n > 1 else 0
    if lam == 0:
        return T.n - 1 if weights.min() > 0 else 0
    return int((weights.min() - 1) // lam)


def is_disjunct(T: MeasurementMatrix, d: int) -> bool:
    """Exhaustive check that no column is covered by the union of ``d`` others."""
    cols = T.dense.T
    if math.comb(T.n - 1, d) * T.n > 2_000_000:
        raise ScaleError("oracle scale exceeded")
    for j in range(T.n):
        others = [k for k in range(T.n) if k != j]
        for combo in itertools.combinations(others, d):
            cover = np.logical_or.reduce(cols[list(combo)]) if combo else np.zeros(T.t, bool)
            if not (cols[j] & ~cover).any():
                return False
    return True


# --- zero-gap row ordering -------------------------------------------------


def _check_order(T: MeasurementMatrix, order) -> np.ndarray:
    order = np.asarray(order, dtype=int)
    if order.shape != (T.t,) or not np.array_equal(np.sort(order), np.arange(T.t)):
        raise ValidationError("invalid permutation")
    return order


def zero_gap_cost(T: MeasurementMatrix, order) -> int:
    """Sum of Hamming distances between consecutive rows taken in ``order``."""
    order = _check_order(T, order)
    if T.t == 1:
        return 0
    rows = T.packed[order]
    return int(np.bitwise_count(rows[1:] ^ rows[:-1]).sum())


def _exact_order(dist: np.ndarray) -> tuple[list[int], int]:
    # Held-Karp over Hamiltonian paths; dp[mask, j] = cheapest path covering mask ending at j
    t = len(dist)
    full = 1 << t
    inf = np.iinfo(np.int64).max // 4
    dp = np.full((full, t), inf, dtype=np.int64)
    parent = np.full((full, t), -1, dtype=np.int64)
    for j in range(t):
        dp[1 << j, j] = 0
    for mask in range(1, full):
        row = dp[mask]
        ends = np.flatnonzero(row < inf)
        if ends.size == 0:
            continue
        # best predecessor for every next vertex
        cand = row[ends, None] + dist[ends]
        best = cand.argmin(axis=0)
        vals = cand[best, np.arange(t)]
        for k in range(t):
            if mask >> k & 1:
                continue
            nxt = mask | (1 << k)
            if vals[k] < dp[nxt, k]:
                dp[nxt, k] = vals[k]
                parent[nxt, k] = ends[best[k]]
    last = int(dp[full - 1].argmin())
    cost = int(dp[full - 1, last])
    order, mask = [], full - 1
    while last != -1:
        order.append(last)
        prev = int(parent[mask, last])
        mask ^= 1 << last
        last = prev
    return order[::-1], cost


def _greedy_order(dist: np.ndarray) -> tuple[list[int], int]:
    t = len(dist)
    best_order, best_cost = None, None
    for start in range(t):
        order, cost = [start], 0
        left = set(range(t)) - {start}
        while left:
            cur = order[-1]
            nxt = min(left, key=lambda k: (dist[cur, k], k))
            cost += int(dist[cur, nxt])
            order.append(nxt)
            left.remove(nxt)
        if best_cost is None or cost < best_cost:
            best_order, best_cost = order, cost
    return best_order, best_cost


def min_gap_order(T: MeasurementMatrix, mode: str = "exact") -> tuple[list[int], int]:
    """Row order minimising :func:`zero_gap_cost`.

    ``"exact"`` solves the Hamiltonian-path problem on the row-distance graph
    by subset dynamic programming (``t <= 14``); ``"greedy"`` keeps the best
    nearest-neighbour path over all start rows.
    """
    if T.t == 1:
        return [0], 0
    dist = T.row_distances()
    if mode == "exact":
        if T.t > EXACT_ORDER_LIMIT:
            raise ScaleError(f"instance too large for exact mode (t={T.t} > {EXACT_ORDER_LIMIT})")
        return _exact_order(dist)
    if mode == "greedy":
        return _greedy_order(dist)
    raise ValidationError(f"unknown ordering mode {mode!r}")


def reorder_rows(T: MeasurementMatrix, order) -> MeasurementMatrix:
    order = _check_order(T, order)
    return MeasurementMatrix(T.packed[order], T.t, T.n)


# --- text format -----------------------------------------------------------


def format_matrix(T: MeasurementMatrix) -> str:
    lines = [f"{T.t} {T.n}"]
    lines.extend("".join("1" if v else "0" for v in row) for row in T.dense)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> MeasurementMatrix:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MatrixFormatError("malformed header: empty file")
    header = lines[0].split(" ")
    if len(header) != 2 or not all(h.isdigit() for h in header):
        raise MatrixFormatError(f"malformed header {lines[0]!r}")
    t, n = int(header[0]), int(header[1])
    if t < 1 or n < 1:
        raise MatrixFormatError(f"malformed header {lines[0]!r}")
    body = lines[1:]
    if len(body) != t:
        raise MatrixFormatError(f"row count mismatch: header says {t}, found {len(body)}")
    for i, line in enumerate(body):
        if len(line) != n:
            raise MatrixFormatError(f"ragged row {i}: expected {n} characters, got {len(line)}")
        bad = set(line) - {"0", "1"}
        if bad:
            raise MatrixFormatError(f"non-binary entry {sorted(bad)[0]!r} in row {i}")
    dense = np.frombuffer("".join(body).encode(), dtype=np.uint8).reshape(t, n) == ord("1")
    return MeasurementMatrix.from_dense(dense)


def write_matrix(T: MeasurementMatrix, path: str | os.PathLike) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_matrix(T))


def read_matrix(path: str | os.PathLike) -> MeasurementMatrix:
    with open(path) as fh:
        return parse_matrix(fh.read())
