"""Neuron classification as a group-testing instance.

Excitatory, inhibitory, hybrid and silent (negative) neurons map onto
defective, inhibitor, hybrid and negative items.  Firing is all-or-none,
so every emitted model is gap-free.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from ggti.decode import comp_decode
from ggti.errors import ValidationError
from ggti.matrix import MeasurementMatrix
from ggti.model import (
    AlwaysNegative,
    ClassicalDefectives,
    ClassicalInhibitors,
    GroundTruth,
    ItemType,
    ModelSpec,
    NoInhibitors,
    PerTestRole,
    ThresholdDefectives,
    ThresholdInhibitors,
)
from ggti.oracle import run_tests


class NeuronType(enum.Enum):
    EXCITATORY = "excitatory"
    INHIBITORY = "inhibitory"
    HYBRID = "hybrid"
    NEGATIVE = "negative"


_ITEM_OF = {
    NeuronType.EXCITATORY: ItemType.DEFECTIVE,
    NeuronType.INHIBITORY: ItemType.INHIBITOR,
    NeuronType.HYBRID: ItemType.HYBRID,
    NeuronType.NEGATIVE: ItemType.NEGATIVE,
}


@dataclass(frozen=True)
class NeuronScenario:
    types: tuple[NeuronType, ...]
    stimulus_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "types", tuple(NeuronType(t) for t in self.types))

    @property
    def n(self) -> int:
        return len(self.types)

    @property
    def non_negative(self) -> frozenset[int]:
        return frozenset(j for j, t in enumerate(self.types) if t is not NeuronType.NEGATIVE)

    def count(self, kind: NeuronType) -> int:
        return sum(t is kind for t in self.types)


def map_scenario(
    sc: NeuronScenario,
    stimulus_seed: int,
    excitation_window: tuple[int, int] | None = None,
    inhibition_window: tuple[int, int] | None = None,
) -> tuple[GroundTruth, ModelSpec]:
    """Translate a scenario into a truth and a gap-free model spec.

    Optional windows select threshold semantics; both must have zero gap.
    Hybrid neurons take a per-test role keyed on ``stimulus_seed``.
    """
    if sc.count(NeuronType.INHIBITORY) + sc.count(NeuronType.HYBRID) < 1:
        raise ValidationError("model must include inhibitors")
    if sc.count(NeuronType.EXCITATORY) < 1:
        raise ValidationError("model must include defectives")
    for window in (excitation_window, inhibition_window):
        if window is not None and window[1] - window[0] - 1 != 0:
            raise ValidationError(f"AP all-or-none forbids gaps: window {window}")

    defective = ClassicalDefectives() if excitation_window is None else ThresholdDefectives(*excitation_window)
    inhibitor = ClassicalInhibitors() if inhibition_window is None else ThresholdInhibitors(*inhibition_window)
    truth = GroundTruth(tuple(_ITEM_OF[t] for t in sc.types))
    spec = ModelSpec(
        defective=defective,
        inhibitor=inhibitor,
        hybrid=PerTestRole(stimulus_seed),
        gap=AlwaysNegative(),
        d=len(truth.D),
        h=len(truth.H),
        b=len(truth.B),
    )
    return truth, spec


@dataclass(frozen=True)
class ConnectivityGraph:
    """Pooled node -> neurons it has synapses with."""

    adjacency: tuple[frozenset[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "adjacency", tuple(frozenset(a) for a in self.adjacency))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, set[int]]) -> "ConnectivityGraph":
        size = max(mapping, default=-1) + 1
        return cls(tuple(mapping.get(p, frozenset()) for p in range(size)))

    def incidence(self, n: int) -> np.ndarray:
        inc = np.zeros((len(self.adjacency), n), dtype=bool)
        for p, neurons in enumerate(self.adjacency):
            for j in neurons:
                if not 0 <= j < n:
                    raise ValidationError(f"neuron index {j} outside population of size {n}")
                inc[p, j] = True
        return inc


def graph_closeness(graph: ConnectivityGraph, T: MeasurementMatrix) -> float:
    """Fraction of the design's memberships a pooled-node assignment can realise.

    Tests are matched one-to-one with pooled nodes so as to maximise the number
    of ``(test, neuron)`` memberships that the assigned node reaches; tests
    left without a node realise nothing.  1.0 means ``T`` fits the graph.
    """
    total = int(T.dense.sum())
    if total == 0:
        raise ValidationError("graph closeness undefined for an empty matrix")
    if not graph.adjacency:
        return 0.0
    inc = graph.incidence(T.n).astype(np.int64)
    covered = T.dense.astype(np.int64) @ inc.T
    rows, cols = linear_sum_assignment(covered, maximize=True)
    return float(covered[rows, cols].sum()) / total


def feasible_classify(T: MeasurementMatrix, sc: NeuronScenario) -> tuple[frozenset[int], frozenset[int]]:
    """Split neurons into (negative, non-negative) from multimeter readings.

    A multimeter registers any action potential, so every firing neuron acts
    as a classical defective and nothing inhibits.  Exact whenever ``T`` is
    ``s``-disjunct for ``s`` firing neurons.
    """
    if T.n != sc.n:
        raise ValidationError(f"dimension mismatch: matrix has {T.n} columns, scenario has {sc.n} neurons")
    truth = GroundTruth.from_sets(sc.n, D=sorted(sc.non_negative))
    spec = ModelSpec(ClassicalDefectives(), NoInhibitors(), d=max(1, len(truth.D)))
    y = run_tests(T, truth, spec)
    firing = comp_decode(y, T)
    return frozenset(range(sc.n)) - firing, firing
