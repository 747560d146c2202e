"""Simulation and decoding for group testing with inhibitors and hybrid items."""

from ggti.decode import (
    DecodedSets,
    PerfectPair,
    algorithm1_decode,
    brute_force_decode,
    comp_decode,
    make_single_isolation_pair,
)
from ggti.errors import GGTIError, ScaleError, ValidationError
from ggti.matrix import MeasurementMatrix, tensor_product
from ggti.model import GroundTruth, ItemType, ModelSpec, sample_ground_truth, validate_spec
from ggti.oracle import run_tests

__version__ = "0.1.0"

__all__ = [
    "DecodedSets",
    "GGTIError",
    "GroundTruth",
    "ItemType",
    "MeasurementMatrix",
    "ModelSpec",
    "PerfectPair",
    "ScaleError",
    "ValidationError",
    "algorithm1_decode",
    "brute_force_decode",
    "comp_decode",
    "make_single_isolation_pair",
    "run_tests",
    "sample_ground_truth",
    "tensor_product",
    "validate_spec",
]
