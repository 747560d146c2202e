"""Seeded batch experiments: sample, build, test, corrupt, decode, score."""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, Iterable, Mapping

import numpy as np

from ggti.decode import algorithm1_decode, comp_decode, majority_vote, make_single_isolation_pair
from ggti.errors import GGTIError, TrialError, ValidationError
from ggti.matrix import bernoulli_matrix, repeat_blocks
from ggti.model import ModelSpec, sample_ground_truth, spec_from_dict, spec_to_dict, validate_spec
from ggti.oracle import apply_noise, run_tests

FAMILIES = ("isolation", "bernoulli")

REPORT_COLUMNS = (
    "trial",
    "seed",
    "t",
    "decode_ms",
    "s1",
    "s2",
    "s3",
    "d_covered",
    "h_covered",
    "b_covered",
    "s1_extra",
    "s2_extra",
    "s3_extra",
)


def derive_seed(root: int, *path: int) -> int:
    """Child seed of ``root`` at ``path``; independent of how many siblings exist."""
    seq = np.random.SeedSequence(root, spawn_key=tuple(path))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    """One batch of trials.

    ``family`` is ``"isolation"`` (perfect pair decoded block-wise, ``g_blocks``
    defaults to ``ceil(e m0 ln n)``) or ``"bernoulli"`` (``t`` tests of density
    ``p`` decoded by COMP).  Each block is run ``repetition`` times and
    majority-voted before decoding.
    """

    spec: ModelSpec
    n: int
    family: str = "isolation"
    g_blocks: int | None = None
    t: int | None = None
    p: float | None = None
    repetition: int = 1
    trials: int = 1
    seed: int = 0
    record_timing: bool = True
    output: str | None = None
    format: str = "csv"

    def validate(self) -> ModelSpec:
        problems = list(validate_spec(self.spec, self.n).violations)
        if self.trials < 1:
            problems.append("trial count must be at least 1")
        if self.repetition < 1:
            problems.append("repetition factor must be at least 1")
        elif self.spec.noise.z > 0 and self.repetition % 2 == 0:
            problems.append("repetition factor must be odd when noise is present")
        if self.family not in FAMILIES:
            problems.append(f"unknown matrix family {self.family!r}")
        if self.family == "bernoulli" and (self.t is None or self.p is None):
            problems.append("bernoulli family needs t and p")
        if self.format not in ("csv", "json"):
            problems.append(f"unknown report format {self.format!r}")
        if problems:
            raise ValidationError("; ".join(problems), problems)
        return validate_spec(self.spec, self.n).canonical

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        try:
            spec, n, spec_seed = spec_from_dict(doc["spec"])
            matrix = doc.get("matrix", {})
            return cls(
                spec=spec,
                n=n,
                family=matrix.get("family", "isolation"),
                g_blocks=matrix.get("g_blocks"),
                t=matrix.get("t"),
                p=matrix.get("p"),
                repetition=int(doc.get("repetition", 1)),
                trials=int(doc.get("trials", 1)),
                seed=int(doc.get("seed", spec_seed)),
                record_timing=bool(doc.get("record_timing", True)),
                output=doc.get("output"),
                format=doc.get("format", "csv"),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed experiment config: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "spec": spec_to_dict(self.spec, self.n, self.seed),
            "matrix": {"family": self.family, "g_blocks": self.g_blocks, "t": self.t, "p": self.p},
            "repetition": self.repetition,
            "trials": self.trials,
            "seed": self.seed,
            "record_timing": self.record_timing,
            "output": self.output,
            "format": self.format,
        }


@dataclass(frozen=True)
class TrialReport:
    trial: int
    seed: int
    t: int
    decode_ms: float
    s1: int
    s2: int
    s3: int
    d_covered: bool
    h_covered: bool
    b_covered: bool
    s1_extra: int
    s2_extra: int
    s3_extra: int


def run_trial(cfg: ExperimentConfig, spec: ModelSpec, trial: int, clock: Callable[[], float]) -> TrialReport:
    seed = derive_seed(cfg.seed, trial)
    truth = sample_ground_truth(cfg.n, spec, derive_seed(seed, 0))
    matrix_seed = derive_seed(seed, 1)
    if cfg.family == "isolation":
        pair = make_single_isolation_pair(cfg.n, spec.m0, matrix_seed, cfg.g_blocks)
        T = pair.measurement_matrix()
        block_len = pair.k
    else:
        T = bernoulli_matrix(cfg.t, cfg.n, cfg.p, matrix_seed)
        block_len = T.t
    T_run = repeat_blocks(T, block_len, cfg.repetition)
    y = run_tests(T_run, truth, spec)
    y = apply_noise(y, replace(spec.noise, seed=derive_seed(seed, 2)))
    if cfg.repetition > 1:
        y = majority_vote(y, block_len, cfg.repetition)

    start = clock()
    if cfg.family == "isolation":
        sets = algorithm1_decode(y, pair)
        S1, S2, S3 = sets.S1, sets.S2, sets.S3
    else:
        S1, S2, S3 = comp_decode(y, T), frozenset(), frozenset()
    elapsed = (clock() - start) * 1000.0 if cfg.record_timing else 0.0

    D, H, B = truth.D, truth.H, truth.B
    return TrialReport(
        trial=trial,
        seed=seed,
        t=T_run.t,
        decode_ms=round(elapsed, 3),
        s1=len(S1),
        s2=len(S2),
        s3=len(S3),
        d_covered=D <= S1,
        h_covered=H <= S2,
        b_covered=B <= S3,
        s1_extra=len(S1 - D),
        s2_extra=len(S2 - H),
        s3_extra=len(S3 - B),
    )


def run_experiment(cfg: ExperimentConfig, clock: Callable[[], float] = time.perf_counter) -> list[TrialReport]:
    """Run every trial; trial ``i`` depends only on ``(cfg, i)``.

    Decode times come from ``clock`` and are the only non-deterministic
    field; ``record_timing=False`` zeroes them.
    """
    spec = cfg.validate()
    reports = []
    for trial in range(cfg.trials):
        try:
            reports.append(run_trial(cfg, spec, trial, clock))
        except GGTIError as exc:
            raise TrialError(trial, exc) from exc
    return reports


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def emit_report(reports: Iterable[TrialReport], path: str | os.PathLike, format: str = "csv") -> None:
    reports = list(reports)
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(REPORT_COLUMNS)
            for r in reports:
                writer.writerow(_csv_cell(getattr(r, c)) for c in REPORT_COLUMNS)
    elif format == "json":
        with open(path, "w") as fh:
            json.dump([asdict(r) for r in reports], fh, indent=2)
            fh.write("\n")
    else:
        raise ValidationError(f"unknown report format {format!r}")


def load_report(path: str | os.PathLike, format: str = "csv") -> list[TrialReport]:
    """Read a report written by :func:`emit_report`."""
    types = {f.name: f.type for f in fields(TrialReport)}
    with open(path, newline="") as fh:
        if format == "json":
            return [TrialReport(**row) for row in json.load(fh)]
        rows = list(csv.DictReader(fh))

    def convert(name, text):
        kind = types[name]
        if kind == "bool":
            return text == "true"
        return float(text) if kind == "float" else int(text)

    return [TrialReport(**{k: convert(k, v) for k, v in row.items()}) for row in rows]
