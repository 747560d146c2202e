"""Model space for group testing with inhibitors and hybrid items.

A :class:`ModelSpec` fixes how a pooled test reacts to the special items it
contains: the defective semantics (classical, threshold or complex), the
inhibitor semantics (none, classical, threshold or complex), how hybrid items
pick a role, how outcomes inside an unspecified threshold band are resolved,
and the outcome-noise budget.  A :class:`GroundTruth` is one concrete
assignment of roles to ``n`` items.

Item indices are 0-based everywhere in this package.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

import numpy as np

from ggti.errors import ValidationError


class ItemType(enum.Enum):
    NEGATIVE = "negative"
    DEFECTIVE = "defective"
    INHIBITOR = "inhibitor"
    HYBRID = "hybrid"


def _windows(pairs) -> tuple[tuple[int, int], ...]:
    return tuple((int(lo), int(hi)) for lo, hi in pairs)


# --- defective semantics ---------------------------------------------------


@dataclass(frozen=True)
class ClassicalDefectives:
    """Positive iff the pool holds at least one defective."""


@dataclass(frozen=True)
class ThresholdDefectives:
    """Negative with at most ``lower`` defectives, positive with at least ``upper``."""

    lower: int
    upper: int

    @property
    def gap(self) -> int:
        return self.upper - self.lower - 1


@dataclass(frozen=True)
class ComplexDefectives:
    """One threshold window per defective sub-population ``D_a``."""

    windows: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "windows", _windows(self.windows))

    @property
    def gaps(self) -> tuple[int, ...]:
        return tuple(hi - lo - 1 for lo, hi in self.windows)


DefectiveModel = Union[ClassicalDefectives, ThresholdDefectives, ComplexDefectives]


# --- inhibitor semantics ---------------------------------------------------


@dataclass(frozen=True)
class NoInhibitors:
    pass


@dataclass(frozen=True)
class ClassicalInhibitors:
    """Any inhibitor in the pool forces a negative outcome."""


@dataclass(frozen=True)
class ThresholdInhibitors:
    """At least ``upper`` inhibitors force a negative; at most ``lower`` are harmless."""

    lower: int
    upper: int

    @property
    def gap(self) -> int:
        return self.upper - self.lower - 1


@dataclass(frozen=True)
class ComplexInhibitors:
    windows: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "windows", _windows(self.windows))

    @property
    def gaps(self) -> tuple[int, ...]:
        return tuple(hi - lo - 1 for lo, hi in self.windows)


InhibitorModel = Union[NoInhibitors, ClassicalInhibitors, ThresholdInhibitors, ComplexInhibitors]


# --- hybrid role policies --------------------------------------------------


def stable_bit(*parts) -> int:
    """Deterministic pseudo-random bit keyed on ``parts``.

    Independent of ``PYTHONHASHSEED``, call order and process.
    """
    key = "\x1f".join(str(p) for p in parts).encode()
    return hashlib.blake2b(key, digest_size=8).digest()[0] & 1


@dataclass(frozen=True)
class PerRunRole:
    """Each hybrid item keeps one role for the whole run.

    ``roles`` overrides the ``default`` role for selected item indices.
    """

    default: ItemType = ItemType.DEFECTIVE
    roles: tuple[tuple[int, ItemType], ...] = ()

    def __post_init__(self):
        roles = self.roles.items() if isinstance(self.roles, Mapping) else self.roles
        object.__setattr__(self, "roles", tuple(sorted((int(j), ItemType(r)) for j, r in roles)))

    def role(self, item: int, test_id: int) -> ItemType:
        for j, r in self.roles:
            if j == item:
                return r
        return self.default


@dataclass(frozen=True)
class PerTestRole:
    """A hybrid item's role is a pure function of (item, test id, seed)."""

    seed: int = 0

    def role(self, item: int, test_id: int) -> ItemType:
        bit = stable_bit("hybrid", self.seed, item, test_id)
        return ItemType.DEFECTIVE if bit else ItemType.INHIBITOR


HybridPolicy = Union[PerRunRole, PerTestRole]


# --- gap resolution --------------------------------------------------------


@dataclass(frozen=True)
class AlwaysNegative:
    pass


@dataclass(frozen=True)
class AlwaysPositive:
    pass


@dataclass(frozen=True)
class RandomSeeded:
    seed: int = 0


@dataclass(frozen=True)
class Adversarial:
    """Resolve every band against the classical reading of the pool.

    A defective count inside its band reads negative (hides the defectives);
    an inhibitor count inside its band does not inhibit.
    """


GapPolicy = Union[AlwaysNegative, AlwaysPositive, RandomSeeded, Adversarial]


@dataclass(frozen=True)
class NoiseSpec:
    """Flip budget ``z``; ``mode`` is ``"random"`` or ``"adversarial"``."""

    z: int = 0
    mode: str = "random"
    seed: int = 0


@dataclass(frozen=True)
class ModelSpec:
    defective: DefectiveModel = field(default_factory=ClassicalDefectives)
    inhibitor: InhibitorModel = field(default_factory=NoInhibitors)
    hybrid: HybridPolicy = field(default_factory=PerRunRole)
    gap: GapPolicy = field(default_factory=AlwaysNegative)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    d: int = 1
    h: int = 0
    b: int = 0

    @property
    def m0(self) -> int:
        return max(self.d, self.h, self.b)

    @property
    def defective_components(self) -> int:
        return len(self.defective.windows) if isinstance(self.defective, ComplexDefectives) else 1

    @property
    def inhibitor_components(self) -> int:
        return len(self.inhibitor.windows) if isinstance(self.inhibitor, ComplexInhibitors) else 1


# --- ground truth ----------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    """Role of every item plus complex-model component labels.

    ``defective_group[j]`` is the index of the sub-population ``D_a`` item ``j``
    joins when it acts as a defective (defective and hybrid items), and ``-1``
    for every other item.  ``inhibitor_group`` is the same for ``H_a``.
    """

    roles: tuple[ItemType, ...]
    defective_group: tuple[int, ...] = None
    inhibitor_group: tuple[int, ...] = None

    def __post_init__(self):
        roles = tuple(ItemType(r) for r in self.roles)
        object.__setattr__(self, "roles", roles)
        n = len(roles)
        for name, acting in (
            ("defective_group", (ItemType.DEFECTIVE, ItemType.HYBRID)),
            ("inhibitor_group", (ItemType.INHIBITOR, ItemType.HYBRID)),
        ):
            groups = getattr(self, name)
            if groups is None:
                groups = tuple(0 if r in acting else -1 for r in roles)
            groups = tuple(int(g) for g in groups)
            if len(groups) != n:
                raise ValidationError(f"{name} has length {len(groups)}, expected {n}")
            for r, g in zip(roles, groups):
                if (r in acting) != (g >= 0):
                    raise ValidationError(f"{name} inconsistent with roles")
            object.__setattr__(self, name, groups)

    @classmethod
    def from_sets(
        cls,
        n: int,
        D: Iterable[int] = (),
        H: Iterable[int] = (),
        B: Iterable[int] = (),
        defective_group: Mapping[int, int] | None = None,
        inhibitor_group: Mapping[int, int] | None = None,
    ) -> "GroundTruth":
        roles = [ItemType.NEGATIVE] * n
        for items, role in ((D, ItemType.DEFECTIVE), (H, ItemType.INHIBITOR), (B, ItemType.HYBRID)):
            for j in items:
                if not 0 <= j < n:
                    raise ValidationError(f"item {j} outside population of size {n}")
                if roles[j] is not ItemType.NEGATIVE:
                    raise ValidationError(f"item {j} assigned two roles")
                roles[j] = role
        dg = ig = None
        if defective_group is not None:
            dg = [-1] * n
            for j in range(n):
                if roles[j] in (ItemType.DEFECTIVE, ItemType.HYBRID):
                    dg[j] = defective_group.get(j, 0)
        if inhibitor_group is not None:
            ig = [-1] * n
            for j in range(n):
                if roles[j] in (ItemType.INHIBITOR, ItemType.HYBRID):
                    ig[j] = inhibitor_group.get(j, 0)
        return cls(tuple(roles), dg, ig)

    @property
    def n(self) -> int:
        return len(self.roles)

    def _members(self, role: ItemType) -> frozenset[int]:
        return frozenset(j for j, r in enumerate(self.roles) if r is role)

    @property
    def D(self) -> frozenset[int]:
        return self._members(ItemType.DEFECTIVE)

    @property
    def H(self) -> frozenset[int]:
        return self._members(ItemType.INHIBITOR)

    @property
    def B(self) -> frozenset[int]:
        return self._members(ItemType.HYBRID)

    @property
    def support(self) -> frozenset[int]:
        return frozenset(j for j, r in enumerate(self.roles) if r is not ItemType.NEGATIVE)

    def support_mask(self) -> np.ndarray:
        return np.array([r is not ItemType.NEGATIVE for r in self.roles], dtype=bool)

    def defective_parts(self, c: int) -> tuple[frozenset[int], ...]:
        """Partition of ``D`` into ``D_1..D_c`` (hybrids excluded)."""
        return tuple(
            frozenset(j for j in self.D if self.defective_group[j] == a) for a in range(c)
        )

    def inhibitor_parts(self, c: int) -> tuple[frozenset[int], ...]:
        return tuple(
            frozenset(j for j in self.H if self.inhibitor_group[j] == a) for a in range(c)
        )

    def restrict(self, mask) -> "GroundTruth":
        """Same truth with every item outside ``mask`` turned negative.

        This is ``diag(g) x`` for a 0/1 row ``g``.
        """
        mask = np.asarray(mask, dtype=bool)
        roles = tuple(r if keep else ItemType.NEGATIVE for r, keep in zip(self.roles, mask))
        dg = tuple(g if keep else -1 for g, keep in zip(self.defective_group, mask))
        ig = tuple(g if keep else -1 for g, keep in zip(self.inhibitor_group, mask))
        return GroundTruth(roles, dg, ig)


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class SpecValidation:
    violations: tuple[str, ...]
    canonical: ModelSpec | None
    defective_gaps: tuple[int, ...] = ()
    inhibitor_gaps: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_invalid(self) -> ModelSpec:
        if self.violations:
            raise ValidationError("; ".join(self.violations), self.violations)
        return self.canonical


def _check_window(lo, hi, errors):
    if lo < 0 or hi <= lo:
        errors.append(f"invalid threshold window ({lo}, {hi})")


def _canonical_defective(model: DefectiveModel) -> DefectiveModel:
    if isinstance(model, ComplexDefectives) and len(model.windows) == 1:
        model = ThresholdDefectives(*model.windows[0])
    if isinstance(model, ThresholdDefectives) and (model.lower, model.upper) == (0, 1):
        model = ClassicalDefectives()
    return model


def _canonical_inhibitor(model: InhibitorModel) -> InhibitorModel:
    if isinstance(model, ComplexInhibitors) and len(model.windows) == 1:
        model = ThresholdInhibitors(*model.windows[0])
    if isinstance(model, ThresholdInhibitors) and model.upper == 1:
        model = ClassicalInhibitors()
    return model


def validate_spec(spec: ModelSpec, n: int) -> SpecValidation:
    """Check every invariant of ``spec`` for a population of ``n`` items.

    Reducible models are rewritten to their simplest equivalent in
    ``canonical``: a single-component complex model becomes a threshold
    model, and a threshold model with upper threshold 1 becomes classical.
    """
    errors: list[str] = []
    d, h, b = spec.d, spec.h, spec.b
    if min(d, h, b) < 0:
        errors.append("negative item bound")
    if d + h + b < 1:
        errors.append("no special items: need 1 <= d + h + b")
    if d + h + b > n:
        errors.append(f"overfull population: d + h + b = {d + h + b} > n = {n}")

    dgaps: tuple[int, ...] = (0,)
    defective = spec.defective
    if isinstance(defective, ThresholdDefectives):
        _check_window(defective.lower, defective.upper, errors)
        dgaps = (defective.gap,)
    elif isinstance(defective, ComplexDefectives):
        if not defective.windows:
            errors.append("empty decomposition")
        for lo, hi in defective.windows:
            _check_window(lo, hi, errors)
        dgaps = defective.gaps
    elif not isinstance(defective, ClassicalDefectives):
        errors.append(f"unknown defective model {defective!r}")

    igaps: tuple[int, ...] = ()
    inhibitor = spec.inhibitor
    if isinstance(inhibitor, ThresholdInhibitors):
        _check_window(inhibitor.lower, inhibitor.upper, errors)
        igaps = (inhibitor.gap,)
    elif isinstance(inhibitor, ComplexInhibitors):
        if not inhibitor.windows:
            errors.append("empty decomposition")
        for lo, hi in inhibitor.windows:
            _check_window(lo, hi, errors)
        igaps = inhibitor.gaps
    elif isinstance(inhibitor, ClassicalInhibitors):
        igaps = (0,)
    elif isinstance(inhibitor, NoInhibitors):
        if h > 0:
            errors.append("inhibitor items require an inhibitor model")
        if b > 0:
            errors.append("hybrid items require an inhibitor model")
    else:
        errors.append(f"unknown inhibitor model {inhibitor!r}")

    if isinstance(spec.hybrid, PerRunRole):
        allowed = (ItemType.DEFECTIVE, ItemType.INHIBITOR)
        if spec.hybrid.default not in allowed or any(r not in allowed for _, r in spec.hybrid.roles):
            errors.append("hybrid roles must be defective or inhibitor")
    elif not isinstance(spec.hybrid, PerTestRole):
        errors.append(f"unknown hybrid policy {spec.hybrid!r}")

    if not isinstance(spec.gap, (AlwaysNegative, AlwaysPositive, RandomSeeded, Adversarial)):
        errors.append(f"unknown gap policy {spec.gap!r}")
    if spec.noise.z < 0:
        errors.append("negative noise budget")
    if spec.noise.mode not in ("random", "adversarial"):
        errors.append(f"unknown noise mode {spec.noise.mode!r}")

    if errors:
        return SpecValidation(tuple(errors), None, dgaps, igaps)
    canonical = replace(
        spec,
        defective=_canonical_defective(defective),
        inhibitor=_canonical_inhibitor(inhibitor),
    )
    return SpecValidation((), canonical, dgaps, igaps)


# --- model-space size ------------------------------------------------------

MODEL_SPACE_FACTORS = {
    "defective_types": 2**3 - 1,
    "inhibitor_types": 2**3,
    "hybrid_types": 2**9,
    "outcome_setting": 2,
    "testing_strategy": 2,
    "criteria": 2**6 - 1,
}


@dataclass(frozen=True)
class ModelSpaceCount:
    factors: dict[str, int]

    @property
    def total(self) -> int:
        return math.prod(self.factors.values())


def enumerate_model_space(**overrides: int) -> ModelSpaceCount:
    """Number of instance classes as the product of the six choice counts.

    Keyword arguments replace individual factors (by name).
    """
    unknown = set(overrides) - set(MODEL_SPACE_FACTORS)
    if unknown:
        raise ValidationError(f"unknown model-space factors: {sorted(unknown)}")
    return ModelSpaceCount({**MODEL_SPACE_FACTORS, **overrides})


# --- sampling --------------------------------------------------------------


def _random_composition(items: np.ndarray, parts: int, rng: np.random.Generator) -> list[int]:
    """Label ``items`` (already shuffled) with ``parts`` non-empty groups."""
    k = len(items)
    if parts > k:
        raise ValidationError(f"decomposition larger than set ({parts} parts for {k} items)")
    cuts = np.sort(rng.choice(np.arange(1, k), size=parts - 1, replace=False)) if parts > 1 else []
    labels = np.zeros(k, dtype=int)
    for cut in cuts:
        labels[cut:] += 1
    return labels.tolist()


def sample_ground_truth(n: int, spec: ModelSpec, seed: int) -> GroundTruth:
    """Uniformly random truth with exactly ``d``, ``h`` and ``b`` special items."""
    spec = validate_spec(spec, n).raise_if_invalid()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    D = perm[: spec.d]
    H = perm[spec.d : spec.d + spec.h]
    B = perm[spec.d + spec.h : spec.d + spec.h + spec.b]

    dgroup = igroup = None
    if isinstance(spec.defective, ComplexDefectives):
        c = len(spec.defective.windows)
        dgroup = dict(zip(D.tolist(), _random_composition(D, c, rng)))
        dgroup.update(zip(B.tolist(), rng.integers(c, size=len(B)).tolist()))
    if isinstance(spec.inhibitor, ComplexInhibitors):
        c = len(spec.inhibitor.windows)
        igroup = dict(zip(H.tolist(), _random_composition(H, c, rng)))
        igroup.update(zip(B.tolist(), rng.integers(c, size=len(B)).tolist()))
    return GroundTruth.from_sets(n, D.tolist(), H.tolist(), B.tolist(), dgroup, igroup)


# --- JSON document form ----------------------------------------------------


def _model_to_dict(model) -> dict:
    if isinstance(model, (ClassicalDefectives, ClassicalInhibitors)):
        return {"type": "classical"}
    if isinstance(model, NoInhibitors):
        return {"type": "none"}
    if isinstance(model, (ThresholdDefectives, ThresholdInhibitors)):
        return {"type": "threshold", "window": [model.lower, model.upper]}
    return {"type": "complex", "windows": [list(w) for w in model.windows]}


def _model_from_dict(doc, defective: bool):
    if isinstance(doc, str):
        doc = {"type": doc}
    kind = doc.get("type")
    if kind == "classical":
        return ClassicalDefectives() if defective else ClassicalInhibitors()
    if kind == "none" and not defective:
        return NoInhibitors()
    if kind == "threshold":
        lo, hi = doc["window"]
        return ThresholdDefectives(lo, hi) if defective else ThresholdInhibitors(lo, hi)
    if kind == "complex":
        return ComplexDefectives(doc["windows"]) if defective else ComplexInhibitors(doc["windows"])
    raise ValidationError(f"unknown {'defective' if defective else 'inhibitor'} model {kind!r}")


def _hybrid_to_dict(policy: HybridPolicy) -> dict:
    if isinstance(policy, PerTestRole):
        return {"type": "per_test", "seed": policy.seed}
    return {
        "type": "per_run",
        "default": policy.default.value,
        "roles": {str(j): r.value for j, r in policy.roles},
    }


def _hybrid_from_dict(doc) -> HybridPolicy:
    if isinstance(doc, str):
        doc = {"type": doc}
    if doc.get("type") == "per_test":
        return PerTestRole(int(doc.get("seed", 0)))
    if doc.get("type") == "per_run":
        roles = {int(j): ItemType(r) for j, r in doc.get("roles", {}).items()}
        return PerRunRole(ItemType(doc.get("default", "defective")), roles)
    raise ValidationError(f"unknown hybrid policy {doc.get('type')!r}")


_GAP_NAMES = {
    AlwaysNegative: "always_negative",
    AlwaysPositive: "always_positive",
    RandomSeeded: "random",
    Adversarial: "adversarial",
}


def _gap_to_dict(policy: GapPolicy) -> dict:
    doc = {"type": _GAP_NAMES[type(policy)]}
    if isinstance(policy, RandomSeeded):
        doc["seed"] = policy.seed
    return doc


def parse_gap_policy(doc) -> GapPolicy:
    if isinstance(doc, str):
        doc = {"type": doc}
    for cls, name in _GAP_NAMES.items():
        if doc.get("type") == name:
            return cls(int(doc.get("seed", 0))) if cls is RandomSeeded else cls()
    raise ValidationError(f"unknown gap policy {doc.get('type')!r}")


def spec_to_dict(spec: ModelSpec, n: int, seed: int = 0) -> dict:
    return {
        "n": n,
        "d": spec.d,
        "h": spec.h,
        "b": spec.b,
        "defective_model": _model_to_dict(spec.defective),
        "inhibitor_model": _model_to_dict(spec.inhibitor),
        "hybrid_policy": _hybrid_to_dict(spec.hybrid),
        "gap_policy": _gap_to_dict(spec.gap),
        "noise": {"z": spec.noise.z, "mode": spec.noise.mode, "seed": spec.noise.seed},
        "seed": seed,
    }


def spec_from_dict(doc: Mapping) -> tuple[ModelSpec, int, int]:
    """Inverse of :func:`spec_to_dict`; returns ``(spec, n, seed)``."""
    try:
        noise = doc.get("noise", {})
        spec = ModelSpec(
            defective=_model_from_dict(doc.get("defective_model", "classical"), True),
            inhibitor=_model_from_dict(doc.get("inhibitor_model", "none"), False),
            hybrid=_hybrid_from_dict(doc.get("hybrid_policy", "per_run")),
            gap=parse_gap_policy(doc.get("gap_policy", "always_negative")),
            noise=NoiseSpec(int(noise.get("z", 0)), noise.get("mode", "random"), int(noise.get("seed", 0))),
            d=int(doc.get("d", 0)),
            h=int(doc.get("h", 0)),
            b=int(doc.get("b", 0)),
        )
        return spec, int(doc["n"]), int(doc.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed model spec document: {exc}") from exc


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "n": truth.n,
        "roles": [r.value for r in truth.roles],
        "defective_group": list(truth.defective_group),
        "inhibitor_group": list(truth.inhibitor_group),
    }


def truth_from_dict(doc: Mapping) -> GroundTruth:
    try:
        roles = tuple(ItemType(r) for r in doc["roles"])
        if "n" in doc and int(doc["n"]) != len(roles):
            raise ValidationError("truth document: n does not match roles")
        return GroundTruth(roles, doc.get("defective_group"), doc.get("inhibitor_group"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed truth document: {exc}") from exc
