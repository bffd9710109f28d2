"""Augmentation planning and class-rebalancing baselines."""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Mapping, Optional

import numpy as np

from .core import Manifest
from .curation import group_rng
from .errors import ValidationError

STRATEGIES = ("ros", "rus", "threshold", "threshold_ros")


@dataclass(frozen=True)
class ClassPlan:
    real: int
    keep: int
    pbda: int
    iida: int

    @property
    def total(self) -> int:
        return self.keep + self.pbda + self.iida

    @property
    def deficit(self) -> int:
        return self.pbda + self.iida


@dataclass(frozen=True)
class AugmentationPlan:
    classes: dict  # label -> ClassPlan, sorted by label
    target_per_class: int
    mix_pbda_percent: float

    def to_json(self) -> dict:
        return {
            "target_per_class": self.target_per_class,
            "mix_pbda_percent": self.mix_pbda_percent,
            "classes": {
                label: {"real": p.real, "keep": p.keep, "pbda": p.pbda, "iida": p.iida}
                for label, p in self.classes.items()
            },
        }


def round_half_up(value: Decimal) -> int:
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def plan_augmentation(counts: Mapping[str, int], target: int, mix_pbda_percent: float) -> AugmentationPlan:
    if not counts:
        raise ValidationError("cannot plan an empty class list")
    if target < 1:
        raise ValidationError(f"target per class must be >= 1, got {target}")
    if not 0 <= mix_pbda_percent <= 100:
        raise ValidationError(f"mix_pbda_percent must be in [0, 100], got {mix_pbda_percent}")
    share = Decimal(str(mix_pbda_percent)) / 100
    classes = {}
    for label in sorted(counts):
        real = int(counts[label])
        if real < 0:
            raise ValidationError(f"class {label!r} has negative count {real}")
        deficit = max(0, target - real)
        pbda = round_half_up(deficit * share)
        classes[label] = ClassPlan(real, min(real, target), pbda, deficit - pbda)
    return AugmentationPlan(classes, int(target), mix_pbda_percent)


def choose_subset(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """k of range(n) uniformly without replacement, returned in ascending order."""
    if k >= n:
        return np.arange(n)
    return np.sort(rng.choice(n, size=k, replace=False))


def cap_to_plan(manifest: Manifest, plan: AugmentationPlan, seed: int) -> Manifest:
    """Real samples kept under the plan; over-target classes are undersampled."""
    kept_ids = set()
    for label, members in manifest.by_label().items():
        cp = plan.classes.get(label)
        if cp is None:
            raise ValidationError(f"class {label!r} missing from plan")
        chosen = choose_subset(len(members), cp.keep, group_rng(seed, "cap:" + label))
        kept_ids.update(members[i].id for i in chosen)
    return manifest.filter(lambda s: s.id in kept_ids)


@dataclass(frozen=True)
class SamplingStrategy:
    kind: str
    reference_class: Optional[str] = None

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValidationError(f"unknown sampling strategy {self.kind!r}")
        if self.kind.startswith("threshold") and not self.reference_class:
            raise ValidationError(f"strategy {self.kind!r} needs a reference class")


def target_counts(counts: Mapping[str, int], strategy: SamplingStrategy) -> dict:
    if not counts:
        raise ValidationError("manifest has no classes")
    for label, n in counts.items():
        if n < 1:
            raise ValidationError(f"class {label!r} is empty")
    kind = strategy.kind
    if kind == "ros":
        top = max(counts.values())
        return {c: top for c in counts}
    if kind == "rus":
        low = min(counts.values())
        return {c: low for c in counts}
    ref = strategy.reference_class
    if ref not in counts:
        raise ValidationError(f"unknown reference class {ref!r}")
    level = counts[ref]
    if kind == "threshold":
        return {c: min(n, level) for c, n in counts.items()}
    return {c: level for c in counts}


def resample(manifest: Manifest, strategy: SamplingStrategy, seed: int = 0) -> Manifest:
    """Rebalance by random over/undersampling.

    Undersampled classes keep their original order. Oversampled classes
    keep every original record and append duplicates drawn with
    replacement; each duplicate gets the id ``<id>__dup<k>``.
    """
    groups = manifest.by_label()
    goal = target_counts({c: len(m) for c, m in groups.items()}, strategy)
    kept_ids = set()
    extras = []
    for label in sorted(groups):
        members = groups[label]
        rng = group_rng(seed, f"{strategy.kind}:{label}")
        want = goal[label]
        if want <= len(members):
            kept_ids.update(members[i].id for i in choose_subset(len(members), want, rng))
            continue
        kept_ids.update(s.id for s in members)
        picks = rng.integers(0, len(members), size=want - len(members))
        for k, i in enumerate(picks):
            src = members[int(i)]
            extras.append(replace(src, id=f"{src.id}__dup{k}"))
    out = [s for s in manifest.samples if s.id in kept_ids] + extras
    return Manifest(tuple(out), class_names=manifest.class_names)


def class_weights(counts: Mapping[str, int]) -> dict:
    """Inverse-frequency weights N / (C * n_c)."""
    if not counts:
        raise ValidationError("no classes")
    for label, n in counts.items():
        if n < 1:
            raise ValidationError(f"class {label!r} has zero count")
    total = sum(counts.values())
    c = len(counts)
    return {label: total / (c * n) for label, n in counts.items()}
