"""Embedding-space deduplication and lesion/normal pair selection."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .core import EmbeddingTable, Manifest, Sample
from .errors import ValidationError

DEFAULT_THRESHOLD = 356.0


@dataclass(frozen=True)
class DedupConfig:
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        if not self.threshold > 0:
            raise ValidationError(f"dedup threshold must be positive, got {self.threshold}")


@dataclass(frozen=True)
class PairAssignment:
    lesion_id: str
    targets: tuple  # ((normal_id, distance), ...) by increasing distance

    def to_record(self) -> dict:
        return {
            "lesion_id": self.lesion_id,
            "targets": [{"id": t, "distance": d} for t, d in self.targets],
        }


def distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sqrt(np.dot(d, d)))


def _distances_to(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    d = rows - query[None, :]
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def stable_key(text: str) -> int:
    """64-bit key that does not depend on PYTHONHASHSEED."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def group_rng(seed: int, group: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stable_key(group)]))


def _rows_for(samples: Iterable[Sample], table: EmbeddingTable) -> np.ndarray:
    idx = []
    for s in samples:
        if s.embedding_index is None:
            raise ValidationError(f"sample {s.id!r} has no embedding_index")
        if not 0 <= s.embedding_index < table.count:
            raise ValidationError(
                f"sample {s.id!r}: embedding_index {s.embedding_index} outside table"
            )
        idx.append(s.embedding_index)
    return table.rows[np.asarray(idx, dtype=np.intp)].astype(np.float64)


def dedup_group(rows: np.ndarray, threshold: float, rng: np.random.Generator) -> list:
    """Positions (into ``rows``) kept by one pass of sample-keep-drop.

    Repeatedly draws a remaining row uniformly, keeps it, and discards every
    remaining row within ``threshold`` of it. Kept positions come back in
    the order they were drawn.
    """
    remaining = list(range(rows.shape[0]))
    kept = []
    while remaining:
        query = remaining.pop(int(rng.integers(len(remaining))))
        kept.append(query)
        if remaining:
            d = _distances_to(rows[query], rows[remaining])
            remaining = [r for r, di in zip(remaining, d) if di > threshold]
    return kept


def deduplicate(manifest: Manifest, table: EmbeddingTable, cfg: DedupConfig = DedupConfig()) -> Manifest:
    rows = _rows_for(manifest.samples, table)
    groups = {}
    for pos, s in enumerate(manifest.samples):
        groups.setdefault(s.patient_id, []).append(pos)
    keep = set()
    for patient, positions in groups.items():
        rng = group_rng(cfg.seed, patient)
        local = dedup_group(rows[positions], cfg.threshold, rng)
        keep.update(positions[i] for i in local)
    return Manifest(
        tuple(s for pos, s in enumerate(manifest.samples) if pos in keep),
        class_names=manifest.class_names,
    )


def select_pairs(lesion: Sample, normals: Manifest, table: EmbeddingTable, k: int = 1) -> PairAssignment:
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    query = _rows_for([lesion], table)[0]
    candidates = [s for s in normals.samples if s.patient_id != lesion.patient_id]
    if not candidates:
        raise ValidationError(
            f"lesion {lesion.id!r}: no normal sample from a different patient"
        )
    d = _distances_to(query, _rows_for(candidates, table))
    ids = np.array([s.id for s in candidates])
    order = np.lexsort((ids, d))[:k]
    return PairAssignment(lesion.id, tuple((str(ids[i]), float(d[i])) for i in order))


def dumps_pairs(assignments: Iterable[PairAssignment]) -> str:
    return "".join(json.dumps(a.to_record()) + "\n" for a in assignments)
