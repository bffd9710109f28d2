"""End-to-end augmentation run: dedup, pairing, placement, blending, balancing."""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .balance import AugmentationPlan, cap_to_plan, choose_subset, plan_augmentation
from .core import (
    ImageBuffer,
    Manifest,
    Sample,
    load_embeddings,
    load_manifest,
    read_image,
    save_manifest,
    write_image,
)
from .curation import DedupConfig, deduplicate, group_rng, select_pairs
from .errors import InsufficientInventoryError, PBDAError, ValidationError
from .poisson import poisson_blend
from .roi import RoiSearchConfig, select_roi

log = logging.getLogger(__name__)

IIDA_MANIFEST = "manifest.jsonl"
HISTOGRAM_BIN = 10


@dataclass
class PipelineConfig:
    manifest: Path
    embeddings: Path
    output_dir: Path
    target_per_class: int
    mix_pbda_percent: float = 100.0
    seed: int = 0
    dedup_threshold: float = 356.0
    pairs_k: int = 1
    roi_stride: int = 8
    solver_tol: float = 1e-6
    iida_dir: Optional[Path] = None
    workers: int = 1
    normal_class: str = "normal"
    image_root: Optional[Path] = None

    def validate(self):
        if self.target_per_class < 1:
            raise ValidationError("target_per_class must be >= 1")
        if not 0 <= self.mix_pbda_percent <= 100:
            raise ValidationError("mix_pbda_percent must be in [0, 100]")
        if not self.dedup_threshold > 0:
            raise ValidationError("dedup_threshold must be positive")
        if self.pairs_k < 1:
            raise ValidationError("pairs_k must be >= 1")
        if self.roi_stride < 1:
            raise ValidationError("roi_stride must be >= 1")
        if not self.solver_tol > 0:
            raise ValidationError("solver_tol must be positive")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    def echo(self) -> dict:
        # paths, workers and output location stay out so reruns compare equal
        return {
            "seed": self.seed,
            "dedup_threshold": self.dedup_threshold,
            "pairs_k": self.pairs_k,
            "roi_stride": self.roi_stride,
            "solver_tol": self.solver_tol,
            "target_per_class": self.target_per_class,
            "mix_pbda_percent": self.mix_pbda_percent,
            "normal_class": self.normal_class,
        }


@dataclass(frozen=True)
class BlendJob:
    index: int  # global, fixes the per-job RNG stream
    job_id: str
    label: str
    source: Sample
    target: Sample
    pair_distance: float
    round: int  # how many times this pair was used before


@dataclass
class JobResult:
    sample: Sample
    roi_score: float
    iterations: tuple
    detail: dict = field(default_factory=dict)


@dataclass
class RunResult:
    manifest: Manifest
    plan: AugmentationPlan
    report: dict
    wall_time: float


class JobError(PBDAError):
    """A blend job failed; ``cause`` holds the original exception."""

    def __init__(self, job: BlendJob, cause: Exception):
        self.job = job
        self.cause = cause
        super().__init__(
            f"job {job.job_id} (source {job.source.id}, target {job.target.id}): {cause}"
        )


def safe_name(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text)


def job_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


class _ImageCache:
    def __init__(self):
        self._lock = threading.Lock()
        self._items = {}

    def get(self, path: Path) -> ImageBuffer:
        key = str(path)
        with self._lock:
            hit = self._items.get(key)
        if hit is not None:
            return hit
        img = read_image(path)
        with self._lock:
            return self._items.setdefault(key, img)


def load_inventory(iida_dir: Optional[Path]) -> Manifest:
    if iida_dir is None:
        return Manifest(())
    path = Path(iida_dir) / IIDA_MANIFEST
    if not path.exists():
        return Manifest(())
    return load_manifest(path)


def build_jobs(deduped: Manifest, plan: AugmentationPlan, table, cfg: PipelineConfig) -> list:
    normals = deduped.filter(lambda s: s.label == cfg.normal_class)
    groups = deduped.by_label()
    jobs = []
    for label, cp in plan.classes.items():
        if cp.pbda == 0:
            continue
        if label == cfg.normal_class:
            raise ValidationError(
                f"normal class {label!r} is below target; it cannot be synthesized"
            )
        sources = [s for s in groups.get(label, []) if s.bbox is not None]
        if not sources:
            raise ValidationError(
                f"class {label!r} needs {cp.pbda} PBDA samples but has no samples with a bbox"
            )
        assignments = [select_pairs(s, normals, table, cfg.pairs_k) for s in sources]
        # rank-major order spreads consecutive jobs across lesions
        pairs = []
        for rank in range(cfg.pairs_k):
            for src, a in zip(sources, assignments):
                if rank < len(a.targets):
                    pairs.append((src, a.targets[rank]))
        by_id = {s.id: s for s in normals.samples}
        for j in range(cp.pbda):
            src, (tid, dist) = pairs[j % len(pairs)]
            jobs.append(
                BlendJob(
                    index=len(jobs),
                    job_id=f"pbda-{safe_name(label)}-{j:06d}",
                    label=label,
                    source=src,
                    target=by_id[tid],
                    pair_distance=dist,
                    round=j // len(pairs),
                )
            )
    return jobs


def run_job(job: BlendJob, cfg: PipelineConfig, image_root: Path, out_dir: Path, cache: _ImageCache) -> JobResult:
    source = cache.get(image_root / job.source.path)
    target = cache.get(image_root / job.target.path)
    src_bbox = job.source.bbox
    src_bbox.check_attached(source.width, source.height, "source bbox")
    offset = (0, 0)
    if job.round > 0:
        rng = job_rng(cfg.seed, job.index)
        offset = tuple(int(v) for v in rng.integers(0, cfg.roi_stride, size=2))
    roi = select_roi(source, src_bbox, target, RoiSearchConfig(stride=cfg.roi_stride, offset=offset))
    blend = poisson_blend(source, src_bbox, target, roi.bbox, tol=cfg.solver_tol)
    rel = f"images/{safe_name(job.label)}/{job.job_id}.png"
    write_image(blend.image, out_dir / rel)
    sample = Sample(
        id=job.job_id,
        path=rel,
        label=job.label,
        patient_id=job.target.patient_id,
        split=job.target.split,
        bbox=roi.bbox,
        origin="pbda",
    )
    detail = {
        "id": job.job_id,
        "label": job.label,
        "source_id": job.source.id,
        "source_patient": job.source.patient_id,
        "target_id": job.target.id,
        "target_patient": job.target.patient_id,
        "pair_distance": job.pair_distance,
        "round": job.round,
        "dst_bbox": roi.bbox.to_list(),
        "roi_score": roi.score,
        "roi_candidates": roi.candidates_evaluated,
        "iterations": list(blend.solve.iterations),
    }
    return JobResult(sample, roi.score, blend.solve.iterations, detail)


def _run_jobs(jobs, cfg, image_root, out_dir) -> list:
    cache = _ImageCache()

    def guarded(job):
        try:
            return run_job(job, cfg, image_root, out_dir, cache)
        except PBDAError as exc:
            raise JobError(job, exc) from exc

    if cfg.workers == 1:
        return [guarded(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        # map yields in submission order, independent of completion order
        return list(pool.map(guarded, jobs))


def iteration_histogram(results) -> dict:
    counts = {}
    for r in results:
        for it in r.iterations:
            lo = (it // HISTOGRAM_BIN) * HISTOGRAM_BIN
            counts[lo] = counts.get(lo, 0) + 1
    return {f"{lo}-{lo + HISTOGRAM_BIN - 1}": counts[lo] for lo in sorted(counts)}


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    t0 = time.perf_counter()
    cfg.validate()
    out_dir = Path(cfg.output_dir)
    manifest_path = Path(cfg.manifest)
    image_root = Path(cfg.image_root) if cfg.image_root else manifest_path.parent

    manifest = load_manifest(manifest_path)
    table = load_embeddings(cfg.embeddings)
    manifest.check_embeddings(table)
    if cfg.normal_class not in manifest.class_names:
        raise ValidationError(f"normal class {cfg.normal_class!r} not in manifest")

    deduped = deduplicate(manifest, table, DedupConfig(cfg.dedup_threshold, cfg.seed))
    log.info("dedup kept %d of %d samples", len(deduped), len(manifest))
    plan = plan_augmentation(deduped.counts(), cfg.target_per_class, cfg.mix_pbda_percent)
    kept = cap_to_plan(deduped, plan, cfg.seed)

    inventory = load_inventory(cfg.iida_dir).by_label()
    for label, cp in plan.classes.items():
        if cp.iida > len(inventory.get(label, [])):
            raise InsufficientInventoryError(label, cp.iida, len(inventory.get(label, [])))

    jobs = build_jobs(deduped, plan, table, cfg)
    log.info("running %d blend jobs on %d worker(s)", len(jobs), cfg.workers)
    for label in plan.classes:
        (out_dir / "images" / safe_name(label)).mkdir(parents=True, exist_ok=True)
    results = _run_jobs(jobs, cfg, image_root, out_dir)

    iida_samples = {}
    for label, cp in plan.classes.items():
        if cp.iida == 0:
            continue
        pool = inventory[label]
        picked = choose_subset(len(pool), cp.iida, group_rng(cfg.seed, "iida:" + label))
        chosen = []
        for i in picked:
            s = pool[int(i)]
            rel = f"images/{safe_name(label)}/{safe_name(s.id)}.png"
            write_image(read_image(Path(cfg.iida_dir) / s.path), out_dir / rel)
            chosen.append(Sample(s.id, rel, label, s.patient_id, s.split, s.bbox, None, "iida"))
        iida_samples[label] = chosen

    real_by_label = kept.by_label()
    pbda_by_label = {}
    for r in results:
        pbda_by_label.setdefault(r.sample.label, []).append(r.sample)
    out_samples = []
    for label in plan.classes:
        for s in real_by_label.get(label, []):
            rel = os.path.relpath(image_root / s.path, out_dir)
            out_samples.append(
                Sample(s.id, Path(rel).as_posix(), s.label, s.patient_id, s.split, s.bbox, s.embedding_index, "real")
            )
        out_samples.extend(pbda_by_label.get(label, []))
        out_samples.extend(iida_samples.get(label, []))
    out_manifest = Manifest(tuple(out_samples), class_names=tuple(plan.classes))

    report = build_report(cfg, manifest, deduped, plan, out_manifest, results)
    wall = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    save_manifest(out_manifest, out_dir / "manifest.jsonl")
    _write_json(out_dir / "plan.json", plan.to_json())
    _write_json(out_dir / "report.json", report)
    _write_json(out_dir / "timing.json", {"wall_time_seconds": wall, "workers": cfg.workers})
    return RunResult(out_manifest, plan, report, wall)


def build_report(cfg, manifest, deduped, plan, out_manifest, results) -> dict:
    classes = {}
    for label in plan.classes:
        classes[label] = {"real": 0, "pbda": 0, "iida": 0, "total": 0}
    for s in out_manifest.samples:
        classes[s.label][s.origin] += 1
        classes[s.label]["total"] += 1
    totals = {k: sum(c[k] for c in classes.values()) for k in ("real", "pbda", "iida", "total")}
    scores = [r.roi_score for r in results]
    return {
        "config": cfg.echo(),
        "dedup": {"input": len(manifest), "kept": len(deduped)},
        "plan": plan.to_json(),
        "classes": classes,
        "totals": totals,
        "roi": {
            "jobs": len(results),
            "mean_score": float(np.mean(scores)) if scores else None,
        },
        "solver": {
            "channel_solves": 3 * len(results),
            "iterations_histogram": iteration_histogram(results),
        },
        "jobs": [r.detail for r in results],
    }


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def stats(manifest: Manifest) -> dict:
    """Image and bbox counts per split and label, plus per-label totals."""
    splits = {}
    classes = {}
    for s in manifest.samples:
        row = splits.setdefault(s.split, {}).setdefault(s.label, {"images": 0, "bboxes": 0})
        tot = classes.setdefault(s.label, {"images": 0, "bboxes": 0})
        row["images"] += 1
        tot["images"] += 1
        if s.bbox is not None:
            row["bboxes"] += 1
            tot["bboxes"] += 1
    return {
        "splits": {sp: dict(sorted(rows.items())) for sp, rows in sorted(splits.items())},
        "classes": dict(sorted(classes.items())),
    }


__all__ = [
    "BlendJob",
    "JobError",
    "PipelineConfig",
    "RunResult",
    "build_jobs",
    "run_pipeline",
    "stats",
]