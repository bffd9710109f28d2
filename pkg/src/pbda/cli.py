"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .balance import SamplingStrategy, STRATEGIES, class_weights, plan_augmentation, resample
from .core import BBox, load_embeddings, load_manifest, read_image, save_manifest, write_image
from .curation import DEFAULT_THRESHOLD, DedupConfig, deduplicate, dumps_pairs, select_pairs
from .errors import PBDAError, ValidationError
from .pipeline import JobError, PipelineConfig, run_pipeline, stats
from .poisson import DEFAULT_TOL, poisson_blend
from .roi import RoiSearchConfig, roi_score, select_roi

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _bbox(text: str) -> BBox:
    try:
        parts = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bbox must be x,y,w,h integers, got {text!r}")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError(f"bbox must be x,y,w,h, got {text!r}")
    try:
        return BBox(*parts)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _emit(obj, out):
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_dedup(args):
    manifest = load_manifest(args.manifest)
    table = load_embeddings(args.embeddings)
    kept = deduplicate(manifest, table, DedupConfig(args.dedup_threshold, args.seed))
    save_manifest(kept, args.out)
    logging.info("kept %d of %d samples", len(kept), len(manifest))


def cmd_pairs(args):
    manifest = load_manifest(args.manifest)
    table = load_embeddings(args.embeddings)
    normals = manifest.filter(lambda s: s.label == args.normal_class)
    lesions = [
        s for s in manifest.samples
        if s.label != args.normal_class and (args.label is None or s.label == args.label)
    ]
    out = dumps_pairs(select_pairs(s, normals, table, args.pairs_k) for s in lesions)
    if args.out:
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)


def cmd_roi(args):
    source = read_image(args.source)
    target = read_image(args.target)
    res = select_roi(source, args.src_bbox, target, RoiSearchConfig(stride=args.roi_stride))
    _emit({"bbox": res.bbox.to_list(), "score": res.score,
           "candidates_evaluated": res.candidates_evaluated}, args.out)


def cmd_blend(args):
    source = read_image(args.source)
    target = read_image(args.target)
    dst = args.dst_bbox
    score = None
    if dst is None:
        roi = select_roi(source, args.src_bbox, target, RoiSearchConfig(stride=args.roi_stride))
        dst, score = roi.bbox, roi.score
    else:
        score = roi_score(source, args.src_bbox, target, dst)
    res = poisson_blend(source, args.src_bbox, target, dst, tol=args.solver_tol)
    write_image(res.image, args.out)
    _emit({"dst_bbox": dst.to_list(), "roi_score": score,
           "iterations": list(res.solve.iterations)}, None)


def cmd_plan(args):
    counts = load_manifest(args.manifest).counts()
    plan = plan_augmentation(counts, args.target_per_class, args.mix_pbda_percent)
    _emit(plan.to_json(), args.out)


def cmd_balance(args):
    manifest = load_manifest(args.manifest)
    if args.strategy == "weights":
        _emit(class_weights(manifest.counts()), args.out)
        return
    out = resample(manifest, SamplingStrategy(args.strategy, args.reference_class), args.seed)
    save_manifest(out, args.out)


def cmd_stats(args):
    table = stats(load_manifest(args.manifest))
    if args.json:
        _emit(table, None)
        return
    print(f"{'split':<10} {'label':<20} {'images':>8} {'bboxes':>8}")
    for split, rows in table["splits"].items():
        for label, row in rows.items():
            print(f"{split or '-':<10} {label:<20} {row['images']:>8} {row['bboxes']:>8}")


def cmd_run(args):
    cfg = PipelineConfig(
        manifest=args.manifest,
        embeddings=args.embeddings,
        output_dir=args.output_dir,
        target_per_class=args.target_per_class,
        mix_pbda_percent=args.mix_pbda_percent,
        seed=args.seed,
        dedup_threshold=args.dedup_threshold,
        pairs_k=args.pairs_k,
        roi_stride=args.roi_stride,
        solver_tol=args.solver_tol,
        iida_dir=args.iida_dir,
        workers=args.workers,
        normal_class=args.normal_class,
        image_root=args.image_root,
    )
    res = run_pipeline(cfg)
    logging.info("wrote %d samples to %s (%.2fs)", len(res.manifest), args.output_dir, res.wall_time)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pbda", description="Poisson blending data augmentation pipeline")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, *names):
        if "manifest" in names:
            sp.add_argument("--manifest", type=Path, required=True)
        if "embeddings" in names:
            sp.add_argument("--embeddings", type=Path, required=True)
        if "seed" in names:
            sp.add_argument("--seed", type=int, default=0)
        if "stride" in names:
            sp.add_argument("--roi-stride", type=int, default=8)
        if "normal" in names:
            sp.add_argument("--normal-class", default="normal")

    sp = sub.add_parser("dedup", help="remove near-duplicate frames per patient")
    common(sp, "manifest", "embeddings", "seed")
    sp.add_argument("--dedup-threshold", type=float, default=DEFAULT_THRESHOLD)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_dedup)

    sp = sub.add_parser("pairs", help="nearest normal targets for each lesion")
    common(sp, "manifest", "embeddings", "normal")
    sp.add_argument("--pairs-k", type=int, default=1)
    sp.add_argument("--label", help="only lesions of this class")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_pairs)

    sp = sub.add_parser("roi", help="best placement of a source box in a target image")
    common(sp, "stride")
    sp.add_argument("--source", type=Path, required=True)
    sp.add_argument("--src-bbox", type=_bbox, required=True)
    sp.add_argument("--target", type=Path, required=True)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_roi)

    sp = sub.add_parser("blend", help="seamless-clone one source box into a target image")
    common(sp, "stride")
    sp.add_argument("--source", type=Path, required=True)
    sp.add_argument("--src-bbox", type=_bbox, required=True)
    sp.add_argument("--target", type=Path, required=True)
    sp.add_argument("--dst-bbox", type=_bbox, help="default: ROI search")
    sp.add_argument("--solver-tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--out", type=Path, required=True)
    sp.set_defaults(func=cmd_blend)

    sp = sub.add_parser("plan", help="per-class real/PBDA/IIDA counts")
    common(sp, "manifest")
    sp.add_argument("--target-per-class", type=int, required=True)
    sp.add_argument("--mix-pbda-percent", type=float, default=100.0)
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("balance", help="ROS/RUS/thresholding baselines or class weights")
    common(sp, "manifest", "seed")
    sp.add_argument("--strategy", choices=STRATEGIES + ("weights",), required=True)
    sp.add_argument("--reference-class")
    sp.add_argument("--out", type=Path)
    sp.set_defaults(func=cmd_balance)

    sp = sub.add_parser("stats", help="counts per split and class")
    common(sp, "manifest")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("run", help="full pipeline")
    common(sp, "manifest", "embeddings", "seed", "stride", "normal")
    sp.add_argument("--output-dir", type=Path, required=True)
    sp.add_argument("--dedup-threshold", type=float, default=DEFAULT_THRESHOLD)
    sp.add_argument("--pairs-k", type=int, default=1)
    sp.add_argument("--solver-tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--target-per-class", type=int, required=True)
    sp.add_argument("--mix-pbda-percent", type=float, default=100.0)
    sp.add_argument("--iida-dir", type=Path)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--image-root", type=Path, help="default: the manifest's directory")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command == "balance" and args.strategy != "weights" and args.out is None:
        parser.error("balance --out is required for resampling strategies")
    try:
        args.func(args)
    except JobError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if isinstance(exc.cause, ValidationError) else EXIT_RUNTIME
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (PBDAError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
