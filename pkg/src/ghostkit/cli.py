"""Command-line interface: analyze / forge / dataset / evaluate.

Machine-readable results (JSON, emitted paths) go to stdout; progress and
diagnostics go to stderr so the commands compose in pipelines. Exit codes:
0 success, 1 unreadable input or bad arguments, 2 analysis finished but no
sweep extremum was found (outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, evalharness, forge, metrics
from .codec import JpegParseError, decode

DEFAULT_FORMATS = ("png", "csv", "json")


def _say(message: str) -> None:
    print(message, file=sys.stderr)


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True))


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get("GHOSTKIT_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _sweep_config(args) -> analysis.SweepConfig:
    return analysis.SweepConfig(args.sweep_min, args.sweep_max, args.sweep_step)


def cmd_analyze(args) -> int:
    out_dir = _resolve_out(args)
    formats = {f.strip() for f in args.format.split(",") if f.strip()}
    unknown = formats - set(DEFAULT_FORMATS)
    if unknown:
        _say(f"error: unknown output format(s): {sorted(unknown)}")
        return 1
    source = Path(args.input)
    try:
        image = decode(source.read_bytes())
    except OSError as exc:
        _say(f"error: cannot read {source}: {exc}")
        return 1
    except JpegParseError as exc:
        _say(f"error: {source}: {exc}")
        return 1
    config = _sweep_config(args)
    _say(f"analyzing {source.name}: sweep [{config.q_min}, {config.q_max}] step {config.step}")
    result = analysis.localize(image, config, jobs=args.jobs)
    estimate = result.estimate

    stem = source.stem
    outputs = {}
    if "png" in formats:
        mask_path = out_dir / f"{stem}_mask.png"
        analysis.export_mask_png(result.mask, mask_path)
        outputs["mask"] = str(mask_path)
    if "csv" in formats:
        csv_path = out_dir / f"{stem}_curve.csv"
        csv_path.write_text(result.sweep.curve.to_csv())
        outputs["curve"] = str(csv_path)
    summary = {
        "schema": 1,
        "input": str(source),
        "q_ssim": estimate.q_ssim if estimate else None,
        "q_energy": estimate.q_energy if estimate else None,
        "q_final": result.quality,
        "confidence": result.confidence,
        "reason": result.reason,
        "quality_confidence": estimate.confidence if estimate else None,
        "mask_true_pixels": result.mask.true_pixels(),
        "mask_fraction": result.mask.true_pixels() / (result.mask.width * result.mask.height),
        "sweep": {"q_min": config.q_min, "q_max": config.q_max, "step": config.step},
        "outputs": outputs,
    }
    if "json" in formats:
        json_path = out_dir / f"{stem}_summary.json"
        json_path.write_text(json.dumps(summary, sort_keys=True, indent=2))
        outputs["summary"] = str(json_path)
    _emit(summary)
    return 2 if estimate is None else 0


def cmd_forge(args) -> int:
    out_dir = _resolve_out(args)
    spec_path = Path(args.spec)
    try:
        record = json.loads(spec_path.read_text())
    except OSError as exc:
        _say(f"error: cannot read {spec_path}: {exc}")
        return 1
    except json.JSONDecodeError as exc:
        _say(f"error: {spec_path} is not valid JSON: {exc}")
        return 1
    if not isinstance(record, dict) or "image" not in record:
        _say(f"error: {spec_path} must be a JSON object with an 'image' field")
        return 1
    image_path = Path(record.pop("image"))
    if not image_path.is_absolute():
        image_path = spec_path.parent / image_path
    try:
        spec = forge.ForgerySpec.from_dict(record)
        image = forge.load_image(image_path)
        data, mask = forge.apply_forgery(image, spec)
    except (OSError, ValueError) as exc:
        _say(f"error: {exc}")
        return 1
    jpeg_path = out_dir / f"{spec_path.stem}.jpg"
    mask_path = out_dir / f"{spec_path.stem}_mask.png"
    jpeg_path.write_bytes(data)
    analysis.export_mask_png(analysis.TamperMask(mask), mask_path)
    _say(f"forged {spec.kind} composite from {image_path.name}")
    _emit({"jpeg": str(jpeg_path), "mask": str(mask_path), "kind": spec.kind})
    return 0


def _parse_grid(text: str | None, fallback) -> list:
    if text is None:
        return list(fallback)
    return [int(v) for v in text.split(",") if v.strip()]


def cmd_dataset(args) -> int:
    cover_grid = _parse_grid(args.cover_grid, forge.PAPER_COVER_GRID)
    ghost_grid = _parse_grid(args.ghost_grid, forge.PAPER_GHOST_GRID)
    if args.dry_run:
        if args.assume_images is not None:
            n = args.assume_images
        else:
            try:
                n = len(forge.list_corpus(args.corpus))
            except ValueError as exc:
                _say(f"error: {exc}")
                return 1
        planned = forge.dataset_plan(n, cover_grid, ghost_grid)
        _say(
            f"dry run: {n} images x {len(cover_grid)} cover x {len(ghost_grid)} ghost qualities"
        )
        _emit({"planned": planned, "images": n,
               "cover_grid": cover_grid, "ghost_grid": ghost_grid})
        return 0
    out_dir = _resolve_out(args)
    try:
        rect = tuple(int(v) for v in args.ghost_rect.split(","))
        if len(rect) != 4:
            raise ValueError("ghost rect must be x,y,w,h")
        manifest = forge.build_dataset(
            args.corpus, out_dir,
            cover_grid=cover_grid, ghost_grid=ghost_grid,
            ghost_rect=rect, resave_q=args.resave_q, jobs=args.jobs,
        )
    except ValueError as exc:
        _say(f"error: {exc}")
        return 1
    if not manifest.entries:
        _say("error: no readable corpus images produced any composite")
        return 1
    for problem in manifest.errors:
        _say(f"warning: skipped {problem}")
    _say(f"built {len(manifest.entries)} composites under {out_dir}")
    _emit({"manifest": str(out_dir / "manifest.json"), "entries": len(manifest.entries),
           "errors": len(manifest.errors)})
    return 0


def cmd_evaluate(args) -> int:
    out_dir = _resolve_out(args)
    manifest_path = Path(args.manifest)
    try:
        manifest = forge.DatasetManifest.load(manifest_path)
    except (OSError, ValueError, KeyError) as exc:
        _say(f"error: cannot load manifest {manifest_path}: {exc}")
        return 1
    report = evalharness.evaluate(
        manifest,
        sweep=_sweep_config(args),
        tolerance=args.tolerance,
        base_dir=manifest_path.parent,
        jobs=args.jobs,
    )
    report_path = out_dir / "report.json"
    evalharness.export_report(report, report_path)
    _say(f"evaluated {len(report.rows)} entries -> {report_path}")
    _emit({"report": str(report_path), "csv": str(report_path.with_suffix(".csv")),
           **report.aggregates})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostkit",
        description="JPEG ghost forensics: localize recompression-inconsistent "
                    "regions and estimate the cover quality of suspect images.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--sweep-min", type=int, default=30, help="lowest sweep quality")
    common.add_argument("--sweep-max", type=int, default=100, help="highest sweep quality")
    common.add_argument("--sweep-step", type=int, default=2, help="sweep quality step")
    common.add_argument("--out", help="output directory (fallback: $GHOSTKIT_OUT, then '.')")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common],
                       help="localize tampering in a JPEG and estimate its cover quality")
    p.add_argument("input", help="suspect JPEG file")
    p.add_argument("--format", default=",".join(DEFAULT_FORMATS),
                   help="comma list of outputs to write: png,csv,json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("forge", parents=[common],
                       help="synthesize a forgery from a JSON attack spec")
    p.add_argument("spec", help="JSON spec file with an 'image' field plus attack parameters")
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("dataset", parents=[common],
                       help="build qualified ghost composites for a whole corpus")
    p.add_argument("corpus", help="directory of source images")
    p.add_argument("--cover-grid", help="comma list of cover qualities")
    p.add_argument("--ghost-grid", help="comma list of ghost qualities")
    p.add_argument("--ghost-rect", default="190,60,64,64", help="ghost rectangle x,y,w,h")
    p.add_argument("--resave-q", type=int, default=100, help="final composite save quality")
    p.add_argument("--dry-run", action="store_true", help="only report the planned count")
    p.add_argument("--assume-images", type=int,
                   help="with --dry-run: plan for this corpus size instead of counting files")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score localization over a dataset manifest")
    p.add_argument("manifest", help="manifest.json produced by the dataset command")
    p.add_argument("--tolerance", type=int, default=2,
                   help="allowed |estimated - true| cover quality gap")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        _say(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
