"""Command-line entry points: train, colorize, evaluate, study-serve, study-report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import colorspace, figures, trainer
from .errors import IngestError, RecolorError
from .evaluation import colorize_plane, evaluate_model
from .study import (
    JudgmentStore,
    SessionManager,
    StudyPool,
    build_app,
    results_to_tsv,
    session_results,
)


def run_colorize(checkpoint, input_path, output_path) -> Path:
    """Colorize one image file; luminance passes through, chrominance is predicted.

    Color inputs are first reduced to their luminance plane, so an image
    and its grayscale twin colorize identically up to 8-bit round-trip.
    The network runs at its configured side; predicted chrominance is
    resized back to the input resolution.
    """
    state = trainer.load_checkpoint(checkpoint)
    side = state.config.side
    input_path = Path(input_path)
    try:
        with Image.open(input_path) as im:
            rgb_full = np.asarray(im.convert("RGB"), dtype=np.uint8)
            small = im.convert("RGB").resize((side, side), Image.BILINEAR)
            rgb_small = np.asarray(small, dtype=np.uint8)
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise IngestError(input_path, exc) from exc

    lab_full = colorspace.rgb_to_lab(rgb_full)
    lab_small = colorspace.rgb_to_lab(rgb_small)
    pred_ab = colorize_plane(
        state.generator, colorspace.encode_luminance(lab_small.L).astype(np.float32)
    )

    h, w = lab_full.L.shape
    a = np.asarray(Image.fromarray(pred_ab[..., 0]).resize((w, h), Image.BILINEAR))
    b = np.asarray(Image.fromarray(pred_ab[..., 1]).resize((w, h), Image.BILINEAR))
    out = colorspace.lab_to_rgb(colorspace.LabImage(L=lab_full.L, a=a, b=b))
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(out).save(output_path)
    return output_path


def _cmd_train(args) -> int:
    config = trainer.load_config(args.config)
    _, checkpoint, metrics = trainer.fit(config, args.corpus, args.out, resume_from=args.resume)
    rows = trainer.load_metrics(metrics)
    if rows:
        figure = figures.render_loss_curves(rows, Path(args.out) / "loss_curves.png")
        print(f"figure: {figure}")
    print(f"checkpoint: {checkpoint}")
    print(f"metrics: {metrics}")
    return 0


def _cmd_colorize(args) -> int:
    out = run_colorize(args.checkpoint, getattr(args, "in"), args.out)
    print(f"wrote {out}")
    return 0


def _cmd_evaluate(args) -> int:
    report = evaluate_model(args.checkpoint, args.corpus)
    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    report_path.write_text(report.to_tsv())
    report_path.with_suffix(".json").write_text(json.dumps(report.to_record(), indent=2) + "\n")
    figure = figures.render_psnr_figure(report, report_path.with_suffix(".png"))
    print(f"images: {report.image_count}  failures: {len(report.failures)}")
    print(f"mean chroma PSNR: {report.mean_psnr:.2f} dB "
          f"(zero-chroma baseline {report.baseline_mean_psnr:.2f} dB)")
    print(f"report: {report_path}")
    print(f"figure: {figure}")
    return 0


def _cmd_study_serve(args) -> int:
    import uvicorn

    pool = StudyPool.from_manifest(args.pool)
    store = JudgmentStore(args.store)
    manager = SessionManager(
        pool, store, k=args.k, seed=args.seed, time_limit_ms=args.time_limit_ms
    )
    app = build_app(manager)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_study_report(args) -> int:
    pool = StudyPool.from_manifest(args.pool)
    store = JudgmentStore(args.store)
    rows = session_results(pool, store)
    tsv = results_to_tsv(rows)
    out = Path(args.out) if args.out else None
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(tsv)
        figure = figures.render_naturalness_figure(rows, out.with_suffix(".png"))
        print(f"report: {out}")
        print(f"figure: {figure}")
    sys.stdout.write(tsv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recolor")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a colorization model")
    p.add_argument("--config", required=True, help="JSON file of training settings")
    p.add_argument("--corpus", required=True, help="image directory or manifest")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("colorize", help="colorize a single image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--in", required=True, help="input image (color inputs are reduced to luminance)")
    p.add_argument("--out", required=True, help="output image path")
    p.set_defaults(func=_cmd_colorize)

    p = sub.add_parser("evaluate", help="chroma PSNR over a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--report", required=True, help="TSV report path; figure lands beside it")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("study-serve", help="serve the blind perceptual study API")
    p.add_argument("--pool", required=True, help="manifest of (image_id, method_id, path) rows")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=50, help="images per session")
    p.add_argument("--time-limit-ms", type=int, default=None)
    p.add_argument("--store", default="judgments.jsonl")
    p.set_defaults(func=_cmd_study_serve)

    p = sub.add_parser("study-report", help="aggregate naturalness per method")
    p.add_argument("--store", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out", default=None, help="TSV output path; figure lands beside it")
    p.set_defaults(func=_cmd_study_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RecolorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
