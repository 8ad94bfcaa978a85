"""Command-line front end for the full pipeline.

Subcommands: gen-data, train-init, run-em, eval, grad-check, report.
Exit codes: 0 success, 1 verification failure, 2 usage or I/O error,
3 numerical abort during training.

Configuration precedence is built-in defaults, then an optional config file
of ``key = value`` lines (``#`` starts a comment), then command-line flags.
Every random choice derives from the single ``--seed`` via per-purpose tags,
so subsystems can be re-seeded independently and reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import em, losses, metrics, segmenter, synth
from .segmenter import TrainingError
from .tensorfile import TensorFormatError, read_tensor
from .types import DomainError, LabelSpace, SegMask

_CONFIG_SECTIONS = {
    "em": {"k": int, "eta": float},
    "loss": {"iou_weight": float, "denom_eps": float, "normalization": str},
    "init": {
        "learning_rate": float,
        "momentum": float,
        "weight_decay": float,
        "lr_decay_every": int,
        "lr_decay_factor": float,
        "epochs": int,
        "accumulation": int,
        "seed": int,
    },
    "mstep": {
        "learning_rate": float,
        "momentum": float,
        "weight_decay": float,
        "lr_decay_every": int,
        "lr_decay_factor": float,
        "epochs": int,
        "accumulation": int,
        "seed": int,
    },
    "filter": {
        "min_side": int,
        "max_side": int,
        "min_attention_prob": float,
        "saliency_threshold": float,
        "top_k_per_class": int,
        "fg_ratio_min": float,
        "m_step_top_n": int,
    },
    "fusion": {"combiner": str, "saliency_threshold": float, "attention_threshold": float},
}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines into {dotted key: raw string}."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def build_em_config(file_values: dict, seed: int, k=None, eta=None) -> em.EmConfig:
    """Layer defaults < config file < flags into an EmConfig."""
    sections = {
        "em": {"k": 2, "eta": 0.05},
        "loss": asdict(losses.LossConfig()),
        "init": asdict(segmenter.OptConfig(seed=synth.derive_seed(seed, "train-init"))),
        "mstep": asdict(segmenter.OptConfig(seed=synth.derive_seed(seed, "m-step"))),
        "filter": {
            key: value
            for key, value in asdict(synth.FilterConfig()).items()
            if key != "top_k_overrides"
        },
        "fusion": asdict(em.FusionConfig()),
    }
    for dotted, raw in file_values.items():
        section, _, name = dotted.partition(".")
        if section not in _CONFIG_SECTIONS or name not in _CONFIG_SECTIONS[section]:
            raise DomainError(f"unknown config key {dotted!r}")
        caster = _CONFIG_SECTIONS[section][name]
        try:
            sections[section][name] = caster(raw)
        except ValueError as exc:
            raise DomainError(f"config key {dotted!r}: {exc}") from exc
    if k is not None:
        sections["em"]["k"] = int(k)
    if eta is not None:
        sections["em"]["eta"] = float(eta)
    return em.EmConfig(
        k=sections["em"]["k"],
        eta=sections["em"]["eta"],
        init_opt=segmenter.OptConfig(**sections["init"]),
        mstep_opt=segmenter.OptConfig(**sections["mstep"]),
        loss=losses.LossConfig(**sections["loss"]),
        filter=synth.FilterConfig(**sections["filter"]),
        fusion=em.FusionConfig(**sections["fusion"]),
    )


def _resolve_threads(value) -> int:
    if value is None:
        raw = os.environ.get("WSEG_THREADS", "0")
        try:
            value = int(raw) if raw else 0
        except ValueError as exc:
            raise DomainError(f"WSEG_THREADS={raw!r} is not an integer") from exc
    if value < 0:
        raise DomainError(f"threads must be >= 0, got {value}")
    return int(value)


def _load_config(args) -> em.EmConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    return build_em_config(
        file_values,
        seed=args.seed,
        k=getattr(args, "k", None),
        eta=getattr(args, "eta", None),
    )


def _write_report(out_dir: Path, report: em.EmReport, space: LabelSpace, stem: str) -> str:
    reports = out_dir / "reports"
    reports.mkdir(parents=True, exist_ok=True)
    payload = metrics.report_json(report, space)
    (reports / f"{stem}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    table = metrics.report_table(report, space)
    (reports / f"{stem}.txt").write_text(table)
    return table


def cmd_gen_data(args) -> int:
    if args.simple < 0 or args.complex < 0 or args.val < 0:
        raise DomainError("record counts must be >= 0")
    space = synth.default_label_space(args.classes)
    noise = synth.NoiseConfig.from_level(args.noise_level, seed=synth.derive_seed(args.seed, "noise"))
    bundle = synth.build_dataset(
        space,
        num_simple=args.simple,
        num_complex=args.complex,
        num_val=args.val,
        noise=noise,
        seed=args.seed,
        dims=(args.height, args.width),
    )
    manifest = synth.save_dataset(bundle, args.out)
    total = len(bundle.simple_pairs) + len(bundle.complex_scenes) + len(bundle.val_scenes)
    print(
        f"wrote {total} records ({len(bundle.simple_pairs)} simple, "
        f"{len(bundle.complex_scenes)} complex, {len(bundle.val_scenes)} val) to {manifest}"
    )
    return 0


def cmd_train_init(args) -> int:
    cfg = _load_config(args)
    threads = _resolve_threads(args.threads)
    bundle = synth.load_dataset(args.manifest)
    result = em.train_initial(bundle.simple_pairs, cfg, threads)
    out = Path(args.out)
    ckpt = out / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    segmenter.save_params(result.params, ckpt / "init")
    if bundle.val_scenes:
        iou, miou = em.evaluate_params(result.params, bundle.val_scenes, bundle.space, threads)
        stage = em.StageResult("Initial", tuple(iou), miou, result.epoch_losses)
    else:
        nan = float("nan")
        stage = em.StageResult(
            "Initial", (nan,) * bundle.space.num_labels, nan, result.epoch_losses
        )
    report = em.EmReport((stage,), {"simple": len(bundle.simple_pairs)})
    table = _write_report(out, report, bundle.space, "train_init")
    print(table, end="")
    print(f"checkpoint: {ckpt / 'init'}")
    return 0


def cmd_run_em(args) -> int:
    cfg = _load_config(args)
    threads = _resolve_threads(args.threads)
    bundle = synth.load_dataset(args.manifest)
    out = Path(args.out)
    params, report = em.run_em(
        bundle.simple_pairs,
        bundle.complex_scenes,
        bundle.val_scenes,
        cfg,
        checkpoint_dir=out / "checkpoints",
        from_checkpoint=args.from_checkpoint,
        threads=threads,
    )
    table = _write_report(out, report, bundle.space, "report")
    print(table, end="")
    print(f"final checkpoint: {out / 'checkpoints' / f'iter_{cfg.k:02d}'}")
    return 0


def cmd_eval(args) -> int:
    threads = _resolve_threads(args.threads)
    bundle = synth.load_dataset(args.manifest)
    records = {
        "simple": [scene for scene, _ in bundle.simple_pairs],
        "complex": bundle.complex_scenes,
        "val": bundle.val_scenes,
    }[args.split]
    if not records:
        raise DomainError(f"split {args.split!r} is empty")
    if args.params:
        params = segmenter.load_params(args.params)
        iou, miou = em.evaluate_params(params, records, bundle.space, threads)
    else:
        cm = metrics.ConfusionMatrix.zeros(bundle.space)
        for rec in records:
            pred_path = Path(args.pred_dir) / f"{rec.id}.wst"
            pred = SegMask(np.rint(read_tensor(pred_path)).astype(np.int64), bundle.space)
            cm = metrics.accumulate(cm, pred, rec.gt)
        iou, miou = metrics.iou_scores(cm)
    stage = em.StageResult(f"eval[{args.split}]", tuple(iou), miou, ())
    report = em.EmReport((stage,), {args.split: len(records)})
    table = metrics.report_table(report, bundle.space)
    if args.out:
        table = _write_report(Path(args.out), report, bundle.space, "eval")
    print(table, end="")
    return 0


def cmd_grad_check(args) -> int:
    if args.trials < 1:
        raise DomainError("trials must be >= 1")
    report = losses.grad_check(trials=args.trials, seed=args.seed)
    for name in sorted(report.worst):
        print(f"{name}: worst relative error {report.worst[name]:.3e}")
    print(f"overall: {report.worst_overall:.3e} over {report.trials} trials")
    if not report.passed(args.tolerance):
        print(
            f"FAIL: {report.worst_loss} gradient at coordinate {report.worst_coord} "
            f"has relative error {report.worst_overall:.3e} >= {args.tolerance:.3e}"
        )
        return 1
    print(f"PASS: all gradients within {args.tolerance:.3e}")
    return 0


def cmd_report(args) -> int:
    payload = json.loads(Path(args.report).read_text())
    names = payload["class_names"]
    space = LabelSpace(tuple(names[1:]))
    stages = tuple(
        em.StageResult(
            stage["name"],
            tuple(float("nan") if v is None else float(v) for v in stage["per_class_iou"]),
            float("nan") if stage["miou"] is None else float(stage["miou"]),
            tuple(stage.get("train_losses", ())),
        )
        for stage in payload["stages"]
    )
    report = em.EmReport(stages, payload.get("dataset_sizes", {}))
    print(metrics.report_table(report, space), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wseg",
        description="Weakly-supervised segmentation training pipeline (desk scale).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, manifest=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="path to manifest.jsonl")
        p.add_argument("--config", help="optional key = value config file")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--threads", type=int, default=None, help="0 = auto (env WSEG_THREADS)")

    p = sub.add_parser("gen-data", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--classes", type=int, default=6)
    p.add_argument("--simple", type=int, default=300)
    p.add_argument("--complex", type=int, default=150)
    p.add_argument("--val", type=int, default=100)
    p.add_argument("--noise-level", type=float, default=1.0)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train-init", help="train the initial model on the simple split")
    add_common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_init)

    p = sub.add_parser("run-em", help="full pipeline: init, filters, EM rounds")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=None, help="number of EM rounds")
    p.add_argument("--eta", type=float, default=None, help="margin threshold")
    p.add_argument("--from-checkpoint", default=None, help="params basename to resume from")
    p.set_defaults(fn=cmd_run_em)

    p = sub.add_parser("eval", help="score a checkpoint or prediction dir on a split")
    add_common(p)
    p.add_argument("--split", choices=("simple", "complex", "val"), default="val")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--params", help="checkpoint basename (as written by run-em)")
    group.add_argument("--pred-dir", help="directory of <record-id>.wst hard masks")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("grad-check", help="verify analytic gradients against finite differences")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(fn=cmd_grad_check)

    p = sub.add_parser("report", help="re-render the table from a report.json")
    p.add_argument("--report", required=True)
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "gen-data" and args.classes < 1:
        parser.error("--classes must be >= 1")
    try:
        return args.fn(args)
    except TrainingError as exc:
        print(f"error: numerical abort: {exc}", file=sys.stderr)
        return 3
    except (DomainError, TensorFormatError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
