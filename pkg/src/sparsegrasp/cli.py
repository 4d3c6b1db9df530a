"""Command-line interface: ``sparsegrasp {train,eval,sweep,params,predict,synth}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .checkpoint import CheckpointError
from .data import DatasetError, GraspDataset, SynthConfig, synth_generate, write_cornell_layout
from .nets import ARCHITECTURES, get_architecture
from .sparse import K_GRID

DATA_ENV = "SPARSEGRASP_DATA"
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad arguments; bad arguments are config errors here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fractions(text: str) -> list[float]:
    """Comma-separated values; numbers above 1 are read as percentages."""
    out = []
    for part in text.split(","):
        v = float(part)
        out.append(v / 100.0 if v > 1 else v)
    return out


def _split(text: str) -> float:
    """``0.9``, ``90`` or ``90-10`` all mean 90% train."""
    head = text.split("-")[0]
    v = float(head)
    return v / 100.0 if v > 1 else v


def _common(p: argparse.ArgumentParser, train_flags: bool = True) -> None:
    p.add_argument("--arch", default="desk-ginnet", choices=sorted(ARCHITECTURES))
    p.add_argument("--dataset", default="synthetic", choices=["cornell", "jacquard", "synthetic"])
    p.add_argument("--data-dir", default=None,
                   help=f"dataset root (default: ${DATA_ENV}; synthetic data is generated in memory if unset)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--smoothing-sigma", type=float, default=2.0)
    if train_flags:
        p.add_argument("--k", default="0.5", help="kept fraction of edges, e.g. 0.5 or 50")
        p.add_argument("--split", type=_split, default=0.9, help="train fraction, e.g. 0.9 or 90-10")
        p.add_argument("--epochs", type=int, default=None, help="default: 50 for GR-ConvNet, 30 for GI-NNet")
        p.add_argument("--batch-size", type=int, default=8)
        p.add_argument("--lr", type=float, default=1e-3)
        p.add_argument("--loss", default="smoothl1", choices=["smoothl1", "mse"])
        p.add_argument("--synth-count", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sparsegrasp", description="Sparse grasp-pose networks trained with Edge-PopUp.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one configuration and write a checkpoint")
    _common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint with the rectangle metric")
    _common(p, train_flags=False)
    p.add_argument("checkpoint")
    p.add_argument("--all", action="store_true", help="evaluate every image, not only the stored test split")
    p.add_argument("--per-sample", action="store_true", help="include per-image results in the report")

    p = sub.add_parser("sweep", help="sparsity x split grid with table output")
    _common(p)
    p.add_argument("--k-values", type=_fractions, default=list(K_GRID))
    p.add_argument("--splits", type=_fractions, default=list(harness.SPLIT_GRID))
    p.add_argument("--save-checkpoints", action="store_true")

    p = sub.add_parser("params", help="total and active parameter counts per K")
    p.add_argument("--arch", default=None, choices=sorted(ARCHITECTURES), help="default: all architectures")
    p.add_argument("--k", type=_fractions, default=list(K_GRID))
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("predict", help="decode grasps for image files")
    p.add_argument("checkpoint")
    p.add_argument("images", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--top-n", type=int, default=5)
    p.add_argument("--smoothing-sigma", type=float, default=None)

    p = sub.add_parser("synth", help="write a synthetic dataset in the Cornell layout")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return ap


def _data_dir(args) -> Optional[str]:
    return args.data_dir or os.environ.get(DATA_ENV) or None


def _config(args, k: Optional[float] = None) -> harness.TrainConfig:
    if k is None:
        ks = _fractions(args.k)
        if len(ks) != 1:
            raise harness.ConfigError("--k takes a single value here")
        k = ks[0]
    return harness.TrainConfig(arch=args.arch, k_fraction=k, split=args.split, batch_size=args.batch_size,
                               lr=args.lr, epochs=args.epochs, seed=args.seed, loss=args.loss,
                               dataset=args.dataset, data_dir=_data_dir(args), synth_count=args.synth_count,
                               smoothing_sigma=args.smoothing_sigma)


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_train(args) -> int:
    cfg = _config(args)
    out = _out(args, "runs/train")
    res = harness.train(cfg, out_dir=out, progress=lambda e: print(
        f"epoch {e['epoch']:3d}  loss {e['loss']:.5f}  val {e['val_accuracy']:.1f}%", flush=True))
    print(f"best epoch {res.best_epoch} (validation {res.best_val_accuracy:.1f}%); checkpoint {res.checkpoint}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, cfg, header = harness.load_model(args.checkpoint)
    data_dir = _data_dir(args) or cfg.data_dir
    kind = args.dataset if args.data_dir else cfg.dataset
    if data_dir:
        dataset = GraspDataset.from_dir(data_dir, kind)
    else:
        dataset = harness.load_dataset(cfg)
    indices = None if args.all else header.get("test_indices")
    if indices is not None and indices and max(indices) >= len(dataset):
        raise harness.ConfigError("stored test split does not fit this dataset; pass --all")
    report = harness.evaluate(model, dataset, indices, smoothing_sigma=args.smoothing_sigma)
    report.config = cfg.to_dict()
    d = report.to_dict()
    if not args.per_sample:
        d.pop("per_image")
    text = json.dumps(d, indent=2)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "eval_report.json").write_text(json.dumps(report.to_dict(), indent=2))
    print(f"accuracy {report.accuracy:.2f}% ({report.valid_count}/{report.test_count})")
    if args.verbose:
        print(text)
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = _config(args, k=args.k_values[0])
    out = _out(args, "runs/sweep")
    grid = harness.sweep(base, args.k_values, args.splits, out, save_checkpoints=args.save_checkpoints,
                         progress=lambda name, rec: print(
                             f"{name}: " + (f"{rec['accuracy']:.2f}%" if "accuracy" in rec else rec["error"]),
                             flush=True))
    print(grid.to_text(f"{base.arch} ({base.dataset})"))
    return EXIT_OK


def cmd_params(args) -> int:
    names = [args.arch] if args.arch else sorted(ARCHITECTURES)
    report = {}
    for name in names:
        rows = harness.param_report(name, args.k)
        report[name] = [{"k": r.k_fraction, "total": r.total, "active": r.active} for r in rows]
        if not args.json:
            print(harness.format_param_table(name, rows))
    if args.json:
        print(json.dumps(report, indent=2))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "params.json").write_text(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_predict(args) -> int:
    recs = harness.predict(args.checkpoint, args.images, args.out, args.top_n, args.smoothing_sigma)
    for r in recs:
        best = r["grasps"][0] if r["grasps"] else None
        desc = "no grasp" if best is None else \
            f"x={best['x']:.0f} y={best['y']:.0f} theta={best['theta']:.3f} width={best['width']:.1f}"
        print(f"{r['image']}: {desc}")
    if len(recs) < len(args.images):
        print(f"skipped {len(args.images) - len(recs)} unreadable image(s)", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    samples = synth_generate(args.count, SynthConfig(size=args.size), seed=args.seed)
    write_cornell_layout(samples, args.out)
    print(f"wrote {len(samples)} samples to {args.out}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "sweep": cmd_sweep, "params": cmd_params,
            "predict": cmd_predict, "synth": cmd_synth}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help exits 0, bad arguments exit 1
        return e.code if isinstance(e.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (harness.ConfigError, CheckpointError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (harness.TrainingError, DatasetError, OSError, FloatingPointError, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
