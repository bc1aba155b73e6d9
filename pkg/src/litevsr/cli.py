"""Command-line entry point.

Subcommands: analyze (cost tables), train, eval, gradcheck, gen-data,
schema. Exit codes are stable API: 0 ok, 2 config, 3 io, 4 numeric,
5 shape. All result lines are key=value for machine parsing; `--config`
accepts a path or the name of a shipped preset (for example `table5`).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import architectures as arch
from . import costmodel as cm
from .checkpoint import apply_state, load_checkpoint
from .config import parse_config, resolve_config_path, schema_dump
from .data import export_dataset, generate_synthetic
from .errors import ConfigError, NumericError, ShapeError
from .gradcheck import DEFAULT_TOLERANCE, run_block_suite
from .layers import fast_init
from .training import evaluate, train


def _load(args):
    return parse_config(resolve_config_path(args.config))


def cmd_analyze(args):
    cfg = _load(args)
    rows = []
    with fast_init():
        for row in cfg.models:
            model = arch.build_model(row.spec)
            part = model.component(row.component)
            shape = model.component_input_shape(row.component)
            report = cm.trace(part, shape, cfg.cost)
            rows.append(cm.TableRow(row.name, row.variant, report.total_params, report.total_macs))
    markdown = cm.format_markdown(rows, cfg.cost)
    sys.stdout.write(markdown)
    if args.out:
        out = Path(args.out)
        text = cm.format_csv(rows, cfg.cost) if out.suffix.lower() == ".csv" else markdown
        out.write_text(text)
        print(f"wrote={out}")
    return 0


def cmd_train(args):
    cfg = _load(args)
    if args.seed is not None:
        cfg.train.seed = args.seed
        cfg.data.seed = args.seed
    ckpt_dir = Path(args.ckpt_dir)
    try:
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        probe = ckpt_dir / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"checkpoint dir {ckpt_dir} is not writable: {exc}") from exc
    dataset = generate_synthetic(cfg.data)
    model = arch.build_model(cfg.model, dropout=cfg.train.dropout, seed=cfg.train.seed)
    result = train(model, dataset, cfg.train, ckpt_path=ckpt_dir / "best.ckpt")
    (ckpt_dir / "log.csv").write_text(result.log_csv())
    print(f"log={ckpt_dir / 'log.csv'}")
    print(f"checkpoint={result.checkpoint_path}")
    print(f"best_epoch={result.best_epoch}")
    print(f"best_val_acc={result.best_val_acc:.6f}")
    return 0


def cmd_eval(args):
    cfg = _load(args)
    dataset = generate_synthetic(cfg.data)
    model = arch.build_model(cfg.model, seed=cfg.train.seed)
    apply_state(model, load_checkpoint(args.checkpoint))
    acc = evaluate(model, dataset.val_x, dataset.val_y, cfg.train.batch_size)
    print(f"acc={acc:.6f}")
    return 0


def cmd_gradcheck(args):
    tolerance = args.tolerance if args.tolerance is not None else DEFAULT_TOLERANCE[args.precision]
    results = run_block_suite(args.precision, tolerance)
    failed = False
    for name, err, ok in results:
        print(f"gradcheck.{name}={'pass' if ok else 'fail'} maxrel={err:.3e}")
        failed = failed or not ok
    if failed:
        raise NumericError(f"gradcheck: at least one block exceeded tolerance {tolerance}")
    print(f"gradcheck=pass tolerance={tolerance}")
    return 0


def cmd_gen_data(args):
    cfg = _load(args)
    dataset = generate_synthetic(cfg.data)
    out = export_dataset(dataset, args.out)
    print(f"wrote={out / 'dataset.json'}")
    print(f"train_samples={dataset.train_x.shape[0]}")
    print(f"val_samples={dataset.val_x.shape[0]}")
    return 0


def cmd_schema(args):
    text = json.dumps(schema_dump(), indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="litevsr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="emit parameter/MAC tables for configured models")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None, help="write the table to a file (.csv or markdown)")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("train", help="train on the synthetic task")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ckpt-dir", default=".")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the validation split")
    p.add_argument("checkpoint")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference checks for every block")
    p.add_argument("--config", default=None, help="unused; kept for interface symmetry")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--precision", choices=("standard", "high"), default="high")
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("gen-data", help="export the synthetic dataset to a directory")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("schema", help="print the config schema with defaults")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_schema)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 4
    except ShapeError as exc:
        print(f"error: shape: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
