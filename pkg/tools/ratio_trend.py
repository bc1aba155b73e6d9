"""Qualitative channel-ratio ablation on the synthetic motion task.

Trains the FasterNet-core partial TCN with the ghost frontend at ratios
0.25 / 0.5 / 0.75 under a reduced desk budget and writes the validation
accuracies to reports/ratio_trend.md. The trend is reported, not gated:
at this scale run-to-run dominance is noisy, unlike the full-data
ablation the ratio knob is meant for.

Usage: python tools/ratio_trend.py [--epochs N] [--out PATH]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from litevsr import architectures as arch
from litevsr.data import SyntheticDatasetSpec, generate_synthetic
from litevsr.training import TrainConfig, evaluate, train

RATIOS = (0.25, 0.5, 0.75)


def run(epochs=14, seed=11):
    data = SyntheticDatasetSpec(num_classes=10, samples_per_class=12, val_samples_per_class=8,
                                frames=20, height=32, width=32, noise_std=0.05, seed=seed)
    dataset = generate_synthetic(data)
    rows = []
    for ratio in RATIOS:
        spec = arch.ModelSpec(frontend_variant="ghost", seq_model="partial", partial_core="Faster",
                              ratio=ratio, kernel=3, num_classes=10,
                              input_spec=arch.InputSpec(frames=20, height=32, width=32))
        cfg = TrainConfig(epochs=epochs, batch_size=32, seed=seed)
        model = arch.build_model(spec, dropout=cfg.dropout, seed=cfg.seed)
        t0 = time.perf_counter()
        result = train(model, dataset, cfg)
        train_acc = evaluate(model, dataset.train_x, dataset.train_y)
        rows.append((ratio, result.best_val_acc, train_acc, time.perf_counter() - t0))
        print(f"ratio {ratio}: best val {result.best_val_acc:.3f} train {train_acc:.3f} "
              f"({rows[-1][3]:.0f}s)", flush=True)
    return data, epochs, rows


def write_report(path, data, epochs, rows):
    lines = [
        "# Channel-ratio trend on the synthetic motion task",
        "",
        f"FasterNet-core partial TCN, ghost frontend, {data.num_classes} classes, "
        f"{data.frames} frames at {data.height}x{data.width}, {epochs} epochs, seed {data.seed}.",
        "",
        "| ratio | best val acc | final train acc | seconds |",
        "|---:|---:|---:|---:|",
    ]
    for ratio, val, tr, secs in rows:
        lines.append(f"| {ratio} | {val:.3f} | {tr:.3f} | {secs:.0f} |")
    vals = [v for _, v, _, _ in rows]
    trend = "non-decreasing" if all(b >= a for a, b in zip(vals, vals[1:])) else "not monotone at this budget"
    lines += [
        "",
        f"Validation accuracy across ratios is {trend}. This qualitative check is",
        "reported, not gated: desk-scale runs on the synthetic task are noisy and",
        "all three ratios can saturate it.",
        "",
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines))
    print(f"wrote {path}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=14)
    ap.add_argument("--out", default="reports/ratio_trend.md")
    args = ap.parse_args()
    data, epochs, rows = run(args.epochs)
    write_report(args.out, data, epochs, rows)
