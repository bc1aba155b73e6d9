"""One-off calibration of the reconstructed sequence-model internals.

Run from the repo root. Sweeps the dense-TCN growth/bottleneck/dilation
knobs against the component budgets, prints the candidate grid, and
reports every table figure for the currently frozen constants. The chosen
values are hard-coded in litevsr.architectures; re-run this after any
structural change to the blocks.
"""

import itertools

import numpy as np

from litevsr import architectures as A
from litevsr import costmodel as C

SEQ_SHAPE = (1, 512, 29)
PAD = C.CountingConvention(count_padding_overhead=True)
DEFAULT = C.CountingConvention()


def seq_cost(module, conv):
    rep = C.trace(module, SEQ_SHAPE, conv)
    return rep.total_params, rep.total_macs


def dctcn_grid():
    print("=== DC-TCN grid (std target 41.36M +-15%; ghost deltas 35.6+-5pp params, 42.8+-5pp macs) ===")
    rng = np.random.default_rng
    results = []
    for growth, bott, dils in itertools.product(
        (360, 384, 420, 450, 480, 510), (256, 320, 384, 448, 512), ((1, 2, 4, 8), (2, 4, 8, 16))
    ):
        A.DCTCN_GROWTH = growth
        A.DCTCN_BOTTLENECK = bott
        A.DCTCN_UNIT_DILATIONS = dils
        std = A.DCTCN(ghost=False, rng=rng(0))
        gho = A.DCTCN(ghost=True, rng=rng(0))
        sp, sm = seq_cost(std, PAD)
        gp, gm = seq_cost(gho, PAD)
        dp, dm = C.percent_reduction(sp, sm, gp, gm)
        ok_std = abs(sp / 1e6 - 41.36) / 41.36 <= 0.15
        ok_dp = abs(dp - 35.6) <= 5
        ok_dm = abs(dm - 42.8) <= 5
        flag = "OK " if (ok_std and ok_dp and ok_dm) else "   "
        results.append((flag, growth, bott, dils, sp / 1e6, sm / 1e9, dp, dm))
        print(f"{flag} G={growth:4d} B={bott:4d} dil={dils}  std={sp/1e6:6.2f}M/{sm/1e9:5.2f}G  "
              f"ghost d_params={dp:5.1f}pp d_macs={dm:5.1f}pp")
    return results


def report_frozen():
    print("\n=== frozen constants report ===")
    print(f"DCTCN growth={A.DCTCN_GROWTH} bottleneck={A.DCTCN_BOTTLENECK} dil={A.DCTCN_UNIT_DILATIONS}")

    spec = A.ModelSpec()
    model = A.build_model(spec, seed=0)
    trunk = model.component("frontend_trunk")
    rep = C.trace(trunk, model.component_input_shape("frontend_trunk"), DEFAULT)
    print(f"resnet trunk: {rep.total_params/1e6:.2f}M {rep.total_macs/1e9:.2f}G (target 11.16 / 8.29)")

    for label, kernels in [("ghost (3,1)", (3, 1)), ("ghost (3,3)", (3, 3)), ("ghost (1,1)", (1, 1))]:
        g = A.Frontend("ghost", kernels, rng=np.random.default_rng(0))
        grep = C.trace(g.trunk, model.component_input_shape("frontend_trunk"), DEFAULT)
        print(f"  {label} trunk: {grep.total_params/1e6:.3f}M {grep.total_macs/1e9:.3f}G (target 2.83M / 2.13G)")

    v2 = A.Frontend("ghostv2", (3, 1), rng=np.random.default_rng(0))
    v2rep = C.trace(v2.trunk, model.component_input_shape("frontend_trunk"), DEFAULT)
    print(f"  ghostv2 (3,1) trunk: {v2rep.total_params/1e6:.3f}M {v2rep.total_macs/1e9:.3f}G (target 13.88M / 3.95G)")

    for conv, name in ((PAD, "pad-overhead"), (DEFAULT, "default")):
        std = A.MSTCN(rng=np.random.default_rng(0))
        gho = A.MSTCN(ghost=True, rng=np.random.default_rng(0))
        sp, sm = seq_cost(std, conv)
        gp, gm = seq_cost(gho, conv)
        dp, dm = C.percent_reduction(sp, sm, gp, gm)
        print(f"mstcn[{name}]: std {sp/1e6:.2f}M/{sm/1e9:.3f}G ghost {gp/1e6:.2f}M/{gm/1e9:.3f}G "
              f"deltas {dp:.1f}pp/{dm:.1f}pp (targets 44.8/47.3, std 25.17M/1.12G)")

    for conv, name in ((PAD, "pad-overhead"), (DEFAULT, "default")):
        std = A.DCTCN(rng=np.random.default_rng(0))
        gho = A.DCTCN(ghost=True, rng=np.random.default_rng(0))
        sp, sm = seq_cost(std, conv)
        gp, gm = seq_cost(gho, conv)
        dp, dm = C.percent_reduction(sp, sm, gp, gm)
        print(f"dctcn[{name}]: std {sp/1e6:.2f}M/{sm/1e9:.3f}G ghost {gp/1e6:.2f}M/{gm/1e9:.3f}G "
              f"deltas {dp:.1f}pp/{dm:.1f}pp (targets 35.6/42.8, std 41.36M/1.47G)")

    print("faster-core ratio sweep (targets 0.12/0.15/0.18 G, 7.80/8.39/9.38 M):")
    for ratio in (0.25, 0.5, 0.75):
        for ex in (2.0, 3.5):
            t = A.PartialTCN("Faster", ratio, 3, mlp_expand=ex, rng=np.random.default_rng(0))
            p, m = seq_cost(t, DEFAULT)
            p2, m2 = seq_cost(t, PAD)
            print(f"  ratio {ratio} expand {ex}: default {p/1e6:.3f}M/{m/1e9:.3f}G  pad {m2/1e9:.3f}G")

    print("temporal-core kernel sweep at ratio .75 (target params 3.80/6.18/8.52/10.87):")
    for k in (3, 5, 7, 9):
        t = A.PartialTCN("Temporal", 0.75, k, rng=np.random.default_rng(0))
        p, m = seq_cost(t, DEFAULT)
        print(f"  k={k}: {p/1e6:.3f}M {m/1e9:.4f}G")

    print("shuffle-core kernel sweep at ratio .75 (target params flat 1.20..1.21):")
    for k in (3, 5, 7, 9):
        t = A.PartialTCN("Shuffle", 0.75, k, rng=np.random.default_rng(0))
        p, m = seq_cost(t, DEFAULT)
        print(f"  k={k}: {p/1e6:.4f}M {m/1e9:.5f}G")


if __name__ == "__main__":
    dctcn_grid()
    report_frozen()
