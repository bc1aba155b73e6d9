"""Central finite-difference verification of reverse-mode gradients.

A random fixed projection turns any block output into a scalar loss; the
analytic gradient from one backward pass is compared coordinate-wise
against central differences. High precision (float64) is the mode the
shipped tolerances assume; float32 checks use a correspondingly looser
tolerance.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .architectures import BasicBlock, DCTCNUnit, MSTCNBlock
from .blocks import (
    DFCAttention,
    DFCConfig,
    GhostConfig,
    GhostModule,
    GhostV2Module,
    PartialBlockConfig,
    PartialTemporalBlock,
)
from .tensor import Tensor, no_grad

DEFAULT_TOLERANCE = {"high": 1e-4, "standard": 1e-2}


def check_gradients(forward, params, rel_tol=1e-4, rng=None, max_coords=10):
    """Max mismatch between analytic and numeric d(proj . forward())/d(params).

    `forward` must be a deterministic closure over `params`. Mismatch is
    |analytic - numeric| / max(1, |analytic|, |numeric|), maximized over a
    random sample of coordinates per parameter tensor. The difference step
    scales with the parameter dtype: cbrt(eps) balances truncation against
    roundoff for central differences.
    """
    rng = rng or np.random.default_rng(0)
    probe = forward()
    proj = rng.standard_normal(probe.shape).astype(probe.dtype)
    proj64 = proj.astype(np.float64)

    for p in params:
        p.zero_grad()
    ops.sum_(ops.mul(forward(), Tensor(proj, dtype=probe.dtype))).backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]

    def loss_value():
        # numeric side accumulates in float64 to keep summation noise out
        with no_grad():
            return float((forward().data.astype(np.float64) * proj64).sum())

    worst = 0.0
    for p, grad in zip(params, analytic):
        # float64: cbrt(eps) balances truncation against roundoff. float32
        # has no single safe step (curvature and quantization both bite), so
        # accept the best agreement across a small ladder of steps.
        steps = (6.0e-6,) if p.dtype == np.float64 else (3e-3, 1e-3, 3e-4, 1e-4)
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        n = flat.size
        coords = rng.choice(n, size=min(max_coords, n), replace=False)
        for c in coords:
            orig = flat[c]
            best = np.inf
            for step in steps:
                h = step * max(1.0, abs(orig))
                flat[c] = orig + h
                f1 = loss_value()
                flat[c] = orig - h
                f2 = loss_value()
                flat[c] = orig
                numeric = (f1 - f2) / (2.0 * h)
                best = min(best, abs(gflat[c] - numeric) / max(1.0, abs(gflat[c]), abs(numeric)))
            worst = max(worst, best)
    return worst


def _tensorize(shape, rng, dtype):
    return Tensor(rng.standard_normal(shape), dtype=dtype)


def block_suite(precision="high", rng_seed=0):
    """Builders for every composite block, on small randomized shapes.

    Returns (name, forward, params) triples; blocks run in train mode so
    batch-statistic gradients are exercised (dropout stays off).
    """
    dtype = np.float64 if precision == "high" else np.float32
    rng = np.random.default_rng(rng_seed)
    suite = []

    def register(name, module, x):
        module.train(True)
        suite.append((name, lambda m=module, x=x: m(x), module.parameters()))

    x2d = _tensorize((2, 8, 6, 6), rng, dtype)
    register("ghost2d", GhostModule(GhostConfig(8, 8), dtype=dtype, rng=rng), x2d)
    register("dfc", DFCAttention(DFCConfig(8), dtype=dtype, rng=rng), x2d)
    register("ghostv2", GhostV2Module(GhostConfig(8, 8), dtype=dtype, rng=rng), x2d)

    x1d = _tensorize((2, 8, 9), rng, dtype)
    for core in ("Temporal", "Shuffle", "Faster"):
        cfg = PartialBlockConfig(8, ratio=0.75, core=core, kernel=3, dilation=2)
        register(f"partial_{core.lower()}", PartialTemporalBlock(cfg, dtype=dtype, rng=rng), x1d)

    x1d_b = _tensorize((2, 8, 9), rng, dtype)
    register("mstcn_block", MSTCNBlock(8, 12, dilation=2, dtype=dtype, rng=rng), x1d_b)
    register("dctcn_unit", DCTCNUnit(8, 6, 8, dilation=2, dtype=dtype, rng=rng), x1d_b)

    x2d_b = _tensorize((2, 8, 8, 8), rng, dtype)
    register("resnet_basic", BasicBlock(8, 16, stride=2, variant="standard", dtype=dtype, rng=rng), x2d_b)
    register("resnet_basic_ghost", BasicBlock(8, 16, stride=2, variant="ghost", dtype=dtype, rng=rng), x2d_b)
    return suite


def run_block_suite(precision="high", tolerance=None, rng_seed=0, max_coords=8):
    tolerance = tolerance if tolerance is not None else DEFAULT_TOLERANCE[precision]
    results = []
    for name, forward, params in block_suite(precision, rng_seed):
        err = check_gradients(forward, params, rel_tol=tolerance,
                              rng=np.random.default_rng((rng_seed, 1)), max_coords=max_coords)
        results.append((name, err, err < tolerance))
    return results
