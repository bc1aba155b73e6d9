"""Analytic parameter and multiply-accumulate accounting.

Counts come from closed-form per-layer formulas plus shape propagation,
never from inspecting allocated arrays; the registry walk
(`registry_param_count`) is the independent oracle the formulas are
tested against. "FLOPs" throughout the package means MACs: one multiply
plus its accumulate counts once.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class CountingConvention:
    """What the counters include.

    count_padding_overhead models causal convolutions the way the common
    pad-both-sides-then-trim implementations execute them, charging the
    trimmed positions; the default charges only the surviving positions,
    which keeps every temporal network's MAC count exactly linear in T.
    """

    macs_count_bias: bool = False
    count_bn_affine_params: bool = True
    count_elementwise_macs: bool = False
    count_padding_overhead: bool = False
    include_head: bool = True

    def describe(self) -> str:
        return ";".join(f"{f.name}={int(getattr(self, f.name))}" for f in fields(self))


@dataclass(frozen=True)
class CostRow:
    path: str
    params: int
    macs: int


@dataclass
class CostReport:
    rows: list
    input_spec: tuple
    convention: CountingConvention

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    def merged(self, other: "CostReport") -> "CostReport":
        if other.convention != self.convention:
            raise ConfigError("cost: cannot merge reports with different conventions")
        return CostReport(self.rows + other.rows, self.input_spec, self.convention)


def trace(module, input_shape, convention=None, path="") -> CostReport:
    convention = convention or CountingConvention()
    rows, _ = module.cost_rows(path, tuple(input_shape), convention)
    return CostReport(list(rows), tuple(input_shape), convention)


def count_params(module, convention=None) -> int:
    convention = convention or CountingConvention()
    return module.param_count(convention)


def registry_param_count(module) -> int:
    """Oracle: total elements across the actual parameter arrays."""
    return sum(t.data.size for _, t in module.named_parameters())


def count_macs(module, input_shape, convention=None) -> int:
    return trace(module, input_shape, convention).total_macs


def percent_reduction(base_params, base_macs, variant_params, variant_macs):
    if base_params == 0 or base_macs == 0:
        raise ShapeError("percent_reduction: zero baseline")
    return (100.0 * (1.0 - variant_params / base_params),
            100.0 * (1.0 - variant_macs / base_macs))


# ---------------------------------------------------------------------
# table emission
# ---------------------------------------------------------------------

@dataclass
class TableRow:
    model: str
    variant: str
    params: int
    macs: int


def format_markdown(rows, convention) -> str:
    lines = [
        "| model | variant | params (10^6) | MACs (10^9) |",
        "|---|---|---:|---:|",
    ]
    for r in rows:
        lines.append(f"| {r.model} | {r.variant} | {r.params / 1e6:.2f} | {r.macs / 1e9:.2f} |")
    lines.append("")
    lines.append(f"convention: {convention.describe()}")
    return "\n".join(lines) + "\n"


def format_csv(rows, convention) -> str:
    lines = ["model,variant,params_millions,flops_gigamacs,convention"]
    conv = convention.describe()
    for r in rows:
        lines.append(f"{r.model},{r.variant},{r.params / 1e6:.2f},{r.macs / 1e9:.2f},{conv}")
    return "\n".join(lines) + "\n"
