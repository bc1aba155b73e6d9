"""JSON run configuration.

One document with a version field and four sections: `model` (a single
architecture description or a list of named table rows), `train`, `data`
and `cost`. Unknown keys are rejected with the offending path named;
`schema_dump` emits every section with its defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .architectures import InputSpec, ModelSpec
from .costmodel import CountingConvention
from .data import SyntheticDatasetSpec
from .errors import ConfigError
from .training import TrainConfig

SCHEMA_VERSION = 1
COMPONENTS = ("full", "frontend", "frontend_trunk", "sequence")
ROW_EXTRAS = ("name", "variant", "component")


def _check_keys(section: dict, allowed, path):
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _build(cls, section: dict, path, casts=None):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = {f.name for f in dataclasses.fields(cls)}
    _check_keys(section, allowed, path)
    kwargs = dict(section)
    for key, cast in (casts or {}).items():
        if key in kwargs:
            kwargs[key] = cast(kwargs[key])
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_model_spec(section: dict, path="model") -> ModelSpec:
    section = dict(section)
    if "input_spec" in section:
        section["input_spec"] = _build(InputSpec, section["input_spec"], f"{path}.input_spec")
    return _build(ModelSpec, section, path,
                  casts={"dilations": tuple, "ghost_frontend_primary_kernels": tuple})


@dataclass
class ModelRow:
    name: str
    variant: str
    component: str
    spec: ModelSpec


def _parse_model_row(section: dict, path) -> ModelRow:
    section = dict(section)
    name = section.pop("name", "model")
    variant = section.pop("variant", "standard")
    component = section.pop("component", "full")
    if component not in COMPONENTS:
        raise ConfigError(f"{path}.component: unknown component {component!r}, expected one of {COMPONENTS}")
    return ModelRow(str(name), str(variant), component, parse_model_spec(section, path))


@dataclass
class RunConfig:
    models: list
    train: TrainConfig
    data: SyntheticDatasetSpec
    cost: CountingConvention
    single_model: bool

    @property
    def model(self) -> ModelSpec:
        if not self.single_model:
            raise ConfigError("model: this command needs a single model object, not a list")
        return self.models[0].spec


def parse_config(source) -> RunConfig:
    if isinstance(source, (str, Path)):
        try:
            doc = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON: {exc}") from exc
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("config: expected a JSON object at the top level")
    _check_keys(doc, ("version", "model", "train", "data", "cost"), "config")
    version = doc.get("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config.version: unsupported version {version!r}, expected {SCHEMA_VERSION}")

    model_section = doc.get("model", {})
    if isinstance(model_section, list):
        models = [_parse_model_row(row, f"model[{i}]") for i, row in enumerate(model_section)]
        single = False
    else:
        models = [_parse_model_row(model_section, "model")]
        single = True

    train = _build(TrainConfig, doc.get("train", {}), "train")
    data = _build(SyntheticDatasetSpec, doc.get("data", {}), "data")
    cost = _build(CountingConvention, doc.get("cost", {}), "cost")
    return RunConfig(models, train, data, cost, single)


def schema_dump() -> dict:
    def defaults(cls):
        out = {}
        for f in dataclasses.fields(cls):
            if f.default is not dataclasses.MISSING:
                value = f.default
            elif f.default_factory is not dataclasses.MISSING:  # type: ignore[misc]
                value = f.default_factory()
            else:
                value = None
            if dataclasses.is_dataclass(value):
                value = dataclasses.asdict(value)
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    return {
        "version": SCHEMA_VERSION,
        "model": defaults(ModelSpec),
        "model_row_extras": {"name": "model", "variant": "standard",
                             "component": f"one of {list(COMPONENTS)}"},
        "train": defaults(TrainConfig),
        "data": defaults(SyntheticDatasetSpec),
        "cost": defaults(CountingConvention),
    }


def builtin_config_path(name: str) -> Path:
    """Resolve a shipped preset like 'table5' or 'tables/table5.json'."""
    root = Path(__file__).parent / "configs"
    candidates = [
        root / name,
        root / f"{name}.json",
        root / "tables" / f"{name}.json",
    ]
    for cand in candidates:
        if cand.is_file():
            return cand
    raise ConfigError(f"config: no file and no builtin preset named {name!r}")


def resolve_config_path(value) -> Path:
    p = Path(value)
    if p.is_file():
        return p
    return builtin_config_path(str(value))
