"""Run configuration, dataset ingestion and deterministic output files.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Recognized keys::

    model                         no_saving | uniform_saving | distributed_saving | bidirectional
    lambda                        uniform_saving propensity, or a delta law for distributed_saving
    lambda_lo, lambda_hi          uniform law U[lo, hi) for distributed_saving
    n_agents                      integer >= 2
    total_wealth                  positive real (default: n_agents)
    init                          uniform_equal | random_uniform
    seed                          unsigned 64-bit integer (default 0)
    realizations, sample_steps    positive integers
    equilibration.checkpoint_interval, equilibration.ks_tolerance,
    equilibration.consecutive_passes, equilibration.max_steps
    output.dir                    output directory (default: out)
    output.formats                csv | json | both, or a comma list
    output.binning                linear | log (histogram.csv)
    output.bins                   number of histogram bins (default 100)
    output.ccdf_points            max rows in ccdf.csv (default 2000)
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .engine import ConfigError, EquilibrationPolicy, SimulationConfig
from .kernels import DomainError, LambdaLaw, ModelSpec, Variant

MODEL_NAMES = {v.value: v for v in Variant}

_INT_KEYS = {
    "n_agents", "seed", "realizations", "sample_steps",
    "equilibration.checkpoint_interval", "equilibration.consecutive_passes",
    "equilibration.max_steps", "output.bins", "output.ccdf_points",
}
_FLOAT_KEYS = {"lambda", "lambda_lo", "lambda_hi", "total_wealth", "equilibration.ks_tolerance"}
_STR_KEYS = {"model", "init", "output.dir", "output.formats", "output.binning"}
KNOWN_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


@dataclass(frozen=True)
class OutputOptions:
    binning: str = "linear"
    bins: int = 100
    ccdf_points: int = 2000


@dataclass(frozen=True)
class RunManifest:
    config: SimulationConfig
    model: ModelSpec
    output_dir: Path = Path("out")
    formats: frozenset = frozenset({"csv", "json"})
    output: OutputOptions = field(default_factory=OutputOptions)
    artifact_version: str = __version__

    def resolved(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "simulation": self.config.to_dict(),
            "output": {
                "dir": str(self.output_dir),
                "formats": sorted(self.formats),
                "binning": self.output.binning,
                "bins": self.output.bins,
                "ccdf_points": self.output.ccdf_points,
            },
        }


def parse_formats(text: str) -> frozenset:
    text = text.strip().lower()
    if text == "both":
        return frozenset({"csv", "json"})
    formats = frozenset(f.strip() for f in text.split(",") if f.strip())
    if not formats or not formats <= {"csv", "json"}:
        raise ConfigError(f"output.formats: expected csv, json or both, got {text!r}")
    return formats


def _convert(key, raw):
    try:
        if key in _INT_KEYS:
            value = int(raw)
        elif key in _FLOAT_KEYS:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError
        else:
            value = raw
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a real number"
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None
    return value


def parse_config_text(text: str) -> RunManifest:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"{key}: unknown configuration key")
        if key in values:
            raise ConfigError(f"{key}: given more than once")
        values[key] = _convert(key, raw)
    return manifest_from_values(values)


def parse_config(path) -> RunManifest:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config: no such file {str(path)!r}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def build_model(values: dict) -> ModelSpec:
    if "model" not in values:
        raise ConfigError(f"model: required, one of {sorted(MODEL_NAMES)}")
    name = values["model"]
    if name not in MODEL_NAMES:
        raise ConfigError(f"model: expected one of {sorted(MODEL_NAMES)}, got {name!r}")
    variant = MODEL_NAMES[name]
    lam = values.get("lambda")
    lo, hi = values.get("lambda_lo"), values.get("lambda_hi")
    if variant is not Variant.DISTRIBUTED_SAVING and (lo is not None or hi is not None):
        raise ConfigError("lambda_lo: only valid with model = distributed_saving")
    try:
        if variant is Variant.UNIFORM_SAVING:
            if lam is None:
                raise ConfigError("lambda: required for uniform_saving, a real in [0, 1]")
            if not 0.0 <= lam <= 1.0:
                raise ConfigError(f"lambda: must be a real in [0, 1], got {lam!r}")
            return ModelSpec.uniform_saving(lam)
        if variant is Variant.DISTRIBUTED_SAVING:
            if lo is not None or hi is not None:
                if lo is None or hi is None or lam is not None:
                    raise ConfigError("lambda_lo: give both lambda_lo and lambda_hi (and no lambda)")
                if not 0.0 <= lo <= hi < 1.0:
                    raise ConfigError(f"lambda_hi: need 0 <= lambda_lo <= lambda_hi < 1, got {lo!r}, {hi!r}")
                return ModelSpec.distributed_saving(LambdaLaw.uniform(lo, hi))
            if lam is None:
                raise ConfigError("lambda_lo: distributed_saving needs lambda_lo/lambda_hi or lambda")
            if not 0.0 <= lam < 1.0:
                raise ConfigError(f"lambda: must be a real in [0, 1) for distributed_saving, got {lam!r}")
            return ModelSpec.distributed_saving(LambdaLaw.delta(lam))
        if lam is not None:
            raise ConfigError(f"lambda: not used by model {name}")
        return ModelSpec(variant)
    except DomainError as exc:
        raise ConfigError(f"lambda: {exc}") from None


def manifest_from_values(values: dict) -> RunManifest:
    model = build_model(values)
    if "n_agents" not in values:
        raise ConfigError("n_agents: required, an integer >= 2")
    defaults = EquilibrationPolicy()
    eq_kwargs = {
        name: values.get(f"equilibration.{name}", getattr(defaults, name))
        for name in ("checkpoint_interval", "ks_tolerance", "consecutive_passes", "max_steps")
    }
    policy = EquilibrationPolicy(**eq_kwargs)
    sim_kwargs = {"n_agents": values["n_agents"], "equilibration": policy}
    for key, name in (("total_wealth", "total_wealth"), ("init", "init"), ("seed", "master_seed"),
                      ("realizations", "realizations"), ("sample_steps", "sample_steps")):
        if key in values:
            sim_kwargs[name] = values[key]
    config = SimulationConfig(**sim_kwargs)

    output = OutputOptions(
        binning=values.get("output.binning", "linear"),
        bins=values.get("output.bins", 100),
        ccdf_points=values.get("output.ccdf_points", 2000),
    )
    if output.binning not in ("linear", "log"):
        raise ConfigError(f"output.binning: expected linear or log, got {output.binning!r}")
    if output.bins < 1:
        raise ConfigError("output.bins: must be a positive integer")
    if output.ccdf_points < 2:
        raise ConfigError("output.ccdf_points: must be an integer >= 2")
    formats = parse_formats(values.get("output.formats", "both"))
    return RunManifest(config, model, Path(values.get("output.dir", "out")), formats, output)


def with_overrides(manifest: RunManifest, seed=None, out=None, formats=None) -> RunManifest:
    if seed is not None:
        manifest = replace(manifest, config=replace(manifest.config, master_seed=seed))
    if out is not None:
        manifest = replace(manifest, output_dir=Path(out))
    if formats is not None:
        manifest = replace(manifest, formats=parse_formats(formats))
    return manifest


# --- ingestion ----------------------------------------------------------------


class DatasetError(ValueError):
    pass


@dataclass
class IngestedDataset:
    values: np.ndarray
    source: str
    dropped: int

    def to_dict(self) -> dict:
        return {"source": self.source, "n": int(self.values.size), "dropped": self.dropped}


def _split_rows(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        return []
    first = lines[0]
    for delim in (",", "\t", ";"):
        if delim in first:
            return [row for row in csv.reader(io.StringIO("\n".join(lines)), delimiter=delim)]
    return [ln.split() for ln in lines]


def _number(field_text):
    try:
        return float(field_text)
    except (TypeError, ValueError):
        return None


def ingest_dataset(path, column=0) -> IngestedDataset:
    """Read one numeric column, dropping non-numeric, non-finite and non-positive rows.

    ``column`` is a header name (exact match) or a 0-based index. With an
    index, a non-numeric first row is taken to be a header.
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file {str(path)!r}")
    rows = _split_rows(path.read_text(encoding="utf-8"))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    if isinstance(column, str) and not column.strip().isdigit():
        header = [h.strip() for h in rows[0]]
        if column not in header:
            raise DatasetError(f"{path}: no column named {column!r} (header: {header})")
        idx, rows = header.index(column), rows[1:]
    else:
        idx = int(column)
        if len(rows[0]) > idx and _number(rows[0][idx]) is None:
            rows = rows[1:]
    kept, dropped = [], 0
    for row in rows:
        v = _number(row[idx]) if len(row) > idx else None
        if v is None or not math.isfinite(v) or v <= 0:
            dropped += 1
        else:
            kept.append(v)
    if not kept:
        raise DatasetError(f"{path}: no valid positive values in column {column!r}")
    return IngestedDataset(np.array(kept), str(path), dropped)


# --- writers ----------------------------------------------------------------------


def fmt(v) -> str:
    """Fixed 17-significant-digit text so values round-trip exactly."""
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % v


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(_jsonable(payload), fh, indent=2, allow_nan=False)
        fh.write("\n")
