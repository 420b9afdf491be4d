"""Rates-table and run-configuration ingestion.

Rates files are small CSV tables, one record per component class::

    step_hours,1.0
    class,value,kind
    cpu,1e-6,probability-per-step
    core-switch,10000,mtbf-hours

The optional ``step_hours`` line (default 1) sets the timestep length used
to convert mtbf-hours records: p = 1 - exp(-step_hours / MTBF).  Blank
lines and ``#`` comments are ignored.

Run configurations are YAML/JSON documents validated against the published
JSON schema (resilsim/schemas/run_config.schema.json); unknown keys are
rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .controller import (
    DEFAULT_SPARES_PER_RACK,
    ProtectionMechanism,
    ProtectionPolicy,
)
from .simulation import ZoneParams
from .topology import DEFAULT_EPSILON, FatTreeConfig, RatesTable

__all__ = [
    "ConfigError",
    "RunConfig",
    "ingest_rates",
    "load_run_config",
    "default_config_path",
    "default_rates_path",
    "run_config_schema",
    "RATES_KIND_PROBABILITY",
    "RATES_KIND_MTBF",
]

RATES_KIND_PROBABILITY = "probability-per-step"
RATES_KIND_MTBF = "mtbf-hours"

_SCHEMA_RESOURCE = "run_config.schema.json"


class ConfigError(ValueError):
    """A configuration or rates file is invalid."""


def default_rates_path() -> Path:
    return Path(str(resources.files("resilsim").joinpath("data/baseline_rates.csv")))


def default_config_path() -> Path:
    return Path(str(resources.files("resilsim").joinpath("data/baseline.yaml")))


def ingest_rates(path: str | Path) -> dict[str, float]:
    """Parse a rates file into a per-step probability table."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read rates file {path}: {exc}") from exc

    step_hours = 1.0
    rates: dict[str, float] = {}
    header_seen = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if not header_seen and parts[0] == "step_hours":
            if len(parts) != 2:
                raise ConfigError(f"{path}:{lineno}: malformed step_hours line")
            try:
                step_hours = float(parts[1])
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: step_hours {parts[1]!r} is not a number"
                ) from None
            if step_hours <= 0 or not math.isfinite(step_hours):
                raise ConfigError(f"{path}:{lineno}: step_hours must be > 0")
            continue
        if parts == ["class", "value", "kind"]:
            header_seen = True
            continue
        if len(parts) != 3:
            raise ConfigError(
                f"{path}:{lineno}: expected 'class,value,kind', got {line!r}"
            )
        cls, value_text, kind = parts
        if cls in rates:
            raise ConfigError(f"{path}:{lineno}: duplicate class {cls!r}")
        try:
            value = float(value_text)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: value {value_text!r} is not a number"
            ) from None
        if kind == RATES_KIND_PROBABILITY:
            if not (0.0 <= value <= 1.0):
                raise ConfigError(
                    f"{path}:{lineno}: probability {value!r} is outside [0, 1]"
                )
            rates[cls] = value
        elif kind == RATES_KIND_MTBF:
            if value <= 0 or not math.isfinite(value):
                raise ConfigError(f"{path}:{lineno}: MTBF must be > 0, got {value!r}")
            rates[cls] = 1.0 - math.exp(-step_hours / value)
        else:
            raise ConfigError(
                f"{path}:{lineno}: unknown kind {kind!r} "
                f"(want {RATES_KIND_PROBABILITY} or {RATES_KIND_MTBF})"
            )
    if not rates:
        raise ConfigError(f"{path}: no rate records found")
    return rates


def run_config_schema() -> dict:
    """The published run-configuration JSON schema."""
    text = resources.files("resilsim").joinpath(f"schemas/{_SCHEMA_RESOURCE}").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run configuration (rates attached separately)."""

    topology: FatTreeConfig
    zones: ZoneParams
    horizon: int
    seeds: tuple[int, ...]
    policies: tuple[ProtectionPolicy, ...]
    workload: float = 1.0
    base_energy_per_step: float = 1.0
    repair_time: int | None = None
    trials: int = 1_000_000
    epsilon: float = DEFAULT_EPSILON
    output_dir: str = "reports"
    sweep_axis: str | None = None
    sweep_values: tuple[int, ...] = ()
    raw: dict = field(default_factory=dict, compare=False, repr=False)


def _build_policy(doc: dict, racks: int) -> ProtectionPolicy:
    kwargs: dict = {"mode": doc["mode"]}
    if "mechanisms" in doc:
        kwargs["mechanisms"] = tuple(
            ProtectionMechanism(
                kind=m["kind"],
                perf_overhead=m.get("perf_overhead", 0.0),
                energy_overhead=m.get("energy_overhead", 0.0),
                activation_latency=m.get("activation_latency", 0),
            )
            for m in doc["mechanisms"]
        )
    for key in (
        "activate_threshold",
        "deactivate_threshold",
        "prediction_window",
        "spare_nodes",
    ):
        if key in doc:
            kwargs[key] = doc[key]
    kwargs.setdefault("spare_nodes", DEFAULT_SPARES_PER_RACK * racks)
    return ProtectionPolicy(**kwargs)


def load_run_config(path: str | Path, rates: RatesTable) -> RunConfig:
    """Load and validate a run configuration against the published schema."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: YAML parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    try:
        jsonschema.validate(doc, run_config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: invalid config at {where}: {exc.message}") from exc

    topo_doc = doc["topology"]
    topology = FatTreeConfig(
        nodes_per_chassis=topo_doc["nodes_per_chassis"],
        chassis_per_rack=topo_doc["chassis_per_rack"],
        racks=topo_doc["racks"],
        rates=dict(rates),
        node_internals=tuple(topo_doc.get("node_internals", ("cpu", "memory", "io"))),
    )
    zones_doc = doc.get("zones", {})
    zones = ZoneParams(
        radius=zones_doc.get("radius", 1),
        window=zones_doc.get("window", 10),
        multiplier=zones_doc.get("multiplier", 2.0),
    )
    policies = tuple(
        _build_policy(p, topology.racks) for p in doc.get("policies", [])
    )
    sweep_doc = doc.get("sweep", {})
    try:
        return RunConfig(
            topology=topology,
            zones=zones,
            horizon=doc.get("horizon", 10_000),
            seeds=tuple(int(s) for s in doc.get("seeds", (0,))),
            policies=policies,
            workload=doc.get("workload", 1.0),
            base_energy_per_step=doc.get("base_energy_per_step", 1.0),
            repair_time=doc.get("repair_time"),
            trials=doc.get("trials", 1_000_000),
            epsilon=doc.get("epsilon", DEFAULT_EPSILON),
            output_dir=doc.get("output_dir", "reports"),
            sweep_axis=sweep_doc.get("axis"),
            sweep_values=tuple(sweep_doc.get("values", ())),
            raw=doc,
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
