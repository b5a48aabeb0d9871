"""YAML scenario files.

Layout::

    tasks:
      - {cycles: 2.0e9, bits_in: 1.4e5, bits_out: 1.4e5}
    reliability: [0.99]
    system:
      f_mobile: 1.0e9
      snr_ul_db: 0.0
      ...
    solver:            # optional ScaOptions fields
      epsilon: 0.01
      kernel:          # optional KernelOptions fields
        tolerance: 1.0e-8

SNRs are given in dB and converted to linear scale once, here.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
import math
from typing import Any

import yaml

from .kernel import KernelOptions
from .model import (
    CallGraph,
    Scenario,
    ServiceReliability,
    SystemParams,
    TaskSpec,
    ValidationError,
)
from .sca import ScaOptions

__all__ = ["ConfigError", "LoadedConfig", "parse_config", "load_config", "dump_config",
           "db_to_linear", "linear_to_db"]

TASK_FIELDS = ("cycles", "bits_in", "bits_out")
# config key -> SystemParams attribute (dB keys are converted)
SYSTEM_FIELDS = {
    "f_mobile": "f_mobile",
    "f_cloud": "f_cloud",
    "p_mobile_compute": "p_mobile_compute",
    "bw_ul": "bw_ul",
    "bw_dl": "bw_dl",
    "snr_ul_db": "snr_ul",
    "snr_dl_db": "snr_dl",
    "diversity": "diversity",
    "p_max_dl": "p_max_dl",
    "latency_max": "latency_max",
    "sc_latency": "sc_latency",
}


class ConfigError(ValidationError):
    """Configuration problem; ``field`` is a dotted/indexed path such as ``tasks[2].cycles``."""


@dataclass(frozen=True)
class LoadedConfig:
    scenario: Scenario
    solver: ScaOptions


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def _number(value: Any, path: str) -> float:
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot (1e9) as strings
        try:
            return float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}", path)
    return float(value)


def _mapping(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(value).__name__}", path)
    return value


def _reject_unknown(section: dict, allowed, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown field", f"{path}.{key}")


def _parse_tasks(raw: Any) -> CallGraph:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("tasks: expected a nonempty list", "tasks")
    tasks = []
    for i, entry in enumerate(raw, start=1):
        path = f"tasks[{i}]"
        entry = _mapping(entry, path)
        _reject_unknown(entry, TASK_FIELDS, path)
        values = {}
        for name in TASK_FIELDS:
            if name not in entry:
                raise ConfigError(f"{path}.{name}: missing field", f"{path}.{name}")
            values[name] = _number(entry[name], f"{path}.{name}")
        try:
            tasks.append(TaskSpec(**values))
        except ValidationError as exc:
            raise ConfigError(f"{path}.{exc.field}: {exc}", f"{path}.{exc.field}") from None
    return CallGraph(tuple(tasks))


def _parse_reliability(raw: Any) -> ServiceReliability:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("reliability: expected a nonempty list", "reliability")
    values = [_number(r, f"reliability[{i}]") for i, r in enumerate(raw, start=1)]
    try:
        return ServiceReliability(tuple(values))
    except ValidationError as exc:
        raise ConfigError(str(exc), exc.field) from None


def _parse_system(raw: Any) -> SystemParams:
    raw = _mapping({} if raw is None else raw, "system")
    _reject_unknown(raw, SYSTEM_FIELDS, "system")
    values: dict[str, Any] = {}
    for key, attr in SYSTEM_FIELDS.items():
        if key not in raw:
            continue
        path = f"system.{key}"
        if key == "sc_latency":
            values[attr] = raw[key]
        elif key == "diversity":
            d = raw[key]
            if isinstance(d, bool) or not isinstance(d, int):
                raise ConfigError(f"{path}: expected an integer, got {d!r}", path)
            values[attr] = d
        elif key.endswith("_db"):
            values[attr] = db_to_linear(_number(raw[key], path))
        else:
            values[attr] = _number(raw[key], path)
    try:
        return SystemParams(**values)
    except ValidationError as exc:
        key = next((k for k, a in SYSTEM_FIELDS.items() if a == exc.field), exc.field)
        raise ConfigError(f"system.{key}: {exc}", f"system.{key}") from None


def _override(cls, base, raw: dict, path: str, nested: dict | None = None):
    nested = nested or {}
    names = {f.name for f in fields(cls)}
    _reject_unknown(raw, names, path)
    changes = {}
    for key, value in raw.items():
        if key in nested:
            sub_cls, sub_base = nested[key]
            changes[key] = _override(sub_cls, sub_base, _mapping(value, f"{path}.{key}"),
                                     f"{path}.{key}")
        elif isinstance(getattr(base, key), int) and not isinstance(getattr(base, key), bool):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}",
                                  f"{path}.{key}")
            changes[key] = value
        else:
            changes[key] = _number(value, f"{path}.{key}")
    try:
        return replace(base, **changes)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}", path) from None


def _parse_solver(raw: Any) -> ScaOptions:
    if raw is None:
        return ScaOptions()
    raw = _mapping(raw, "solver")
    base = ScaOptions()
    return _override(ScaOptions, base, raw, "solver",
                     {"kernel": (KernelOptions, base.kernel)})


def parse_config(text: str) -> LoadedConfig:
    """Parse scenario text into a validated scenario and solver options."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    doc = _mapping(doc, "config")
    _reject_unknown(doc, ("tasks", "reliability", "system", "solver"), "config")
    for section in ("tasks", "reliability"):
        if section not in doc:
            raise ConfigError(f"{section}: missing section", section)
    graph = _parse_tasks(doc["tasks"])
    reliability = _parse_reliability(doc["reliability"])
    params = _parse_system(doc.get("system"))
    solver = _parse_solver(doc.get("solver"))
    try:
        scenario = Scenario(graph, reliability, params)
    except ValidationError as exc:
        raise ConfigError(str(exc), exc.field) from None
    return LoadedConfig(scenario, solver)


def load_config(path) -> LoadedConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(scenario: Scenario, solver: ScaOptions | None = None) -> str:
    """Inverse of :func:`parse_config` (SNRs written back in dB)."""
    p = scenario.params
    system = {}
    for key, attr in SYSTEM_FIELDS.items():
        value = getattr(p, attr)
        system[key] = linear_to_db(value) if key.endswith("_db") else value
    doc: dict[str, Any] = {
        "tasks": [
            {"cycles": t.cycles, "bits_in": t.bits_in, "bits_out": t.bits_out}
            for t in scenario.graph.tasks
        ],
        "reliability": list(scenario.reliability.targets),
        "system": system,
    }
    if solver is not None:
        default = ScaOptions()
        out = {f.name: getattr(solver, f.name) for f in fields(ScaOptions)
               if f.name != "kernel" and getattr(solver, f.name) != getattr(default, f.name)}
        kern = {f.name: getattr(solver.kernel, f.name) for f in fields(KernelOptions)
                if getattr(solver.kernel, f.name) != getattr(default.kernel, f.name)}
        if kern:
            out["kernel"] = kern
        if out:
            doc["solver"] = out
    return yaml.safe_dump(doc, sort_keys=False)
