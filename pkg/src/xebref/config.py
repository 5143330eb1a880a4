"""TOML experiment configuration: schema, validation and conversion to plans.

Schema (all sections optional unless the command needs them)::

    seed = 1                      # master seed (overridden by --seed)

    [experiment]
    n = 2
    depths = [1, 2, 4, 8]         # or {start = 1, stop = 300, num = 12}  (log-spaced, deduplicated)
    circuits_per_depth = 50
    shots = 0                     # 0 = exact probabilities
    m_min = 4
    ensemble = "clifford"         # or "haar"
    fit_amplitude = true          # optional; default depends on protocol
    f_single_shared = false

    [noise]
    errors = [0.006, 0.004]       # or per_qubit_p = [...]
    interleaved_gate_p = 0.983
    layer_p = 0.975               # optional extra n-qubit depolarizing per reference layer

    [bootstrap]
    resamples = 1000

    [output]
    dir = "out"
    format = "csv"                # or "json"

    [simulate]
    protocols = ["xeb-multi", "xeb-single"]

    [interleave]
    target_gate = "CZ"
    target_qubits = [0, 1]
    error_source = "isolated"     # or "simultaneous"
    isolated_depths = [1, 2, 4, 8, 16, 32, 64, 128]
    compare_irb = false
    irb_layer_p = 0.9745          # synthesis noise for the IRB Clifford layers
    verdict_circuits = 10000

    [distribution]
    grid_points = 501
    [[distribution.ensembles]]
    layer = "clifford-1q"
    n = 2
    depth = 4
    num_circuits = 10000
    target_gate = "CZ"
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import tomli

from .protocols import PROTOCOLS


class ConfigError(ValueError):
    pass


_NUM = (int, float)
_SCHEMA: dict[str, Any] = {
    "seed": int,
    "experiment": {
        "n": int,
        "depths": (list, dict),
        "circuits_per_depth": int,
        "shots": int,
        "m_min": int,
        "ensemble": str,
        "fit_amplitude": bool,
        "f_single_shared": bool,
    },
    "noise": {
        "errors": list,
        "per_qubit_p": list,
        "interleaved_gate_p": _NUM,
        "layer_p": _NUM,
    },
    "bootstrap": {"resamples": int},
    "output": {"dir": str, "format": str},
    "simulate": {"protocols": list},
    "interleave": {
        "target_gate": str,
        "target_qubits": list,
        "error_source": str,
        "isolated_depths": (list, dict),
        "compare_irb": bool,
        "irb_layer_p": _NUM,
        "verdict_circuits": int,
    },
    "distribution": {
        "grid_points": int,
        "ensembles": [
            {"layer": str, "n": int, "depth": int, "num_circuits": int, "target_gate": str}
        ],
    },
}
_DEPTH_RANGE_KEYS = {"start", "stop", "num"}


def _line_of(text: str, key: str) -> int | None:
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith(key) and s[len(key) :].lstrip().startswith("=") or s in (f"[{key}]", f"[[{key}]]"):
            return i
    return None


def _validate(node: Any, schema: Any, path: str, text: str) -> None:
    where = lambda key: f" (line {_line_of(text, key)})" if _line_of(text, key) else ""  # noqa: E731
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ConfigError(f"{path or 'document'} must be a table{where(path.split('.')[-1])}")
        for key, value in node.items():
            full = f"{path}.{key}" if path else key
            if key not in schema:
                raise ConfigError(f"unknown key {full!r}{where(key)}")
            _validate(value, schema[key], full, text)
    elif isinstance(schema, list):
        if not isinstance(node, list):
            raise ConfigError(f"{path} must be an array of tables{where(path.split('.')[-1])}")
        for i, item in enumerate(node):
            _validate(item, schema[0], f"{path}[{i}]", text)
    else:
        ok = isinstance(node, schema) and not (isinstance(node, bool) and schema in (int, _NUM))
        if not ok:
            name = path.split(".")[-1]
            raise ConfigError(f"{path} has the wrong type ({type(node).__name__}){where(name)}")


@dataclass
class Config:
    data: dict
    text: str
    path: Path | None = None

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def section(self, name: str) -> dict:
        return self.data.get(name, {})

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))


def parse_config(text: str, path: Path | None = None) -> Config:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None
    _validate(data, _SCHEMA, "", text)
    cfg = Config(data, text, path)
    exp = cfg.section("experiment")
    if "depths" in exp:
        depth_list(exp["depths"])
    for proto in cfg.section("simulate").get("protocols", []):
        if proto not in PROTOCOLS:
            raise ConfigError(f"simulate.protocols: unknown protocol {proto!r} (line {_line_of(text, 'protocols')})")
    fmt = cfg.section("output").get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format must be 'csv' or 'json' (line {_line_of(text, 'format')})")
    return cfg


def load_config(path: str | Path) -> Config:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), path)


def depth_list(spec) -> tuple[int, ...]:
    """Explicit depth list, or log-spaced ``{start, stop, num}`` rounded and deduplicated."""
    if isinstance(spec, dict):
        if set(spec) != _DEPTH_RANGE_KEYS:
            raise ConfigError(f"depth range needs exactly the keys {sorted(_DEPTH_RANGE_KEYS)}")
        raw = np.geomspace(spec["start"], spec["stop"], spec["num"])
        depths = tuple(sorted({int(round(x)) for x in raw}))
    else:
        depths = tuple(int(m) for m in spec)
    if not depths:
        raise ConfigError("depth list is empty")
    if any(b <= a for a, b in zip(depths, depths[1:])) or depths[0] < 0:
        raise ConfigError("depths must be nonnegative and strictly increasing")
    return depths
