"""Flat ``key = value`` experiment configuration with dotted sections.

Lines look like ``potential.coeffs = [0, 0, -0.5, 0, 0.25]``; values are JSON
literals (numbers, lists, ``true``/``false``/``null``, quoted strings) or bare
words, and ``#`` starts a comment. Every error names the key and, when it
came from a file, the line.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ConfigError, PotentialError
from .potential import validate

_FLOAT, _INT, _BOOL, _STR, _FLIST, _LIST, _OPTFLOAT = "float", "int", "bool", "str", "float list", "list", "float or null"

SCHEMA = {
    "potential.coeffs": (_FLIST, None),
    "model.alpha": (_FLOAT, None),
    "model.sigma": (_FLOAT, None),
    "seed": (_INT, 0),
    "output.dir": (_STR, "out"),
    "quadrature.panel_order": (_INT, 16),
    "quadrature.rel_tol": (_FLOAT, 1e-12),
    "quadrature.truncation_factor": (_FLOAT, 1.2),
    "quadrature.n_scan": (_INT, 2048),
    "grid.n_cells": (_INT, 2048),
    "analyze.sigma_c": (_BOOL, False),
    "analyze.gap": (_BOOL, True),
    "init.kind": (_STR, None),
    "init.m": (_FLOAT, None),
    "init.m_fraction": (_FLOAT, None),
    "init.mean": (_FLOAT, None),
    "init.sd": (_FLOAT, None),
    "init.weights": (_FLIST, None),
    "init.components": (_LIST, None),
    "init.file": (_STR, None),
    "check.n_delta": (_INT, 64),
    "check.mirror": (_BOOL, False),
    "sim.n_particles": (_INT, 10_000),
    "sim.dt": (_FLOAT, 1e-3),
    "sim.t_final": (_FLOAT, 30.0),
    "sim.record_every": (_INT, 100),
    "sim.dump_positions": (_BOOL, False),
    "pde.n_cells": (_INT, 1024),
    "pde.dt": (_OPTFLOAT, None),
    "pde.t_final": (_FLOAT, 30.0),
    "pde.scheme": (_STR, "chang_cooper"),
    "pde.record_every": (_INT, 20_000),
    "sweep.family": (_STR, "steady_family"),
    "sweep.values": (_FLIST, None),
    "sweep.sd": (_FLOAT, 0.2),
    "sweep.engine": (_STR, "particles"),
}


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _coerce(key, kind, value, line):
    def fail(msg):
        raise ConfigError(msg, key=key, line=line)

    if kind == _BOOL:
        if not isinstance(value, bool):
            fail(f"expected true/false, got {value!r}")
        return value
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            fail(f"expected an integer, got {value!r}")
        return value
    if kind in (_FLOAT, _OPTFLOAT):
        if value is None and kind == _OPTFLOAT:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail(f"expected a number, got {value!r}")
        return float(value)
    if kind == _STR:
        if not isinstance(value, str):
            fail(f"expected a string, got {value!r}")
        return value
    if kind == _FLIST:
        if not isinstance(value, list) or not value or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            fail(f"expected a non-empty list of numbers, got {value!r}")
        return [float(v) for v in value]
    if not isinstance(value, list):
        fail(f"expected a list, got {value!r}")
    return value


def parse_lines(lines, source="<config>"):
    """Parse config text into ``{key: (value, line_number)}``."""
    out = {}
    for no, raw in enumerate(lines, start=1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{source}: expected 'key = value'", line=no)
        key, val = (s.strip() for s in text.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}: unknown key", key=key, line=no)
        if not val:
            raise ConfigError(f"{source}: missing value", key=key, line=no)
        out[key] = (_parse_value(val), no)
    return out


@dataclass
class ExperimentConfig:
    values: dict
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def require(self, key):
        v = self.values.get(key)
        if v is None:
            raise ConfigError("required key missing", key=key)
        return v

    def potential(self):
        key = "potential.coeffs"
        try:
            return validate(self.require(key))
        except PotentialError as exc:
            raise ConfigError(f"invalid potential: {exc}", key=key, line=self.lines.get(key)) from exc

    def init_params(self):
        return {k.split(".", 1)[1]: v for k, v in self.values.items()
                if k.startswith("init.") and k != "init.kind" and v is not None}


def load_config(path=None, overrides=(), seed=None, out=None):
    """Read a config file, apply ``key=value`` overrides and fill defaults."""
    raw = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        raw.update(parse_lines(p.read_text().splitlines(), str(p)))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key=value")
        key, val = (s.strip() for s in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key in --set", key=key)
        raw[key] = (_parse_value(val), None)
    values, lines = {}, {}
    for key, (kind, default) in SCHEMA.items():
        if key in raw:
            v, line = raw[key]
            values[key] = _coerce(key, kind, v, line)
            lines[key] = line
        else:
            values[key] = default
    if seed is not None:
        values["seed"] = int(seed)
    if out is not None:
        values["output.dir"] = str(out)
    for key in ("model.alpha", "model.sigma"):
        v = values[key]
        if v is not None and not v > 0:
            raise ConfigError("must be positive", key=key, line=lines.get(key))
    if not 0 <= values["seed"] < 2**64:
        raise ConfigError("must be an unsigned 64-bit integer", key="seed")
    return ExperimentConfig(values, lines)
