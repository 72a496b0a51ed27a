"""Run configuration: strict YAML loading with line-anchored errors."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml

from .fock import DEFAULT_BUDGET
from .reports import ANCHORS

POTENTIAL_PARAMS = {
    "zero": {},
    "gaussian": {"strength": 1.0, "width": 1.0},
    "squarewell": {"depth": 1.0, "radius": 1.0},
    "bump": {"strength": 0.5, "radius": 2.0},
    "table": {"values": [0.0]},
}


class ConfigError(ValueError):
    def __init__(self, msg: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {msg}")


@dataclass
class GridConfig:
    d: int = 8
    h: float = 1.0
    periodic: bool = True


@dataclass
class FockConfig:
    nmax: int = 3
    memory_budget: int = DEFAULT_BUDGET


@dataclass
class PotentialConfig:
    kind: str = "zero"
    params: dict = field(default_factory=dict)


@dataclass
class TrapConfig:
    L: float | None = None  # null means untrapped


@dataclass
class DynamicsConfig:
    t: list = field(default_factory=lambda: [0.5])
    order: int = 6
    quad_tol: float = 1e-8


@dataclass
class ThermoConfig:
    beta: list = field(default_factory=lambda: [0.25, 1.0, 4.0])
    mu: float | None = None  # null: just below -V(0)


@dataclass
class OutputConfig:
    directory: str = "bosefock-out"
    formats: list = field(default_factory=lambda: ["json", "csv"])


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    fock: FockConfig = field(default_factory=FockConfig)
    potential: PotentialConfig = field(default_factory=PotentialConfig)
    trap: TrapConfig = field(default_factory=TrapConfig)
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    thermo: ThermoConfig = field(default_factory=ThermoConfig)
    checks: list = field(default_factory=lambda: ["ccr"])
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 42

    def potential_params(self) -> dict:
        out = dict(POTENTIAL_PARAMS[self.potential.kind])
        out.update(self.potential.params)
        return out

    def to_dict(self) -> dict:
        def conv(x):
            if is_dataclass(x):
                return {f.name: conv(getattr(x, f.name)) for f in fields(x)}
            if isinstance(x, dict):
                return {k: conv(v) for k, v in x.items()}
            if isinstance(x, list):
                return [conv(v) for v in x]
            return x

        return conv(self)


# scalar kinds used by both loading and sweeping
INT, FLOAT, OPT_FLOAT, BOOL, STR, FLOAT_LIST, STR_LIST = (
    "int", "float", "float|null", "bool", "str", "float list", "str list",
)

SCHEMA: dict[str, dict[str, str]] = {
    "grid": {"d": INT, "h": FLOAT, "periodic": BOOL},
    "fock": {"nmax": INT, "memory_budget": INT},
    "trap": {"L": OPT_FLOAT},
    "dynamics": {"t": FLOAT_LIST, "order": INT, "quad_tol": FLOAT},
    "thermo": {"beta": FLOAT_LIST, "mu": OPT_FLOAT},
    "output": {"directory": STR, "formats": STR_LIST},
}
TOP_LEVEL = ("grid", "fock", "potential", "trap", "dynamics", "thermo", "checks", "output", "seed")


def _construct(node):
    return yaml.SafeLoader("").construct_object(node, deep=True)


def _line(node) -> int:
    return node.start_mark.line + 1


class _Reader:
    def __init__(self, source: str):
        self.source = source

    def fail(self, msg: str, node=None):
        raise ConfigError(msg, _line(node) if node is not None else None, self.source)

    def mapping(self, node, path: str, allowed) -> dict:
        if not isinstance(node, yaml.MappingNode):
            self.fail(f"'{path}' must be a mapping", node)
        out = {}
        for knode, vnode in node.value:
            key = _construct(knode)
            if not isinstance(key, str):
                self.fail(f"non-string key {key!r} in '{path}'", knode)
            if allowed is not None and key not in allowed:
                where = f"section '{path}'" if path else "the top level"
                self.fail(f"unknown key '{key}' in {where} (allowed: {', '.join(allowed)})", knode)
            if key in out:
                self.fail(f"duplicate key '{key}' in '{path}'", knode)
            out[key] = vnode
        return out

    def scalar(self, node, kind: str, path: str):
        value = _construct(node)
        if kind == INT:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(f"'{path}' must be an integer, got {value!r}", node)
        elif kind in (FLOAT, OPT_FLOAT):
            if value is None and kind == OPT_FLOAT:
                return None
            if isinstance(value, str) and value.strip().lower() in ("inf", "infinite", "infinity"):
                if kind == OPT_FLOAT:
                    return None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail(f"'{path}' must be a number, got {value!r}", node)
            value = float(value)
            if not math.isfinite(value):
                self.fail(f"'{path}' must be finite", node)
        elif kind == BOOL:
            if not isinstance(value, bool):
                self.fail(f"'{path}' must be true or false, got {value!r}", node)
        elif kind == STR:
            if not isinstance(value, str):
                self.fail(f"'{path}' must be a string, got {value!r}", node)
        elif kind in (FLOAT_LIST, STR_LIST):
            if not isinstance(node, yaml.SequenceNode):
                self.fail(f"'{path}' must be a list", node)
            inner = FLOAT if kind == FLOAT_LIST else STR
            value = [self.scalar(v, inner, f"{path}[{i}]") for i, v in enumerate(node.value)]
            if not value:
                self.fail(f"'{path}' must not be empty", node)
        return value


def _validate(cfg: RunConfig, nodes: dict, r: _Reader) -> None:
    def need(ok, path, msg):
        if not ok:
            section, _, key = path.partition(".")
            node = nodes.get(path, nodes.get(section))
            r.fail(f"'{path}' {msg}", node)

    need(cfg.grid.d >= 2, "grid.d", "must be >= 2")
    need(cfg.grid.h > 0, "grid.h", "must be positive")
    need(cfg.fock.nmax >= 1, "fock.nmax", "must be >= 1")
    need(cfg.fock.memory_budget > 0, "fock.memory_budget", "must be positive")
    need(cfg.trap.L is None or cfg.trap.L > 0, "trap.L", "must be positive or null")
    need(cfg.dynamics.order >= 0, "dynamics.order", "must be >= 0")
    need(cfg.dynamics.quad_tol > 0, "dynamics.quad_tol", "must be positive")
    need(all(b > 0 for b in cfg.thermo.beta), "thermo.beta", "entries must be positive")
    need(set(cfg.output.formats) <= {"json", "csv"}, "output.formats", "allows only json and csv")
    need(cfg.seed >= 0, "seed", "must be nonnegative")
    if cfg.potential.kind == "table":
        vals = cfg.potential.params.get("values")
        need(isinstance(vals, list) and vals and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals),
            "potential.params", "needs a nonempty numeric list 'values'")
    for key in ("radius", "width"):
        if key in cfg.potential_params():
            need(cfg.potential_params()[key] > 0, "potential.params", f"'{key}' must be positive")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    r = _Reader(source)
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from None
    cfg = RunConfig()
    if root is None:
        return cfg
    top = r.mapping(root, "", TOP_LEVEL)
    nodes: dict[str, Any] = dict(top)
    for section, keys in SCHEMA.items():
        if section not in top:
            continue
        target = getattr(cfg, section)
        for key, vnode in r.mapping(top[section], section, tuple(keys)).items():
            nodes[f"{section}.{key}"] = vnode
            setattr(target, key, r.scalar(vnode, keys[key], f"{section}.{key}"))
    if "potential" in top:
        pot = r.mapping(top["potential"], "potential", ("kind", "params"))
        if "kind" in pot:
            kind = r.scalar(pot["kind"], STR, "potential.kind")
            if kind not in POTENTIAL_PARAMS:
                r.fail(f"unknown potential kind '{kind}' (allowed: {', '.join(POTENTIAL_PARAMS)})",
                       pot["kind"])
            cfg.potential.kind = kind
        if "params" in pot:
            allowed = tuple(POTENTIAL_PARAMS[cfg.potential.kind])
            params = r.mapping(pot["params"], "potential.params", allowed)
            for key, vnode in params.items():
                nodes[f"potential.params.{key}"] = vnode
                kind = FLOAT_LIST if key == "values" else FLOAT
                cfg.potential.params[key] = r.scalar(vnode, kind, f"potential.params.{key}")
    if "checks" in top:
        node = top["checks"]
        names = r.scalar(node, STR_LIST, "checks")
        for i, name in enumerate(names):
            if name not in ANCHORS:
                r.fail(f"unknown check suite '{name}' (see list-checks)", node.value[i])
        cfg.checks = names
    if "seed" in top:
        cfg.seed = r.scalar(top["seed"], INT, "seed")
    _validate(cfg, nodes, r)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


# sweeping

def axis_kind(cfg: RunConfig, axis: str) -> str:
    """Kind of a dotted config key; raises ConfigError if it is not numeric."""
    parts = axis.split(".")
    if parts == ["seed"]:
        return INT
    if len(parts) == 3 and parts[:2] == ["potential", "params"]:
        params = cfg.potential_params()
        if parts[2] in params and parts[2] != "values":
            return FLOAT
        raise ConfigError(f"axis '{axis}' is not a numeric parameter of potential "
                          f"'{cfg.potential.kind}'", source="--axis")
    if len(parts) == 2 and parts[0] in SCHEMA and parts[1] in SCHEMA[parts[0]]:
        kind = SCHEMA[parts[0]][parts[1]]
        if kind in (INT, FLOAT, OPT_FLOAT, FLOAT_LIST):
            return kind
    raise ConfigError(f"axis '{axis}' does not name a numeric config key", source="--axis")


def parse_axis_values(text: str, kind: str) -> list:
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ConfigError("sweep needs at least one value", source="--values")
    out = []
    for s in items:
        try:
            v = float(s)
        except ValueError:
            raise ConfigError(f"sweep value '{s}' is not numeric", source="--values") from None
        if not math.isfinite(v):
            raise ConfigError(f"sweep value '{s}' is not finite", source="--values")
        if kind == INT:
            if v != int(v):
                raise ConfigError(f"sweep value '{s}' must be an integer", source="--values")
            v = int(v)
        out.append(v)
    return out


def with_value(cfg: RunConfig, axis: str, value) -> RunConfig:
    """Copy of ``cfg`` with the dotted key set (lists become one-element lists)."""
    new = copy.deepcopy(cfg)
    parts = axis.split(".")
    if parts == ["seed"]:
        new.seed = value
    elif parts[0] == "potential":
        new.potential.params[parts[2]] = value
    else:
        section = getattr(new, parts[0])
        setattr(section, parts[1], [value] if isinstance(getattr(section, parts[1]), list) else value)
    _validate(new, {}, _Reader(f"sweep {axis}={value}"))
    return new
