"""Run configuration: strict section/key schema read from INI or JSON.

Every physical quantity is expressed in units of the reference hopping J
(``[graph] J``); times are dimensionless t * J. Numeric values may be
written as arithmetic expressions over ``pi``, ``e`` and the functions
``sqrt``, ``log``, ``exp``, ``sin``, ``cos``; lists use brackets.
"""
from __future__ import annotations

import ast
import configparser
import json
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .core import (
    Continuous,
    CouplingGraph,
    JCHParams,
    PolaritonQubit,
    SnapshotList,
    build_chain,
    build_graph,
)


class ConfigError(ValueError):
    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


# ---------------------------------------------------------------------------
# expression evaluation
# ---------------------------------------------------------------------------

_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt, "log": math.log, "exp": math.exp, "sin": math.sin, "cos": math.cos}
_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS
            and len(node.args) == 1 and not node.keywords):
        return _FUNCS[node.func.id](_eval_node(node.args[0]))
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval_node(elt) for elt in node.elts]
    raise ValueError(f"unsupported expression element {ast.dump(node)[:40]}")


def evaluate(text: str):
    """Evaluate a numeric expression or bracketed list of them."""
    try:
        return _eval_node(ast.parse(text.strip(), mode="eval"))
    except (SyntaxError, ValueError, ZeroDivisionError, OverflowError, TypeError) as exc:
        raise ValueError(f"cannot evaluate {text!r}: {exc}") from None


# ---------------------------------------------------------------------------
# typed fields
# ---------------------------------------------------------------------------


def _num(raw):
    return float(evaluate(raw)) if isinstance(raw, str) else float(raw)


def _int(raw):
    v = _num(raw)
    if v != int(v):
        raise ValueError(f"expected an integer, got {raw!r}")
    return int(v)


def _bool(raw):
    if isinstance(raw, bool):
        return raw
    s = str(raw).strip().lower()
    if s in ("true", "yes", "on", "1"):
        return True
    if s in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _str(raw):
    if not isinstance(raw, str):
        raise ValueError(f"expected text, got {raw!r}")
    return raw.strip()


def _list(item: Callable):
    def parse(raw):
        if isinstance(raw, str):
            s = raw.strip()
            if not s:
                return []
            if item is _str:
                return [p.strip() for p in s.strip("[]").split(",") if p.strip()]
            if ".." in s and not s.startswith("["):
                lo, hi = s.split("..")
                return [item(v) for v in range(_int(lo), _int(hi) + 1)]
            raw = evaluate(s)
        if not isinstance(raw, list):
            raw = [raw]
        return [item(v) for v in raw]
    return parse


_FLOATS, _INTS, _STRS = _list(_num), _list(_int), _list(_str)

# section -> key -> (parser, default); a default of REQUIRED must be given
REQUIRED = object()

SCHEMA: dict[str, dict[str, tuple[Callable, Any]]] = {
    "graph": {
        "type": (_str, "chain"),  # chain | inline | file
        "N": (_int, None),
        "J": (_num, 1.0),
        "edges": (lambda raw: raw if isinstance(raw, list) else json.loads(raw), None),
        "file": (_str, None),
        "sender": (_int, None),
        "receiver": (_int, None),
    },
    "qubit": {
        "alpha_re": (_num, 1.0), "alpha_im": (_num, 0.0),
        "beta_re": (_num, 0.0), "beta_im": (_num, 0.0),
    },
    "schedule": {
        "kind": (_str, "regular"),  # snapshot | regular | greedy | continuous
        "times": (_FLOATS, None),
        "t0": (_num, None),
        "tau": (_num, None),
        "max_rounds": (_int, None),
        "window": (_num, None),
        "grid_step": (_num, 0.01),
        "rate": (_num, None),
        "duration": (_num, None),
        "dt": (_num, None),
    },
    "protocol": {"target_F": (_num, 0.99)},
    "units": {
        "g": (_num, None), "omega_d": (_num, None),
        "kappa": (_num, 0.0), "gamma": (_num, 0.0), "n_max": (_int, 2),
    },
    "output": {"dir": (_str, "out")},
    "sweep": {
        "N": (_INTS, REQUIRED),
        "F": (_num, 0.99),
        "policies": (_STRS, ["regular"]),
        "workers": (_int, 1),
    },
    "fit": {
        "self_test": (_bool, False),
        "policy": (_str, None),
        "j_eff_over_A": (_str, "calibrate"),  # "calibrate" or a number
        "g_over_A": (_num, 100.0),
        "table": (_str, None),
    },
    "validate": {
        "g_over_A": (_num, 100.0),
        "A": (_num, 1.0),
        "N": (_INTS, [2, 3]),
        "t_max": (_num, 10.0),
        "cutoffs": (_INTS, [2, 3]),
        "reference_g_over_A": (_num, 1.0),
    },
    "plot": {
        "table": (_str, REQUIRED),
        "x": (_str, REQUIRED),
        "y": (_str, REQUIRED),
        "group": (_str, None),
        "name": (_str, "series.csv"),
    },
}

COMMAND_SECTIONS = {
    "simulate": {"graph", "qubit", "schedule", "protocol", "units", "output"},
    "sweep": {"graph", "sweep", "output"},
    "fit": {"graph", "sweep", "fit", "output"},
    "validate": {"validate", "output"},
    "schedule-opt": {"graph", "schedule", "protocol", "output"},
    "plot": {"plot", "output"},
}
REQUIRED_SECTIONS = {"sweep": {"sweep"}, "plot": {"plot"}}


@dataclass
class RunConfig:
    command: str
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    base_dir: Path = Path(".")

    def get(self, section: str, key: str):
        return self.sections.get(section, {}).get(key, SCHEMA[section][key][1])

    def has(self, section: str) -> bool:
        return section in self.sections

    @property
    def out_dir(self) -> Path:
        d = Path(self.get("output", "dir"))
        return d if d.is_absolute() else self.base_dir / d

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    # -- derived objects ----------------------------------------------------

    def graph(self) -> CouplingGraph:
        kind = self.get("graph", "type")
        J = self.get("graph", "J")
        sender, receiver = self.get("graph", "sender"), self.get("graph", "receiver")
        if kind == "chain":
            N = self.get("graph", "N")
            if N is None:
                raise ConfigError("chain graph needs N", "graph.N")
            g = build_chain(N, J)
        elif kind == "inline":
            N, edges = self.get("graph", "N"), self.get("graph", "edges")
            if N is None or edges is None:
                raise ConfigError("inline graph needs N and edges", "graph.edges")
            g = build_graph(N, [(i, j, w * J) for i, j, w in edges], sender or 1, receiver or N)
        elif kind == "file":
            path = self.get("graph", "file")
            if path is None:
                raise ConfigError("file graph needs a file path", "graph.file")
            g = CouplingGraph.from_json(self.resolve(path).read_text())
            if J != 1.0:
                g = build_graph(g.n, [(i, j, w * J) for i, j, w in g.edges], g.sender, g.receiver)
        else:
            raise ConfigError(f"unknown graph type {kind!r}", "graph.type")
        if sender is not None or receiver is not None:
            g = g.with_endpoints(sender or g.sender, receiver or g.receiver)
        return g

    def qubit(self) -> PolaritonQubit:
        q = self.sections.get("qubit", {})
        alpha = complex(q.get("alpha_re", 1.0), q.get("alpha_im", 0.0))
        beta = complex(q.get("beta_re", 0.0), q.get("beta_im", 0.0))
        return PolaritonQubit(alpha, beta)

    def schedule(self):
        kind = self.get("schedule", "kind")
        get = lambda k: self.get("schedule", k)  # noqa: E731
        if kind == "snapshot":
            if not get("times"):
                raise ConfigError("snapshot schedule needs times", "schedule.times")
            return SnapshotList(tuple(get("times")))
        if kind == "regular":
            from .analysis import SchedulePolicy
            pol = SchedulePolicy("regular", tau=get("tau"), t0=get("t0"),
                                 max_rounds=get("max_rounds") or 200_000)
            return pol.schedule(self.graph())
        if kind == "greedy":
            from .analysis import SchedulePolicy
            pol = SchedulePolicy("greedy", kind="greedy", window=get("window"), grid_step=get("grid_step"),
                                 max_rounds=get("max_rounds") or 10_000)
            return pol.schedule(self.graph())
        if kind == "continuous":
            for k in ("rate", "duration", "dt"):
                if get(k) is None:
                    raise ConfigError(f"continuous schedule needs {k}", f"schedule.{k}")
            return Continuous(get("rate"), get("duration"), get("dt"))
        raise ConfigError(f"unknown schedule kind {kind!r}", "schedule.kind")

    def params(self) -> JCHParams | None:
        """Lossy-regime parameters from the units block (A taken as J)."""
        if not self.has("units"):
            return None
        J = self.get("graph", "J")
        g = self.get("units", "g")
        if g is None:
            raise ConfigError("units block needs g", "units.g")
        omega_d = self.get("units", "omega_d")
        omega_d = 1e4 * g if omega_d is None else omega_d
        return JCHParams(omega_d * J, omega_d * J, g * J, J, self.get("units", "kappa") * J,
                         self.get("units", "gamma") * J, self.get("units", "n_max"))


def _validate(command: str, raw: dict[str, dict[str, Any]], base_dir: Path) -> RunConfig:
    if command not in COMMAND_SECTIONS:
        raise ConfigError(f"unknown command {command!r}", "command")
    allowed = COMMAND_SECTIONS[command]
    sections: dict[str, dict[str, Any]] = {}
    for name, body in raw.items():
        if name not in allowed:
            raise ConfigError(f"section [{name}] not allowed for {command}; allowed: {sorted(allowed)}", name)
        if not isinstance(body, dict):
            raise ConfigError(f"section [{name}] must be a table", name)
        schema = SCHEMA[name]
        parsed = {}
        for key, value in body.items():
            if key not in schema:
                raise ConfigError(f"unknown key {name}.{key}; allowed: {sorted(schema)}", f"{name}.{key}")
            try:
                parsed[key] = schema[key][0](value)
            except (ValueError, TypeError, json.JSONDecodeError) as exc:
                raise ConfigError(f"bad value for {name}.{key}: {exc}", f"{name}.{key}") from None
        for key, (_, default) in schema.items():
            if default is REQUIRED and key not in parsed:
                raise ConfigError(f"missing required key {name}.{key}", f"{name}.{key}")
        sections[name] = parsed
    for name in REQUIRED_SECTIONS.get(command, ()):
        if name not in sections:
            raise ConfigError(f"missing required section [{name}]", name)
    cfg = RunConfig(command, sections, base_dir)
    if "protocol" in sections:
        F = cfg.get("protocol", "target_F")
        if not 0 < F < 1:
            raise ConfigError("target_F must lie in (0, 1)", "protocol.target_F")
    return cfg


def parse_config(text: str, command: str, fmt: str = "ini", base_dir: Path | str = ".") -> RunConfig:
    if fmt == "json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("top level must be an object of sections")
    else:
        cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
        cp.optionxform = str  # keys are case sensitive (N vs n)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {' '.join(str(exc).split())}") from None
        raw = {s: dict(cp.items(s)) for s in cp.sections()}
    return _validate(command, raw, Path(base_dir))


def load_config(path: Path | str, command: str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}: {path}") from None
    fmt = "json" if path.suffix.lower() == ".json" else "ini"
    return parse_config(text, command, fmt, path.parent)
