"""Run configuration: strict TOML schema, per-kind defaults and sweep expansion.

A document looks like::

    kind = "modulation"
    [scales]
    b = 0.05
    [modulation]
    R_bar = 1.0
    [sweep]
    "modulation.R_bar" = [0.5, 1.0, 1.5]

Every key is checked against :data:`SCHEMA`; unknown keys, wrong types and
violated guards are all collected before anything is computed.
"""
from __future__ import annotations

import copy
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .coherent import CONVENTIONS
from .free_particle import DISPERSIONS
from .kernel.grid import PhysicalScales

KINDS = ("free-evolve", "rotator-evolve", "nlcs-scan", "modulation", "spectrum",
         "kernels-selftest", "oracle-verify")
CHARGES = {"+": 1, "-": -1, "plus": 1, "minus": -1}


class ConfigError(ValueError):
    """Every violated constraint of a document, in discovery order."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------------------
# value checkers: return the coerced value or raise ValueError with a reason

def _num(x):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"expected a number, got {x!r}")
    if not math.isfinite(x):
        raise ValueError(f"expected a finite number, got {x!r}")
    return float(x)


def _pos(x):
    x = _num(x)
    if x <= 0:
        raise ValueError(f"must be > 0, got {x!r}")
    return x


def _int(x, lo=None):
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValueError(f"expected an integer, got {x!r}")
    if lo is not None and x < lo:
        raise ValueError(f"must be >= {lo}, got {x!r}")
    return x


def _even_int(x):
    x = _int(x, 8)
    if x % 2:
        raise ValueError(f"must be even, got {x}")
    return x


def _bool(x):
    if not isinstance(x, bool):
        raise ValueError(f"expected true or false, got {x!r}")
    return x


def _choice(options):
    def check(x):
        if x not in options:
            raise ValueError(f"must be one of {', '.join(map(str, options))}; got {x!r}")
        return x
    return check


def _num_list(x):
    if not isinstance(x, list):
        raise ValueError(f"expected a list of numbers, got {x!r}")
    return [_num(v) for v in x]


def _charge(x):
    if x in (1, -1) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, str) and x in CHARGES:
        return CHARGES[x]
    raise ValueError(f"charge must be '+' or '-', got {x!r}")


_PACKET = {"charge": _charge, "p0": _num, "sigma_p": _pos, "q0": _num,
           "amplitude": _num, "phase": _num}
_PACKET_REQUIRED = ("charge", "p0", "sigma_p")
_LEVEL = {"charge": _charge, "n": lambda x: _int(x, 0), "re": _num, "im": _num}
_LEVEL_REQUIRED = ("charge", "n", "re")


def _tables(schema, required):
    def check(x):
        if not isinstance(x, list) or not all(isinstance(v, dict) for v in x):
            raise ValueError("expected an array of tables")
        out = []
        for i, item in enumerate(x):
            bad = sorted(set(item) - set(schema))
            if bad:
                raise ValueError(f"entry {i}: unknown keys {bad}")
            missing = [k for k in required if k not in item]
            if missing:
                raise ValueError(f"entry {i}: missing required keys {missing}")
            out.append({k: schema[k](v) for k, v in item.items()})
        return out
    return check


SCHEMA = {
    "": {"kind": _choice(KINDS), "N": lambda x: _int(x, 2)},
    "scales": {"hbar": _pos, "mass": _pos, "c": _pos, "omega_c": _num, "b": _num},
    "grid": {"n_p": _even_int, "n_q": _even_int, "p_extent": _pos, "q_extent": _pos,
             "n": _even_int},
    "state": {"packets": _tables(_PACKET, _PACKET_REQUIRED),
              "levels": _tables(_LEVEL, _LEVEL_REQUIRED), "normalize": _bool},
    "time": {"t_end": _num, "samples": lambda x: _int(x, 2), "snapshots": _num_list,
             "steps": lambda x: _int(x, 1), "envelope_periods": _pos},
    "free": {"dispersion": _choice(DISPERSIONS)},
    "nlcs": {"b": _num, "R_bar": _num_list, "R_max": _pos, "points": lambda x: _int(x, 1),
             "convention": _choice(CONVENTIONS)},
    "modulation": {"R_bar": _pos, "convention": _choice(CONVENTIONS), "harmonic": _bool},
    "output": {"grids": _bool},
}

# defaults per kind; ``None`` marks values resolved at run time
_COMMON = {"scales": {"hbar": 1.0, "mass": 1.0, "c": 1.0}, "output": {"grids": True}}
DEFAULTS = {
    "free-evolve": {
        "scales": {"omega_c": 0.0},
        "grid": {"n_p": 128, "n_q": 256, "p_extent": 6.0, "q_extent": 32.0},
        "free": {"dispersion": "relativistic"},
        "time": {"t_end": 10.0, "samples": 11, "snapshots": []},
    },
    "rotator-evolve": {
        "N": 16, "scales": {"b": 0.1}, "grid": {"n": 96},
        "state": {"normalize": True},
        "time": {"t_end": None, "samples": 65, "snapshots": [], "steps": None},
    },
    "nlcs-scan": {
        "N": 48, "scales": {"omega_c": 1.0},
        "nlcs": {"b": None, "R_max": 3.0, "points": 31, "convention": "adjacent"},
    },
    "modulation": {
        "N": None, "scales": {"b": 0.05},
        "modulation": {"R_bar": 1.0, "convention": "adjacent", "harmonic": False},
        "time": {"t_end": None, "samples": None, "envelope_periods": 8.0},
    },
    "spectrum": {"N": 17, "scales": {"b": 0.1}, "grid": {"n": 64}},
    "kernels-selftest": {},
    "oracle-verify": {},
}
REQUIRED = {"free-evolve": [("state", "packets")], "rotator-evolve": [("state", "levels")]}


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated, default-filled run description."""

    kind: str
    settings: dict
    scales: PhysicalScales | None
    sweep: dict = field(default_factory=dict)
    document: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.settings.get(name, {})

    @property
    def N(self):
        return self.settings.get("N")

    def echo(self) -> dict:
        return {"kind": self.kind, "settings": copy.deepcopy(self.settings),
                "sweep": copy.deepcopy(self.sweep)}

    def children(self) -> list[tuple[dict, "RunConfig"]]:
        """Product expansion of the sweep axes into validated child configs."""
        if not self.sweep:
            return [({}, self)]
        keys = list(self.sweep)
        out, errors = [], []
        for values in itertools.product(*(self.sweep[k] for k in keys)):
            overrides = dict(zip(keys, values))
            doc = copy.deepcopy(self.document)
            for dotted, v in overrides.items():
                _assign(doc, dotted, v)
            try:
                out.append((overrides, _build(doc, {})))
            except ConfigError as exc:
                errors.extend(f"sweep child {overrides}: {e}" for e in exc.errors)
        if errors:
            raise ConfigError(errors)
        return out


def _assign(doc: dict, dotted: str, value):
    *path, leaf = dotted.split(".")
    node = doc
    for part in path:
        node = node.setdefault(part, {})
    node[leaf] = value


def _flatten_sweep(node, prefix="") -> dict:
    out = {}
    for k, v in node.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten_sweep(v, key + "."))
        else:
            out[key] = v
    return out


def _scales(kind: str, sec: dict, errors: list) -> PhysicalScales | None:
    if "omega_c" in sec and "b" in sec:
        errors.append("scales: give omega_c or b, not both")
        return None
    hbar, mass, c = sec["hbar"], sec["mass"], sec["c"]
    if "b" in sec:
        omega_c = sec["b"] * mass * c**2 / hbar
    else:
        omega_c = sec.get("omega_c", 0.0)
    if omega_c < 0:
        errors.append(f"omega_c must be >= 0 (got omega_c = {omega_c:g})")
        return None
    if kind in ("rotator-evolve", "nlcs-scan", "modulation", "spectrum") and omega_c == 0:
        errors.append(f"{kind} needs omega_c > 0")
        return None
    return PhysicalScales(hbar=hbar, mass=mass, c=c, omega_c=omega_c)


def _build(doc: dict, sweep: dict) -> RunConfig:
    errors: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["document must be a table"])
    kind = doc.get("kind")
    if kind is None:
        errors.append("missing required key: kind")
    elif kind not in KINDS:
        errors.append(f"kind must be one of {', '.join(KINDS)}; got {kind!r}")
    if errors:
        raise ConfigError(errors)

    settings: dict = {}
    for key, value in doc.items():
        if key in SCHEMA and key != "":
            if not isinstance(value, dict):
                errors.append(f"{key}: expected a table")
                continue
            sec = settings.setdefault(key, {})
            for k, v in value.items():
                if k not in SCHEMA[key]:
                    errors.append(f"unknown key: {key}.{k}")
                    continue
                try:
                    sec[k] = SCHEMA[key][k](v)
                except ValueError as exc:
                    errors.append(f"{key}.{k}: {exc}")
        elif key in SCHEMA[""]:
            try:
                settings[key] = SCHEMA[""][key](value)
            except ValueError as exc:
                errors.append(f"{key}: {exc}")
        elif key != "sweep":
            errors.append(f"unknown key: {key}")

    defaults = copy.deepcopy(_COMMON)
    for k, v in DEFAULTS[kind].items():
        if isinstance(v, dict):
            defaults.setdefault(k, {}).update(v)
        else:
            defaults[k] = v
    if "scales" in settings and ({"b", "omega_c"} & set(settings["scales"])):
        for k in ("b", "omega_c"):
            defaults["scales"].pop(k, None)
    for k, v in defaults.items():
        if isinstance(v, dict):
            merged = dict(v)
            merged.update(settings.get(k, {}))
            settings[k] = merged
        else:
            settings.setdefault(k, v)

    for sec, key in REQUIRED.get(kind, []):
        if key not in settings.get(sec, {}):
            errors.append(f"missing required key: {sec}.{key}")

    scales = _scales(kind, settings["scales"], errors)
    if errors:
        raise ConfigError(errors)
    if scales is not None:
        settings["scales"] = {"hbar": scales.hbar, "mass": scales.mass, "c": scales.c,
                              "omega_c": scales.omega_c}
    nl = settings.get("nlcs")
    if nl is not None:
        if nl["b"] is None:
            nl["b"] = scales.b
        if nl["b"] < 0:
            errors.append(f"nlcs.b must be >= 0, got {nl['b']:g}")
        if "R_bar" not in nl:
            n = nl["points"]
            nl["R_bar"] = [nl["R_max"] * i / max(n - 1, 1) for i in range(n)]
        if any(r < 0 for r in nl["R_bar"]):
            errors.append("nlcs.R_bar values must be >= 0")
    errors.extend(_kind_guards(kind, settings))
    if errors:
        raise ConfigError(errors)
    return RunConfig(kind, settings, scales, sweep, doc)


def _kind_guards(kind: str, s: dict) -> list[str]:
    errors = []
    t = s.get("time", {})
    if t.get("t_end") is not None and t["t_end"] < 0:
        errors.append("time.t_end must be >= 0")
    if kind in ("free-evolve", "rotator-evolve"):
        t_end = t.get("t_end")
        for x in t.get("snapshots", []):
            if x < 0 or (t_end is not None and x > t_end):
                errors.append(f"time.snapshots entry {x:g} lies outside [0, t_end]")
    if kind == "free-evolve":
        g = s["grid"]
        hbar = s["scales"]["hbar"]
        for i, pk in enumerate(s["state"]["packets"]):
            sigma_q = hbar / (2.0 * pk["sigma_p"])
            if g["q_extent"] - abs(pk.get("q0", 0.0)) < 8.0 * sigma_q:
                errors.append(f"state.packets[{i}]: q-axis must extend 8 sigma_q beyond q0 "
                              f"(needs q_extent >= {abs(pk.get('q0', 0.0)) + 8 * sigma_q:g})")
            dp = 2.0 * g["p_extent"] / g["n_p"]
            if pk["sigma_p"] < 2.0 * dp:
                errors.append(f"state.packets[{i}]: sigma_p = {pk['sigma_p']:g} is below "
                              f"two p-cells ({2 * dp:g}); refine grid.n_p")
    if kind == "rotator-evolve":
        for i, lv in enumerate(s["state"]["levels"]):
            if lv["n"] >= s["N"]:
                errors.append(f"state.levels[{i}]: level {lv['n']} >= N = {s['N']}")
    return errors


def parse_config(text: str, kind: str | None = None) -> RunConfig:
    """Parse and validate a TOML document; raises :class:`ConfigError`.

    ``kind`` fills a missing ``kind`` key and must match a present one.
    """
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"malformed TOML: {exc}"]) from None
    if kind is not None:
        if doc.setdefault("kind", kind) != kind:
            raise ConfigError([f"config kind {doc['kind']!r} does not match command {kind!r}"])
    sweep_raw = doc.get("sweep", {})
    if not isinstance(sweep_raw, dict):
        raise ConfigError(["sweep: expected a table"])
    sweep = _flatten_sweep(sweep_raw)
    errors = []
    for k, v in sweep.items():
        section, _, key = k.rpartition(".")
        if section not in SCHEMA or key not in SCHEMA[section]:
            errors.append(f"sweep: unknown key {k}")
        elif not isinstance(v, list) or not v:
            errors.append(f"sweep.{k}: expected a non-empty list of values")
    if errors:
        raise ConfigError(errors)
    base = {k: v for k, v in doc.items() if k != "sweep"}
    cfg = _build(base, sweep)
    cfg.children()  # every child must validate before anything runs
    return cfg


def load_config(path, kind: str | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from None
    return parse_config(text, kind)
