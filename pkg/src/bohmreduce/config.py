"""Flat ``key = value`` run configs, per-scenario schemas and validation.

A config is one assignment per line; ``#`` starts a comment. Every value
is checked against the scenario's schema before anything is computed, and
every problem is reported with its line number.
"""
from __future__ import annotations

import difflib
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .fields import UnitSystem

AUTO = "auto"


class ConfigError(Exception):
    """Raised with the full list of schema errors."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("\n".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class Issue:
    code: str
    message: str
    line: int | None = None
    severity: str = "error"

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        return f"{self.severity} {self.code}: {where}{self.message}"


@dataclass(frozen=True)
class Key:
    kind: str  # float, int, bool, str, choice
    default: Any = None
    choices: tuple = ()
    positive: bool = False
    allow_auto: bool = False
    required: bool = False
    doc: str = ""


COMMON = {
    "scenario": Key("str", required=True, doc="scenario name"),
    "units": Key("choice", "natural", ("natural", "SI"), doc="numbers in natural (hbar = G = 1) or SI units"),
    "mass": Key("float", 1.0, positive=True, doc="particle mass"),
    "output_dir": Key("str", None, doc="output directory; relative paths resolve against the output root"),
    "overwrite": Key("bool", False, doc="replace the outputs of an earlier run in output_dir"),
}

_LINE = {
    "sigma0": Key("float", 1.0, positive=True, doc="initial rms width"),
    "x_min": Key("float", -25.0, doc="left grid edge"),
    "x_max": Key("float", 25.0, doc="right grid edge"),
    "n": Key("int", 2001, positive=True, doc="grid points"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "free-spread": {
        **_LINE,
        "t_end": Key("float", AUTO, positive=True, allow_auto=True, doc="final time; auto = 4 m sigma0^2 / hbar"),
        "dt": Key("float", 0.005, positive=True, allow_auto=True, doc="time step; auto = 0.1 m h^2 / hbar"),
        "record_every": Key("int", 10, positive=True, doc="steps between recorded rows"),
    },
    "sn-collapse": {
        "sigma0": Key("float", AUTO, positive=True, allow_auto=True, doc="initial width; auto = critical width"),
        "x_max": Key("float", AUTO, positive=True, allow_auto=True, doc="radial extent; auto = 20 sigma0"),
        "n": Key("int", 1201, positive=True, doc="radial grid points"),
        "G_scale": Key("float", 1.0, positive=True, doc="multiplier on the gravitational constant"),
        "t_end": Key("float", AUTO, positive=True, allow_auto=True, doc="final time; auto = 2 m sigma0^2 / hbar"),
        "dt": Key("float", AUTO, positive=True, allow_auto=True, doc="time step; auto = t_end / 400"),
        "record_every": Key("int", 10, positive=True, doc="steps between recorded rows"),
    },
    "trajectories": {
        **_LINE,
        "K": Key("int", 100, positive=True, doc="number of trajectories"),
        "t_end": Key("float", AUTO, positive=True, allow_auto=True, doc="final time; auto = 4 m sigma0^2 / hbar"),
        "dt": Key("float", 0.005, positive=True, doc="wavefunction time step"),
        "snapshot_every": Key("int", 4, positive=True, doc="wavefunction steps per trajectory step"),
        "field": Key("choice", "numerical", ("numerical", "analytic"), doc="guidance field source"),
    },
    "deviation": {
        **_LINE,
        "eta0": Key("float", 0.1, doc="initial separation"),
        "eta_dot0": Key("float", 0.0, doc="initial separation rate"),
        "t_end": Key("float", AUTO, positive=True, allow_auto=True, doc="final time; auto = 4 m sigma0^2 / hbar"),
        "dt": Key("float", 0.01, positive=True, doc="integration step"),
        "balance": Key("choice", "free", ("free", "balanced"), doc="free packet, or phi = Q/m supplied"),
    },
    "relativistic-demo": {
        "metric": Key("choice", "minkowski", ("minkowski", "weak_field"), doc="background metric"),
        "potential_depth": Key("float", 1e-3, positive=True, doc="weak-field phi = -depth / sqrt(r^2 + core^2)"),
        "potential_core": Key("float", 1.0, positive=True, doc="core radius of the weak-field potential"),
        "q_amplitude": Key("float", 1e-4, doc="Q = amplitude (1 - x^2 / 2 L^2)"),
        "q_length": Key("float", 1.0, positive=True, doc="length L of the quantum potential"),
        "form": Key("choice", "exact_log", ("exact_log", "linearized"), doc="Bohmian acceleration form"),
        "curvature_ordering": Key("choice", "jacobi", ("jacobi", "printed"), doc="Riemann contraction"),
        "eta0": Key("float", 1e-3, doc="initial x separation"),
        "v0": Key("float", 0.0, doc="initial x separation rate"),
        "dtau": Key("float", 0.5, positive=True, doc="proper-time step"),
        "tau_end": Key("float", 50.0, positive=True, doc="final proper time"),
    },
    "critical-sweep": {
        "m_min": Key("float", 0.5, positive=True, doc="smallest mass"),
        "m_max": Key("float", 5.0, positive=True, doc="largest mass"),
        "n_masses": Key("int", 10, positive=True, doc="masses, log spaced"),
        "n_sigma": Key("int", 31, positive=True, doc="widths in the energy profile at `mass`"),
        "sigma_decades": Key("float", 1.0, positive=True, doc="decades spanned by the profile"),
        "n": Key("int", 1201, positive=True, doc="radial grid points per width"),
    },
    "collapse-profile": {
        "convention": Key("choice", "mass_consistent", ("mass_consistent", "paper_literal"),
                          doc="source G m^2 rho or G m rho"),
        "sigma_guess": Key("float", AUTO, positive=True, allow_auto=True, doc="initial Gaussian width"),
        "n": Key("int", 2001, positive=True, doc="radial grid points"),
        "extent": Key("float", 40.0, positive=True, doc="grid extent in solution length scales"),
        "mixing": Key("float", 0.5, positive=True, doc="density mixing fraction"),
        "max_sweeps": Key("int", 10_000, positive=True, doc="relaxation sweeps before giving up"),
    },
}

DESCRIPTIONS = {
    "free-spread": "free Gaussian spreading (gravity off) against the closed-form width",
    "sn-collapse": "radial Schrodinger-Newton evolution at the critical width, with the free run for comparison",
    "trajectories": "Bohmian trajectory ensemble through the spreading packet against the closed form",
    "deviation": "separation of neighbouring trajectories from the tidal field",
    "relativistic-demo": "relativistic congruence with Bohmian acceleration on a fixed metric",
    "critical-sweep": "energy profile E(sigma) and critical width over a mass sweep",
    "collapse-profile": "self-bound radial profile of the Poisson-like equation for Q",
}

PLACEMENT_KEYS = ("output_dir", "overwrite")

W_DOMAIN = "W001"
W_DT = "W002"
DT_SAFETY = 20.0  # dt warning threshold in units of m h^2 / hbar


@dataclass
class RunConfig:
    scenario: str
    values: dict
    lines: dict = field(default_factory=dict)
    source: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def physics(self) -> dict:
        """The values that determine the computed data (not where it goes)."""
        return {k: v for k, v in self.values.items() if k not in PLACEMENT_KEYS}

    def canonical(self) -> str:
        return json.dumps(self.physics(), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _convert(key: str, spec: Key, raw: str):
    if spec.allow_auto and raw.lower() == AUTO:
        return AUTO
    if spec.kind == "float":
        val = float(raw)
        if val != val or val in (float("inf"), float("-inf")):
            raise ValueError("must be finite")
    elif spec.kind == "int":
        val = int(raw)
    elif spec.kind == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError("expected true or false")
        val = low in ("true", "yes", "1")
    elif spec.kind == "choice":
        if raw not in spec.choices:
            raise ValueError(f"expected one of {', '.join(spec.choices)}")
        val = raw
    else:
        val = raw
    if spec.positive and isinstance(val, (int, float)) and not isinstance(val, bool) and not val > 0:
        raise ValueError("must be positive")
    return val


def parse_lines(text: str):
    """[(line_no, key, raw_value)] and syntax issues."""
    entries, issues = [], []
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            issues.append(Issue("E001", f"expected 'key = value', got {body!r}", no))
            continue
        key, raw = (s.strip() for s in body.split("=", 1))
        if not key or not raw:
            issues.append(Issue("E001", f"expected 'key = value', got {body!r}", no))
            continue
        entries.append((no, key, raw))
    return entries, issues


def _suggest(key: str, known) -> str:
    close = difflib.get_close_matches(key, list(known), n=1, cutoff=0.6)
    return f"; did you mean {close[0]!r}?" if close else ""


def load_config(text: str, source: str | None = None) -> tuple[RunConfig | None, list[Issue]]:
    """Parse and validate; the config is None whenever an error was found."""
    entries, issues = parse_lines(text)
    seen: dict[str, int] = {}
    scenario_line = None
    scenario = None
    for no, key, raw in entries:
        if key == "scenario":
            scenario, scenario_line = raw, no
    if scenario is None:
        issues.append(Issue("E004", "missing required key 'scenario'"))
        return None, issues
    if scenario not in SCHEMAS:
        issues.append(Issue("E005", f"unknown scenario {scenario!r}{_suggest(scenario, SCHEMAS)}",
                            scenario_line))
        return None, issues
    schema = {**COMMON, **SCHEMAS[scenario]}
    values: dict[str, Any] = {}
    for no, key, raw in entries:
        if key in seen:
            issues.append(Issue("E003", f"duplicate key {key!r} (first set on line {seen[key]})", no))
            continue
        seen[key] = no
        if key not in schema:
            issues.append(Issue("E002", f"unknown key {key!r} for scenario {scenario}{_suggest(key, schema)}", no))
            continue
        try:
            values[key] = _convert(key, schema[key], raw)
        except ValueError as exc:
            issues.append(Issue("E006", f"bad value for {key!r}: {raw!r} ({exc})", no))
    for key, spec in schema.items():
        if key not in values:
            if spec.required:
                issues.append(Issue("E004", f"missing required key {key!r}"))
            else:
                values[key] = spec.default
    if values.get("output_dir") is None:
        values["output_dir"] = f"runs/{scenario}"
    if any(i.severity == "error" for i in issues):
        return None, issues
    cfg = RunConfig(scenario, values, seen, source)
    issues.extend(_scenario_checks(cfg))
    if any(i.severity == "error" for i in issues):
        return None, issues
    return cfg, issues


def load_config_file(path) -> tuple[RunConfig | None, list[Issue]]:
    p = Path(path)
    return load_config(p.read_text(), str(p))


# scenario-level rules, run on type-checked values

def _warn(code, msg, line=None):
    return Issue(code, msg, line, "warning")


def _line_rules(cfg: RunConfig):
    v, ln = cfg.values, cfg.lines
    out = []
    if not v["x_max"] > v["x_min"]:
        out.append(Issue("E007", "x_max must exceed x_min", ln.get("x_max")))
        return out
    if v["n"] < 16:
        out.append(Issue("E007", "n must be at least 16", ln.get("n")))
        return out
    half = min(v["x_max"], -v["x_min"])
    if half < 10.0 * v["sigma0"]:
        out.append(_warn(W_DOMAIN, f"domain-too-narrow: grid extends {half / v['sigma0']:.2g} sigma0 "
                                   "from the centre; 10 recommended", ln.get("x_min") or ln.get("x_max")))
    dt = v.get("dt")
    # only the wavefunction stepper has the h^2 time-step scale
    if isinstance(dt, float) and cfg.scenario != "deviation":
        h = (v["x_max"] - v["x_min"]) / (v["n"] - 1)
        hbar = UnitSystem(cfg["units"]).hbar
        bound = DT_SAFETY * v["mass"] * h**2 / hbar
        if dt > bound:
            out.append(_warn(W_DT, f"dt = {dt:g} exceeds {DT_SAFETY:g} m h^2 / hbar = {bound:g}; "
                                   "time error may dominate", ln.get("dt")))
    return out


def _scenario_checks(cfg: RunConfig):
    s, v, ln = cfg.scenario, cfg.values, cfg.lines
    out = []
    if s in ("free-spread", "trajectories", "deviation"):
        out += _line_rules(cfg)
    if s == "trajectories" and v["K"] < 2:
        out.append(Issue("E007", "K must be at least 2", ln.get("K")))
    if s == "sn-collapse":
        if v["n"] < 16:
            out.append(Issue("E007", "n must be at least 16", ln.get("n")))
        if v["sigma0"] != AUTO and v["x_max"] != AUTO and v["x_max"] < 10.0 * v["sigma0"]:
            out.append(_warn(W_DOMAIN, "domain-too-narrow: x_max is below 10 sigma0", ln.get("x_max")))
    if s == "relativistic-demo":
        if cfg["units"] != "natural":
            out.append(Issue("E007", "relativistic-demo is dimensionless; units must be natural", ln.get("units")))
        if abs(v["q_amplitude"]) >= 1.0:
            out.append(Issue("E007", "|q_amplitude| must be below 1 (1 + Q > 0)", ln.get("q_amplitude")))
    if s == "critical-sweep":
        if not v["m_max"] > v["m_min"]:
            out.append(Issue("E007", "m_max must exceed m_min", ln.get("m_max")))
        if v["n_masses"] < 2:
            out.append(Issue("E007", "n_masses must be at least 2", ln.get("n_masses")))
        if v["n_sigma"] < 20:
            out.append(Issue("E007", "n_sigma must be at least 20", ln.get("n_sigma")))
        if v["sigma_decades"] < 1.0:
            out.append(Issue("E007", "sigma_decades must be at least 1", ln.get("sigma_decades")))
    if s == "collapse-profile":
        if v["mixing"] > 1.0:
            out.append(Issue("E007", "mixing must not exceed 1", ln.get("mixing")))
        if v["extent"] < 10.0:
            out.append(_warn(W_DOMAIN, "domain-too-narrow: extent below 10 length scales", ln.get("extent")))
    return out


def schema_help(scenario: str) -> list[tuple[str, Key]]:
    return sorted({**COMMON, **SCHEMAS[scenario]}.items())

