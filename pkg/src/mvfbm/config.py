"""INI-style scenario configuration.

Every key has a type and a default; unknown sections or keys are rejected and
all numeric preconditions are checked before any computation starts.

Schema (section / key / default)::

    [run]       scenario = example1     # example1 | example2 | custom
                seed = 0
                out = out
    [model]     hurst = 0.8
                c1 = c2 = c3 = 0.01     # example1
                modes = 16              # example1 spectral modes
                b = literal             # example1: literal | zero
                nu = 8, amplitude = 0.05, X = 10, n_nodes = 201   # example2
                delta = 1, sigma_w = 0, sigma_h = 0, kappa = 0    # custom (scalar)
                K, M                    # optional overrides of the derived constants
                c_tilde2 = 1
                variant = beta12        # beta12 | mean3
    [simulate]  t0 = 0, t1 = 1, dt = 0.01, N = 1000, burn_in = 1, picard_iters = 0
    [fbm]       n = 16, h = 0.75, dt = 1, paths = 1, method = auto,
                validation_paths = 10000, max_lag = 16
    [diagnose]  mode = sbc0             # recurrence | distribution | sbc0
                source = t2             # sin | t2 | const | simulation | trace
                trace = (path to a t,value CSV, source = trace)
                weight = exp            # exp | one
                q = 4 8 16
                slope_tol = 0.01
                shifts = period         # period | diophantine
                period = 6.283185307179586
                frequencies = 1
                count = 12
                tol = 1e-10
                window = 10             # base grid [0, window] for recurrence
                grid_points = 101
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

__all__ = ["ConfigError", "ScenarioConfig", "load_config", "parse_config", "SCHEMA"]

SCENARIOS = ("example1", "example2", "custom")


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(",", " ").split())


SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "run": {
        "scenario": (str, "example1"),
        "seed": (int, 0),
        "out": (str, "out"),
    },
    "model": {
        "hurst": (float, 0.8),
        "c1": (float, 0.01),
        "c2": (float, 0.01),
        "c3": (float, 0.01),
        "modes": (int, 16),
        "b": (str, "literal"),
        "nu": (float, 8.0),
        "amplitude": (float, 0.05),
        "X": (float, 10.0),
        "n_nodes": (int, 201),
        "delta": (float, 1.0),
        "sigma_w": (float, 0.0),
        "sigma_h": (float, 0.0),
        "kappa": (float, 0.0),
        "K": (float, None),
        "M": (float, None),
        "c_tilde2": (float, 1.0),
        "variant": (str, "beta12"),
    },
    "simulate": {
        "t0": (float, 0.0),
        "t1": (float, 1.0),
        "dt": (float, 0.01),
        "N": (int, 1000),
        "burn_in": (float, 1.0),
        "picard_iters": (int, 0),
    },
    "fbm": {
        "n": (int, 16),
        "h": (float, 0.75),
        "dt": (float, 1.0),
        "paths": (int, 1),
        "method": (str, "auto"),
        "validation_paths": (int, 10000),
        "max_lag": (int, 16),
    },
    "diagnose": {
        "mode": (str, "sbc0"),
        "source": (str, "t2"),
        "trace": (str, ""),
        "weight": (str, "exp"),
        "q": (_floats, (4.0, 8.0, 16.0)),
        "slope_tol": (float, 1e-2),
        "shifts": (str, "period"),
        "period": (float, 2.0 * math.pi),
        "frequencies": (_floats, (1.0,)),
        "count": (int, 12),
        "tol": (float, 1e-10),
        "window": (float, 10.0),
        "grid_points": (int, 101),
    },
}


@dataclass
class ScenarioConfig:
    run: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    fbm: dict = field(default_factory=dict)
    diagnose: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    @property
    def scenario(self) -> str:
        return self.run["scenario"]

    @property
    def seed(self) -> int:
        return self.run["seed"]

    def as_dict(self) -> dict:
        """Normalised values for manifests (output location excluded)."""
        run = {k: v for k, v in self.run.items() if k != "out"}
        return {"run": run, "model": self.model, "simulate": self.simulate,
                "fbm": self.fbm, "diagnose": {k: (list(v) if isinstance(v, tuple) else v)
                                              for k, v in self.diagnose.items()}}


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _validate(cfg: ScenarioConfig) -> None:
    r, m, s, f, d = cfg.run, cfg.model, cfg.simulate, cfg.fbm, cfg.diagnose
    _require(r["scenario"] in SCENARIOS, f"run.scenario must be one of {SCENARIOS}")
    _require(0 <= r["seed"] < 2**64, "run.seed must be an unsigned 64-bit integer")

    _require(0.5 <= m["hurst"] < 1.0, "model.hurst must lie in [0.5, 1)")
    for k in ("c1", "c2", "c3", "amplitude", "sigma_w", "sigma_h"):
        _require(m[k] >= 0, f"model.{k} must be non-negative")
    _require(m["modes"] >= 1, "model.modes must be >= 1")
    _require(m["b"] in ("literal", "zero"), "model.b must be 'literal' or 'zero'")
    _require(m["nu"] > 0, "model.nu must be positive")
    _require(m["X"] > 0, "model.X must be positive")
    _require(m["n_nodes"] >= 3 and m["n_nodes"] % 2 == 1, "model.n_nodes must be odd and >= 3")
    _require(m["delta"] > 0, "model.delta must be positive")
    _require(m["K"] is None or m["K"] >= 0, "model.K must be non-negative")
    _require(m["M"] is None or m["M"] >= 1, "model.M must be >= 1")
    _require(m["c_tilde2"] > 0, "model.c_tilde2 must be positive")
    _require(m["variant"] in ("beta12", "mean3"), "model.variant must be 'beta12' or 'mean3'")

    _require(s["dt"] > 0, "simulate.dt must be positive")
    _require(s["t1"] >= s["t0"], "simulate.t1 must be >= t0")
    _require(s["burn_in"] >= 0, "simulate.burn_in must be non-negative")
    _require(s["N"] >= 1, "simulate.N must be >= 1")
    _require(s["picard_iters"] >= 0, "simulate.picard_iters must be >= 0")
    for span, name in ((s["t1"] - s["t0"], "t1 - t0"), (s["burn_in"], "burn_in")):
        k = round(span / s["dt"])
        _require(abs(k * s["dt"] - span) <= 1e-9 * max(1.0, span), f"simulate.{name} must be a multiple of dt")

    _require(f["n"] >= 1, "fbm.n must be >= 1")
    _require(0.5 <= f["h"] < 1.0, "fbm.h must lie in [0.5, 1)")
    _require(f["dt"] > 0, "fbm.dt must be positive")
    _require(f["paths"] >= 1, "fbm.paths must be >= 1")
    _require(f["validation_paths"] >= 2, "fbm.validation_paths must be >= 2")
    _require(f["max_lag"] >= 0, "fbm.max_lag must be >= 0")
    _require(f["method"] in ("auto", "circulant", "hosking"), "fbm.method must be auto, circulant or hosking")

    _require(d["mode"] in ("recurrence", "distribution", "sbc0"), "diagnose.mode invalid")
    _require(d["source"] in ("sin", "t2", "const", "simulation", "trace"), "diagnose.source invalid")
    _require(d["weight"] in ("exp", "one"), "diagnose.weight must be 'exp' or 'one'")
    _require(d["shifts"] in ("period", "diophantine"), "diagnose.shifts must be 'period' or 'diophantine'")
    _require(len(d["q"]) >= 1 and all(q > 0 for q in d["q"]), "diagnose.q must be positive values")
    _require(all(b > a for a, b in zip(d["q"], d["q"][1:])), "diagnose.q must be increasing")
    _require(d["count"] >= 1, "diagnose.count must be >= 1")
    _require(d["tol"] > 0 and d["slope_tol"] > 0, "diagnose tolerances must be positive")
    _require(d["period"] > 0, "diagnose.period must be positive")
    _require(all(w > 0 for w in d["frequencies"]), "diagnose.frequencies must be positive")
    _require(d["window"] > 0 and d["grid_points"] >= 2, "diagnose.window/grid_points invalid")
    if d["source"] == "trace":
        _require(bool(d["trace"]), "diagnose.trace path required for source = trace")
    if d["mode"] == "distribution":
        _require(d["source"] == "simulation", "distribution mode needs source = simulation")
    if d["mode"] == "recurrence":
        _require(d["source"] in ("sin", "simulation"), "recurrence mode needs source = sin or simulation")


def parse_config(text: str, base_dir: Optional[Path] = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep K, M, X case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
    for section, keys in SCHEMA.items():
        values[section] = {k: default for k, (_, default) in keys.items()}
        if not parser.has_section(section):
            continue
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {section}.{key}")
            conv = keys[key][0]
            try:
                values[section][key] = conv(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: cannot parse {raw!r}") from exc
    cfg = ScenarioConfig(**values, base_dir=base_dir or Path("."))
    _validate(cfg)
    return cfg


def load_config(path: Optional[str]) -> ScenarioConfig:
    if path is None:
        return parse_config("")
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, p.parent)


def override(cfg: ScenarioConfig, seed: Optional[int] = None, out: Optional[str] = None) -> ScenarioConfig:
    if seed is not None:
        _require(0 <= seed < 2**64, "--seed must be an unsigned 64-bit integer")
        cfg.run["seed"] = seed
    if out is not None:
        cfg.run["out"] = out
    return cfg
