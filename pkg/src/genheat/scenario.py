"""Scenario descriptions: measure, initial data, grid and experiment.

A scenario is read from a TOML (or JSON) file with four tables::

    [measure]                      # canned constructor or explicit cells
    canned = "lebesgue_plus_delta"
    p = 0.5
    c = 0.5
    # breakpoints = [0.0, 1.0]; densities = [1.0]; atoms = [[0.5, 0.5]]

    [initial]                      # exactly one pathway
    g_yspace = "cos(2*pi*y)"       # expression in y, or a two-column file
    b = 0.0
    # f_xspace = "cos(2*pi*x)"; f_second = "-4*pi**2*cos(2*pi*x)"

    [grid]
    n = 512
    xi_max = 4096.0
    n_freqs = 8192
    dt = 1e-4
    theta = 1.0
    t_max = 2.0
    n_times = 201                  # or times = [0.0, 0.1, ...]

    [experiment]
    kind = "solve"                 # solve | oracle | verify | converge | counterexample
    family = "two_atoms"           # converge / counterexample sequence
    ns = [4, 8, 16, 32]
    f_fixed = "Max(0, 1 - 4*Abs(x - 1/2))"
    control = false

Unknown keys are rejected with the offending key path.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np
import sympy

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .initial_data import CompatibleData, from_xspace, from_yspace
from .measure import (CapacityProfile, MeasureSpec, capacity, cantor_approx,
                      cell_centers, lebesgue, lebesgue_plus_delta, two_atoms)
from .oracle import SchemeConfig, step_scheme
from .resolvent import FrequencyGrid, sweep
from .synthesis import SolutionField, synthesize

__all__ = [
    "ConfigError",
    "GridConfig",
    "InitialConfig",
    "ExperimentConfig",
    "Scenario",
    "make_function",
    "build_measure",
    "load_config",
    "scenario_from_dict",
    "canned_scenario",
    "CANNED_EXAMPLES",
]


class ConfigError(ValueError):
    """Invalid scenario configuration; the message names the key."""


_CANNED_MEASURES = {
    "lebesgue": (lebesgue, ()),
    "lebesgue_plus_delta": (lebesgue_plus_delta, ("p", "c")),
    "cantor_approx": (cantor_approx, ("n",)),
    "two_atoms": (two_atoms, ("n",)),
}
_KINDS = ("solve", "oracle", "verify", "converge", "counterexample")
_FAMILIES = ("two_atoms", "cantor")


@dataclass(frozen=True)
class GridConfig:
    n: int = 512
    xi_max: float = 4096.0
    n_freqs: int = 8192
    dt: float = 1e-4
    theta: float = 1.0
    t_max: float = 2.0
    n_times: int = 201
    times: tuple | None = None

    def validate(self):
        for key in ("n", "xi_max", "n_freqs", "dt", "t_max", "n_times"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"grid.{key} must be positive")
        if self.n < 4:
            raise ConfigError("grid.n must be at least 4")
        if self.theta not in (0.5, 1.0):
            raise ConfigError("grid.theta must be 1 or 0.5")
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
            if t.size == 0 or np.any(t < 0) or np.any(t > self.t_max) or np.any(np.diff(t) < 0):
                raise ConfigError("grid.times must be sorted values in [0, t_max]")
        if self.t_max * self.xi_max / self.n_freqs > np.pi:
            raise ConfigError("grid: t_max * xi_max / n_freqs must not exceed pi; "
                              "raise n_freqs or lower t_max")

    def sample_times(self) -> np.ndarray:
        if self.times is not None:
            return np.asarray(self.times, dtype=float)
        return np.linspace(0.0, self.t_max, self.n_times)

    @property
    def frequency_grid(self) -> FrequencyGrid:
        return FrequencyGrid(xi_max=self.xi_max, n_freqs=self.n_freqs)

    def scheme(self, t_end: float | None = None) -> SchemeConfig:
        return SchemeConfig(dt=self.dt, theta=self.theta,
                            t_end=self.t_max if t_end is None else t_end)


@dataclass(frozen=True)
class InitialConfig:
    g_yspace: str | None = "cos(2*pi*y)"
    b: float = 0.0
    f_xspace: str | None = None
    f_second: str | None = None
    compat_tol: float = 1e-3

    def validate(self):
        y_path = self.g_yspace is not None
        x_path = self.f_xspace is not None or self.f_second is not None
        if y_path == x_path:
            raise ConfigError("initial: give exactly one of g_yspace or f_xspace/f_second")
        if x_path and (self.f_xspace is None or self.f_second is None):
            raise ConfigError("initial: f_xspace needs f_second")
        if not self.compat_tol > 0:
            raise ConfigError("initial.compat_tol must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "solve"
    family: str = "two_atoms"
    ns: tuple = (4, 8, 16, 32)
    f_fixed: str = "Max(0, 1 - 4*Abs(x - 1/2))"
    control: bool = False

    def validate(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"experiment.kind must be one of {', '.join(_KINDS)}")
        if self.family not in _FAMILIES:
            raise ConfigError(f"experiment.family must be one of {', '.join(_FAMILIES)}")
        if len(self.ns) == 0 or any(int(n) != n or n <= 0 for n in self.ns):
            raise ConfigError("experiment.ns must be positive integers")


def make_function(source: str, var: str):
    """Vectorised callable from an expression in ``var`` or a sample file.

    Files hold two whitespace-separated columns (coordinate, value) and are
    interpolated linearly with period 1.
    """
    if isinstance(source, (int, float)):
        source = repr(float(source))
    if os.path.isfile(source):
        try:
            data = np.loadtxt(source, ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigError(f"{source}: expected two columns")
        xs, vs = data[:, 0], data[:, 1]

        def sampled(z):
            z = np.asarray(z, dtype=float)
            return np.interp(z - np.floor(z), xs, vs, period=1.0)

        return sampled
    sym = sympy.Symbol(var, real=True)
    try:
        expr = sympy.sympify(source, locals={var: sym})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {source!r}: {exc}") from exc
    extra = expr.free_symbols - {sym}
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ConfigError(f"expression {source!r} uses unknown symbols: {names}")
    fun = sympy.lambdify(sym, expr, modules="numpy")

    def evaluate(z):
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(np.asarray(fun(z), dtype=float), z.shape).copy()

    return evaluate


def build_measure(block: dict) -> MeasureSpec:
    block = dict(block)
    if "canned" in block:
        name = block.pop("canned")
        if name not in _CANNED_MEASURES:
            raise ConfigError(f"measure.canned: unknown constructor {name!r}")
        ctor, params = _CANNED_MEASURES[name]
        extra = set(block) - set(params)
        if extra:
            raise ConfigError(f"measure: unknown key(s) {sorted(extra)} for {name}")
        missing = set(params) - set(block)
        if missing:
            raise ConfigError(f"measure: {name} needs {sorted(missing)}")
        try:
            return ctor(*(block[p] for p in params))
        except ValueError as exc:
            raise ConfigError(f"measure: {exc}") from exc
    extra = set(block) - {"breakpoints", "densities", "atoms", "delta_min"}
    if extra:
        raise ConfigError(f"measure: unknown key(s) {sorted(extra)}")
    if "breakpoints" not in block or "densities" not in block:
        raise ConfigError("measure: need canned or breakpoints + densities")
    try:
        return MeasureSpec(block["breakpoints"], block["densities"],
                           atoms=tuple(tuple(a) for a in block.get("atoms", ())),
                           delta_min=block.get("delta_min", 1e-9))
    except ValueError as exc:
        raise ConfigError(f"measure: {exc}") from exc


@dataclass(frozen=True)
class Scenario:
    id: str
    measure: dict
    initial: InitialConfig = field(default_factory=InitialConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    workers: int = 1

    def validate(self) -> "Scenario":
        self.grid.validate()
        self.initial.validate()
        self.experiment.validate()
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        build_measure(self.measure)
        return self

    def spec(self) -> MeasureSpec:
        return build_measure(self.measure)

    def profile(self, spec: MeasureSpec | None = None) -> CapacityProfile:
        return capacity(spec or self.spec(), self.grid.n)

    def data(self, spec: MeasureSpec | None = None,
             profile: CapacityProfile | None = None) -> CompatibleData:
        spec = spec or self.spec()
        profile = profile or capacity(spec, self.grid.n)
        ini = self.initial
        if ini.g_yspace is not None:
            return from_yspace(make_function(ini.g_yspace, "y"), ini.b, spec,
                               self.grid.n, profile=profile)
        x = cell_centers(self.grid.n)
        f = make_function(ini.f_xspace, "x")(x)
        fs = make_function(ini.f_second, "x")(x)
        return from_xspace(f, fs, profile, compat_tol=ini.compat_tol)

    def solve_spectral(self, times=None, spec: MeasureSpec | None = None) -> SolutionField:
        spec = spec or self.spec()
        profile = self.profile(spec)
        data = self.data(spec, profile)
        times = self.grid.sample_times() if times is None else np.asarray(times, dtype=float)
        fam = sweep(self.grid.frequency_grid, profile, data, workers=self.workers)
        return synthesize(fam, data, times, workers=self.workers)

    def solve_oracle(self, times=None, spec: MeasureSpec | None = None) -> SolutionField:
        spec = spec or self.spec()
        profile = self.profile(spec)
        data = self.data(spec, profile)
        times = self.grid.sample_times() if times is None else np.asarray(times, dtype=float)
        return step_scheme(profile, data.f, self.grid.scheme(float(times.max())), times)

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "measure": dict(self.measure),
            "initial": {k: v for k, v in asdict(self.initial).items() if v is not None},
            "grid": {k: v for k, v in asdict(self.grid).items() if v is not None},
            "experiment": asdict(self.experiment),
            "workers": self.workers,
        }
        if d["grid"].get("times") is not None:
            d["grid"]["times"] = list(d["grid"]["times"])
        d["experiment"]["ns"] = list(d["experiment"]["ns"])
        return d


def _take(block, cls, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a table")
    known = set(cls.__dataclass_fields__)
    extra = set(block) - known
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")
    kwargs = dict(block)
    for key in ("times", "ns"):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def scenario_from_dict(d: dict, scenario_id: str | None = None) -> Scenario:
    extra = set(d) - {"id", "measure", "initial", "grid", "experiment", "workers"}
    if extra:
        raise ConfigError(f"unknown top-level key(s) {sorted(extra)}")
    initial = dict(d.get("initial", {}))
    if "f_xspace" in initial or "f_second" in initial:
        initial.setdefault("g_yspace", None)
    sc = Scenario(
        id=str(d.get("id", scenario_id or "scenario")),
        measure=dict(d.get("measure", {"canned": "lebesgue"})),
        initial=_take(initial, InitialConfig, "initial"),
        grid=_take(d.get("grid", {}), GridConfig, "grid"),
        experiment=_take(d.get("experiment", {}), ExperimentConfig, "experiment"),
        workers=int(d.get("workers", 1)),
    )
    return sc.validate()


def load_config(path) -> dict:
    """Parse a TOML or JSON scenario file into a plain dict."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    if str(path).endswith(".json"):
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    try:
        return tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


CANNED_EXAMPLES = {
    "lebesgue": {
        "measure": {"canned": "lebesgue"},
        "initial": {"f_xspace": "cos(2*pi*x)", "f_second": "-4*pi**2*cos(2*pi*x)"},
        "grid": {"times": [0.0, 0.01, 0.05, 0.2], "t_max": 0.2, "dt": 1e-5},
        "experiment": {"kind": "verify"},
    },
    "robin": {
        "measure": {"canned": "lebesgue_plus_delta", "p": 0.5, "c": 0.5},
        "initial": {"g_yspace": "cos(2*pi*y) + sin(2*pi*y)", "b": 0.0},
        "grid": {"times": [0.0, 0.05, 0.1, 0.5], "t_max": 0.5, "dt": 1e-5},
        "experiment": {"kind": "verify"},
    },
    "cantor": {
        "measure": {"canned": "cantor_approx", "n": 14},
        "initial": {"g_yspace": "cos(2*pi*y)", "b": 0.0},
        "grid": {"t_max": 0.5, "n_times": 101},
        "experiment": {"kind": "converge", "family": "cantor", "ns": [2, 3, 4, 5]},
    },
    "merge-atoms": {
        "measure": {"canned": "lebesgue_plus_delta", "p": 0.5, "c": 0.5},
        "initial": {"g_yspace": "cos(2*pi*y)", "b": 0.0},
        "grid": {"t_max": 0.5, "n_times": 101},
        "experiment": {"kind": "converge", "family": "two_atoms", "ns": [4, 8, 16, 32]},
    },
    "incompatible": {
        "measure": {"canned": "lebesgue_plus_delta", "p": 0.5, "c": 0.5},
        "initial": {"g_yspace": "cos(2*pi*y)", "b": 0.0},
        "grid": {"t_max": 0.5, "dt": 1e-5},
        "experiment": {"kind": "counterexample", "family": "two_atoms",
                       "ns": [4, 8, 16, 32], "control": True},
    },
}


def canned_scenario(name: str) -> Scenario:
    if name not in CANNED_EXAMPLES:
        raise ConfigError(f"unknown example {name!r}")
    return scenario_from_dict(CANNED_EXAMPLES[name], scenario_id=name)
