"""Run configuration: loading, field-level validation and digests.

A run is described by one YAML (or JSON) file with four blocks::

    model:      p, q, lam, lambda0, lambda1, beta, nu {...}, forcing {...}
    noise:      seed, t_min, t_max, dt, burn_in
    experiment: alpha, alphas, alpha0, tau, T, M, half_width, ...
    output:     directory, formats

Every key is optional; unknown keys are errors.  :func:`reference_markdown`
renders the table of defaults shipped as ``docs/config_reference.md``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .attractor import DEFAULT_HORIZON
from .dynamics import Forcing, NuProfile, SystemParams
from .noise import DEFAULT_BURN_IN, DEFAULT_DT

__all__ = [
    "ConfigError",
    "ModelConfig",
    "NoiseConfig",
    "ExperimentConfig",
    "OutputConfig",
    "RunConfig",
    "load_config",
    "config_from_dict",
    "reference_markdown",
    "FORMATS",
]

FORMATS = ("csv", "json", "bin")


class ConfigError(ValueError):
    """A config value failed validation; ``field`` is the dotted key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class NuConfig:
    kind: str = "constant"
    nu0: float = 1.0
    freq: float = 1.0
    breakpoints: list[float] = field(default_factory=list)
    values: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class ForcingConfig:
    family: str = "sine"
    amplitude: float = 1.0
    gamma: float = 1.0
    phase: float = 0.0
    profile: str = "inverse_square"
    width: float = 2.0
    kappa0: float | None = None
    Lambda: float | None = None
    t0: float | None = None


@dataclass(frozen=True)
class ModelConfig:
    p: float = 3.0
    q: float = 4.0
    lam: float = 1.0
    lambda0: float = 1.5
    lambda1: float = 1.0
    beta: float = 1.0
    nu: NuConfig = field(default_factory=NuConfig)
    forcing: ForcingConfig = field(default_factory=ForcingConfig)


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    t_min: float = -100.0
    t_max: float = 5.0
    dt: float = DEFAULT_DT
    burn_in: float = DEFAULT_BURN_IN


@dataclass(frozen=True)
class ExperimentConfig:
    # simulate
    alpha: float = 0.5
    t_end: float = 5.0
    initial: str = "ones"
    initial_scale: float = 1.0
    coords: list[int] = field(default_factory=lambda: [0])
    record_every: int = 10
    # sweeps
    alphas: list[float] = field(
        default_factory=lambda: [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625])
    alpha0: float = 0.0
    tau: float = 0.0
    T: float = 20.0
    M: int = 64
    half_width: int = 32
    horizon: float = DEFAULT_HORIZON
    tail_cutoffs: list[int] = field(default_factory=lambda: [8, 16, 24])
    measure_window: float = 20.0
    ds: float = 0.1
    t_list: list[float] = field(default_factory=lambda: [0.0, 1.0])
    dict_size: int = 32
    s: float = 0.0
    t: float = 1.0
    grid_step: float = 0.05
    psi_directions: int = 2
    psi_centers: list[float] = field(default_factory=lambda: [0.25, -0.25])
    psi_scale: float = 1.0
    guard: float = 1e8


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: list[str] = field(default_factory=lambda: list(FORMATS))


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def params(self, alpha: float | None = None) -> SystemParams:
        m = self.model
        nu = NuProfile(m.nu.kind, m.nu.nu0, m.nu.freq, tuple(m.nu.breakpoints),
                       tuple(m.nu.values))
        a = self.experiment.alpha if alpha is None else alpha
        return SystemParams(m.p, m.q, m.lam, m.lambda0, m.lambda1, m.beta, float(a), nu)

    def forcing(self) -> Forcing:
        return Forcing(**asdict(self.model.forcing))

    def physics_dict(self) -> dict:
        """Everything that determines the numbers (output block excluded)."""
        return {"model": asdict(self.model), "noise": asdict(self.noise),
                "experiment": asdict(self.experiment)}

    def digest(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_dict(self) -> dict:
        return asdict(self)


_NESTED = {"nu": NuConfig, "forcing": ForcingConfig}


def _coerce(value, annotation: str, name: str):
    ann = annotation.replace(" ", "")
    optional = ann.endswith("|None")
    base = ann[:-5] if optional else ann
    if value is None:
        if optional:
            return None
        raise ConfigError(name, "must not be null")
    if base == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(name, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(name, "must be finite")
        return float(value)
    if base == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if base == "str":
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    if base.startswith("list["):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(name, f"expected a list, got {value!r}")
        inner = base[5:-1]
        return [_coerce(v, inner, f"{name}[{i}]") for i, v in enumerate(value)]
    raise AssertionError(f"unhandled annotation {annotation}")


def _build(cls, data, prefix: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(prefix, f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    kw = {}
    for name, f in known.items():
        if name not in data:
            continue
        dotted = f"{prefix}.{name}"
        if name in _NESTED and cls is ModelConfig:
            kw[name] = _build(_NESTED[name], data[name], dotted)
        else:
            kw[name] = _coerce(data[name], str(f.type), dotted)
    return cls(**kw)


def _check(cond: bool, name: str, message: str):
    if not cond:
        raise ConfigError(name, message)


def _validate(cfg: RunConfig) -> None:
    m, nz, ex, out = cfg.model, cfg.noise, cfg.experiment, cfg.output
    _check(m.p >= 2, "model.p", "must be >= 2")
    _check(m.q >= 1, "model.q", "must be >= 1")
    _check(m.lam > 0, "model.lam", "must be positive")
    _check(0 < m.lambda1 < m.lambda0 < 2 * m.lam, "model.lambda0",
           "need 0 < lambda1 < lambda0 < 2 lam")
    _check(m.beta > 0, "model.beta", "must be positive")
    try:
        params = cfg.params()
    except ValueError as err:
        raise ConfigError("model.nu", str(err)) from None
    try:
        cfg.forcing().validate(params)
    except ValueError as err:
        raise ConfigError("model.forcing", str(err)) from None

    _check(nz.seed >= 0, "noise.seed", "must be nonnegative")
    _check(nz.dt > 0, "noise.dt", "must be positive")
    _check(nz.t_min < 0 < nz.t_max, "noise.t_min", "need t_min < 0 < t_max")
    _check(nz.burn_in >= 0, "noise.burn_in", "must be nonnegative")
    for key in ("t_min", "t_max"):
        v = getattr(nz, key) / nz.dt
        _check(abs(v - round(v)) < 1e-6, f"noise.{key}", "must be a multiple of noise.dt")

    _check(ex.half_width >= 1, "experiment.half_width", "must be >= 1")
    n = 2 * ex.half_width + 1
    _check(ex.initial in ("ones", "zeros", "bump"), "experiment.initial",
           "must be one of ones, zeros, bump")
    _check(ex.t_end >= 0, "experiment.t_end", "must be >= 0")
    _check(ex.record_every >= 1, "experiment.record_every", "must be >= 1")
    for i, c in enumerate(ex.coords):
        _check(-ex.half_width <= c <= ex.half_width, f"experiment.coords[{i}]",
               f"site {c} outside the window [-{ex.half_width}, {ex.half_width}]")
    _check(len(ex.alphas) >= 1, "experiment.alphas", "must not be empty")
    _check(ex.T > 0, "experiment.T", "must be positive")
    _check(ex.M >= 2, "experiment.M", "must be at least 2")
    _check(ex.horizon > 0, "experiment.horizon", "must be positive")
    for i, c in enumerate(ex.tail_cutoffs):
        _check(0 <= c < ex.half_width, f"experiment.tail_cutoffs[{i}]",
               "must lie in [0, half_width)")
    _check(ex.measure_window >= 0, "experiment.measure_window", "must be >= 0")
    _check(ex.ds > 0, "experiment.ds", "must be positive")
    _check(len(ex.t_list) >= 1, "experiment.t_list", "must not be empty")
    _check(ex.dict_size >= 4 and ex.dict_size % 4 == 0, "experiment.dict_size",
           "must be a positive multiple of 4")
    _check(ex.s <= ex.t, "experiment.s", "need s <= t")
    _check(ex.grid_step > 0, "experiment.grid_step", "must be positive")
    _check(ex.psi_directions >= 1, "experiment.psi_directions", "must be >= 1")
    _check(len(ex.psi_centers) == ex.psi_directions, "experiment.psi_centers",
           "need one centre per direction")
    _check(ex.psi_scale > 0, "experiment.psi_scale", "must be positive")
    _check(ex.guard > 0, "experiment.guard", "must be positive")
    _check(n <= 10001, "experiment.half_width", "window too large")
    for key in ("ds", "grid_step"):
        v = getattr(ex, key) / nz.dt
        _check(abs(v - round(v)) < 1e-6, f"experiment.{key}", "must be a multiple of noise.dt")
    steps = (ex.t - ex.s) / ex.grid_step
    _check(abs(steps - round(steps)) < 1e-6, "experiment.grid_step",
           "must divide t - s")
    for i, f in enumerate(out.formats):
        _check(f in FORMATS, f"output.formats[{i}]", f"must be one of {', '.join(FORMATS)}")


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig; raises ConfigError with the dotted key."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    blocks = {"model": ModelConfig, "noise": NoiseConfig, "experiment": ExperimentConfig,
              "output": OutputConfig}
    for key in data:
        if key not in blocks:
            raise ConfigError(key, "unknown block")
    cfg = RunConfig(**{k: _build(cls, data.get(k), k) for k, cls in blocks.items()})
    _validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("--config", f"cannot read {path}: {err.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError("--config", f"not valid YAML/JSON: {err}") from None
    return config_from_dict(data)


_DOCS = {
    "model.p": "exponent of the discrete p-Laplacian (>= 2)",
    "model.q": "growth exponent of the nonlinearity (>= 1)",
    "model.lam": "linear damping lambda",
    "model.lambda0": "dissipation rate in the absorbing-radius formula",
    "model.lambda1": "secondary rate, 0 < lambda1 < lambda0 < 2 lam",
    "model.beta": "coefficient of the dissipative part of f",
    "model.nu.kind": "constant | sine | piecewise",
    "model.nu.nu0": "upper bound of nu(t)",
    "model.nu.freq": "frequency of the sine profile",
    "model.nu.breakpoints": "breakpoints of the piecewise profile",
    "model.nu.values": "values of the piecewise profile",
    "model.forcing.family": "sine | zero",
    "model.forcing.amplitude": "amplitude c of the spatial profile g",
    "model.forcing.gamma": "temporal frequency of the forcing",
    "model.forcing.phase": "temporal phase of the forcing",
    "model.forcing.profile": "inverse_square (c/(1+i^2)) | gaussian",
    "model.forcing.width": "width of the gaussian profile",
    "model.forcing.kappa0": "growth constant required when q < 2",
    "model.forcing.Lambda": "growth constant required when q < 2",
    "model.forcing.t0": "growth constant required when q < 2",
    "noise.seed": "seed of the two-sided Wiener path",
    "noise.t_min": "left end of the sampled path",
    "noise.t_max": "right end of the sampled path",
    "noise.dt": "grid step shared by noise and integrator",
    "noise.burn_in": "OU burn-in before t_min",
    "experiment.alpha": "noise intensity for simulate",
    "experiment.t_end": "final time for simulate (start is tau)",
    "experiment.initial": "initial state for simulate: ones | zeros | bump",
    "experiment.initial_scale": "factor applied to the initial state",
    "experiment.coords": "lattice sites written to the trajectory CSV",
    "experiment.record_every": "write every k-th time step of the trajectory",
    "experiment.alphas": "alpha_n values of the sweeps",
    "experiment.alpha0": "limit value alpha_0 of the sweeps",
    "experiment.tau": "base time of the pullback and measure sweeps",
    "experiment.T": "pullback time",
    "experiment.M": "points per attractor cloud",
    "experiment.half_width": "lattice window half width N (sites -N..N)",
    "experiment.horizon": "truncation horizon L of the absorbing-radius integral",
    "experiment.tail_cutoffs": "cutoffs of the attractor tail table",
    "experiment.measure_window": "Cesaro averaging window of the empirical measures",
    "experiment.ds": "spacing of the start times in the Cesaro average",
    "experiment.t_list": "measurement times of the measure sweep",
    "experiment.dict_size": "size of the bounded-Lipschitz dictionary",
    "experiment.s": "left end of the Liouville interval",
    "experiment.t": "right end of the Liouville interval",
    "experiment.grid_step": "measure grid spacing on the Liouville interval",
    "experiment.psi_directions": "number of directions of the Liouville functional",
    "experiment.psi_centers": "bump centres of the Liouville functional",
    "experiment.psi_scale": "bump slope of the Liouville functional",
    "experiment.guard": "norm above which a run is declared blown up",
    "output.directory": "output directory (overridden by --out)",
    "output.formats": "subset of csv, json, bin",
}


def _flatten(obj, prefix=""):
    for key, value in obj.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            yield from _flatten(value, name)
        else:
            yield name, value


def reference_markdown() -> str:
    """Markdown table of every config key with its default."""
    lines = ["# Configuration reference", "",
             "Generated by `stochlattice.config.reference_markdown()`.", "",
             "| key | default | meaning |", "| --- | --- | --- |"]
    for name, value in _flatten(RunConfig().to_dict()):
        lines.append(f"| `{name}` | `{json.dumps(value)}` | {_DOCS.get(name, '')} |")
    return "\n".join(lines) + "\n"
