"""Empirical invariant sample measures as Cesaro averages of pullback states.

The measure at time t for the sample ``theta_t w`` is approximated by the
uniform average of the states ``u(t, s, w, xi(s))`` over start times s on a
grid of ``[t - window, t]``.  All of these are solutions driven by the same
path w, so a whole time-indexed family comes out of one staggered batch run.
Paths given to :func:`empirical_measure` and :func:`measure_family` are the
driving path w itself; the sweep helpers take a base sample and a base time
tau and drive with ``theta_{-tau} w``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .attractor import DEFAULT_HORIZON, absorbing_radius, check_same_path
from .dynamics import Forcing, SystemParams, evolve_rows
from .noise import NoisePath, path_digest, theta_shift
from .testfunctions import TestFunctionDict
from .trend import decreasing_trend

__all__ = [
    "EnsembleMeasure",
    "empirical_measure",
    "measure_family",
    "integrate_against",
    "push_forward",
    "invariance_residual",
    "invariance_residuals",
    "bl_distance",
    "measure_sweep",
    "MeasureSweep",
    "start_grid",
    "working_radius",
]


@dataclass(frozen=True, eq=False)
class EnsembleMeasure:
    """Weighted particles; ``provenance`` records alpha, times and the path."""

    particles: np.ndarray
    weights: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        x = np.array(self.particles, dtype=float)
        w = np.array(self.weights, dtype=float)
        if x.ndim != 2 or x.shape[0] == 0:
            raise ValueError("particles must be a nonempty (K, n) matrix")
        if w.shape != (x.shape[0],):
            raise ValueError("one weight per particle")
        if np.any(w < 0) or not np.isfinite(w).all():
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "particles", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, particles, **provenance) -> "EnsembleMeasure":
        x = np.atleast_2d(particles)
        return cls(x, np.full(x.shape[0], 1.0 / x.shape[0]), dict(provenance))

    @classmethod
    def point_mass(cls, x, **provenance) -> "EnsembleMeasure":
        return cls(np.atleast_2d(x), np.ones(1), dict(provenance))

    @property
    def size(self) -> int:
        return self.particles.shape[0]


def start_grid(t: float, window: float, ds: float) -> np.ndarray:
    """Start times ``t, t - ds, ...`` down to ``t - window``, increasing."""
    if not ds > 0:
        raise ValueError("ds must be positive")
    if window < 0:
        raise ValueError("window must be nonnegative")
    count = int(np.floor(window / ds + 1e-9))
    return t - ds * np.arange(count, -1, -1)


def _anchor_states(anchor, starts: np.ndarray, n: int, path: NoisePath) -> np.ndarray:
    if anchor is None:
        return np.zeros((starts.size, n))
    return np.vstack([np.asarray(anchor(float(s), path), dtype=float) for s in starts])


def measure_family(alpha: float, times: Sequence[float], window: float, path: NoisePath,
                   ds: float, params: SystemParams, forcing: Forcing, half_width: int = 32,
                   anchor: Callable | None = None, merge_tol: float = 1e-12,
                   threads: int = 1) -> dict:
    """Empirical measures at several times from one batch of solutions.

    The measure at time ``sigma`` holds the states at ``sigma`` of all
    solutions started on the global ``ds`` grid inside
    ``[sigma - window, sigma]``.  ``anchor(s, path)`` gives the initial state
    at start time s (zero by default).  Returns ``{sigma: EnsembleMeasure}``.
    """
    times = sorted(float(t) for t in times)
    if not times:
        raise ValueError("no measurement times")
    if window < 0:
        raise ValueError("window must be nonnegative")
    n = 2 * half_width + 1
    k_ds = int(round(ds / path.dt))
    if k_ds < 1 or abs(k_ds * path.dt - ds) > 1e-9 * ds:
        raise ValueError("ds must be a positive multiple of the path step")
    # global start grid: multiples of ds covering every window
    lo = int(np.ceil((times[0] - window) / ds - 1e-9))
    hi = int(np.floor(times[-1] / ds + 1e-9))
    starts = np.arange(lo, hi + 1) * ds
    if starts.size == 0:
        raise ValueError("empty averaging window")
    u0 = _anchor_states(anchor, starts, n, path)
    rec = evolve_rows(u0, list(starts), times[-1], path, params, forcing,
                      alphas=[alpha] * starts.size, record_times=times,
                      merge_tol=merge_tol, threads=threads)
    digest = path_digest(path)
    out = {}
    for j, sigma in enumerate(times):
        sel = (starts <= sigma + 1e-9) & (starts >= sigma - window - 1e-9)
        if not sel.any():
            raise ValueError(f"empty averaging window at t={sigma}")
        out[sigma] = EnsembleMeasure.uniform(
            rec[j][sel], alpha=float(alpha), t=sigma, window=float(window), ds=float(ds),
            path_digest=digest)
    return out


def empirical_measure(alpha: float, t: float, tau_min: float, path: NoisePath, ds: float,
                      params: SystemParams, forcing: Forcing, anchor: Callable | None = None,
                      half_width: int = 32, **kw) -> EnsembleMeasure:
    """Cesaro surrogate of the invariant sample measure at ``(t, theta_t w)``.

    Particles are ``u(t, s, w, xi(s))`` for s on the ds grid of
    ``[tau_min, t]`` (aligned at t), all with equal weight.
    """
    if tau_min > t:
        raise ValueError("empty averaging window")
    window = t - tau_min
    n = 2 * half_width + 1
    starts = start_grid(t, window, ds)
    u0 = _anchor_states(anchor, starts, n, path)
    final = evolve_rows(u0, list(starts), t, path, params, forcing,
                        alphas=[alpha] * starts.size, **kw)
    return EnsembleMeasure.uniform(final, alpha=float(alpha), t=float(t), window=float(window),
                                   ds=float(ds), path_digest=path_digest(path))


def _values(psi, X: np.ndarray) -> np.ndarray:
    if hasattr(psi, "evaluate"):
        return np.asarray(psi.evaluate(X), dtype=float)
    return np.array([float(psi(x)) for x in X])


def integrate_against(mu: EnsembleMeasure, psi) -> float:
    """``sum_j w_j psi(x_j)``.

    ``psi`` is either an object with a vectorized ``evaluate(X)`` or a plain
    callable applied to one particle (a 1-d array) at a time.
    """
    return float(np.dot(mu.weights, _values(psi, mu.particles)))


def push_forward(mu: EnsembleMeasure, t_from: float, t_step: float, path: NoisePath,
                 params: SystemParams, forcing: Forcing, alpha: float | None = None,
                 **kw) -> EnsembleMeasure:
    """Move every particle by ``u(t_from + t_step, t_from, w, .)``; weights kept."""
    if t_step < 0:
        raise ValueError("t_step must be nonnegative")
    a = mu.provenance.get("alpha", params.alpha) if alpha is None else alpha
    moved = evolve_rows(mu.particles, [t_from] * mu.size, t_from + t_step, path, params,
                        forcing, alphas=[a] * mu.size, **kw)
    prov = dict(mu.provenance, t=float(t_from + t_step))
    return EnsembleMeasure(moved, mu.weights, prov)


def invariance_residual(mu_family: dict, t0: float, t_step: float, psi, path: NoisePath,
                        params: SystemParams, forcing: Forcing) -> float:
    """``|int psi d mu_{t0+t_step} - int psi(u(t0+t_step, t0, w, .)) d mu_{t0}|``."""
    return float(invariance_residuals(mu_family, t0, t_step, [psi], path, params, forcing)[0])


def invariance_residuals(mu_family: dict, t0: float, t_step: float, psis, path: NoisePath,
                         params: SystemParams, forcing: Forcing) -> np.ndarray:
    """Invariance residuals for several functionals with a single push-forward."""
    keys = {round(k, 9): k for k in mu_family}
    try:
        mu0 = mu_family[keys[round(t0, 9)]]
        mu1 = mu_family[keys[round(t0 + t_step, 9)]]
    except KeyError as err:
        raise ValueError(f"measure family lacks time {err.args[0]}") from None
    if t_step == 0:
        return np.zeros(len(psis))
    pushed = push_forward(mu0, t0, t_step, path, params, forcing)
    return np.array([abs(integrate_against(mu1, p) - integrate_against(pushed, p))
                     for p in psis])


def bl_distance(mu1: EnsembleMeasure, mu2: EnsembleMeasure, dictionary) -> float:
    """``max_Psi |int Psi d mu1 - int Psi d mu2|`` over the dictionary."""
    if len(dictionary) == 0:
        raise ValueError("empty dictionary")
    if mu1.particles.shape[1] != mu2.particles.shape[1]:
        raise ValueError("measures live on different windows")
    if isinstance(dictionary, TestFunctionDict):
        a = dictionary.evaluate(mu1.particles) @ mu1.weights
        b = dictionary.evaluate(mu2.particles) @ mu2.weights
        return float(np.max(np.abs(a - b)))
    return float(max(abs(integrate_against(mu1, f) - integrate_against(mu2, f))
                     for f in dictionary))


def working_radius(alphas, t_list, tau, path, params, forcing, half_width=32,
                   horizon: float = DEFAULT_HORIZON) -> float:
    """Largest absorbing radius over the alphas and times of a sweep."""
    r = 0.0
    for a in alphas:
        for t in t_list:
            ball = absorbing_radius(a, t, theta_shift(path, t - tau), params, forcing,
                                    horizon=horizon, half_width=half_width)
            r = max(r, ball.radius)
    return r


@dataclass(frozen=True, eq=False)
class MeasureSweep:
    rows: list
    measures: dict
    path_digest: str

    def distances(self, t: float) -> np.ndarray:
        return np.array([r["bl_distance"] for r in self.rows if r["t"] == t])

    def trend(self, shrink: float = 5.0):
        """Per-t trend diagnostics over the alpha order of the sweep."""
        ts = sorted({r["t"] for r in self.rows})
        return {t: decreasing_trend(self.distances(t), shrink) for t in ts}


def measure_sweep(alpha_list: Sequence[float], alpha0: float, t_list: Sequence[float],
                  tau: float, path, window: float, params: SystemParams, forcing: Forcing,
                  dictionary: TestFunctionDict | None = None, ds: float = 0.5,
                  half_width: int = 32, dict_size: int = 32, radius: float | None = None,
                  merge_tol: float = 1e-12, threads: int = 1,
                  horizon: float = DEFAULT_HORIZON) -> MeasureSweep:
    """bl distances between the alpha_n and alpha_0 measures at each t.

    Measures at time t are built for the sample ``theta_{t - tau} w``, i.e.
    driven by ``theta_{-tau} w``.  ``path`` may be one NoisePath or a list
    that must all be the same sample.
    """
    if isinstance(path, NoisePath):
        digest = path_digest(path)
    else:
        digest = check_same_path(path)
        path = path[0]
    drive = theta_shift(path, -tau)
    alphas = [float(alpha0)] + [float(a) for a in alpha_list if float(a) != float(alpha0)]
    fams = {a: measure_family(a, t_list, window, drive, ds, params, forcing, half_width,
                              merge_tol=merge_tol, threads=threads) for a in alphas}
    if dictionary is None:
        if radius is None:
            radius = working_radius(alphas, t_list, tau, path, params, forcing, half_width,
                                    horizon)
        dictionary = TestFunctionDict.build(dict_size, half_width, max(radius, 1e-6))
    rows = []
    ref = fams[float(alpha0)]
    for a in alpha_list:
        for t in sorted(float(x) for x in t_list):
            rows.append({"alpha": float(a), "t": t,
                         "bl_distance": bl_distance(fams[float(a)][t], ref[t], dictionary),
                         "window": float(window), "dict_size": len(dictionary)})
    return MeasureSweep(rows, fams, digest)
