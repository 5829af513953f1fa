"""Two-sided Wiener paths, the shift theta_s and the stationary OU process.

A :class:`NoisePath` lives on the uniform grid ``t_k = t_min + k dt`` which
always contains ``t = 0``.  Shifting by a multiple of ``dt`` only moves the
origin index, so ``theta_shift`` is exact and cheap: the arrays are reused
and ``z(theta_t(theta_s w)) = z(theta_{t+s} w)`` holds bit-for-bit.

The OU variable solves ``dz = -z dt + dw`` and is advanced with

    z_{k+1} = exp(-dt) z_k + exp(-dt/2) (w_{k+1} - w_k),

started from a burn-in segment drawn from a child stream of the same seed.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "NoisePath",
    "sample_wiener",
    "theta_shift",
    "ou_attach",
    "z_at",
    "coarsen",
    "refine",
    "save_path",
    "load_path",
    "path_digest",
    "DEFAULT_DT",
    "DEFAULT_BURN_IN",
]

DEFAULT_DT = 1e-3
DEFAULT_BURN_IN = 20.0

_HEADER = struct.Struct("<qdddd")
_GRID_TOL = 1e-6


def _grid_steps(t: float, dt: float, what: str) -> int:
    k = round(t / dt)
    if abs(t / dt - k) > _GRID_TOL:
        raise ValueError(f"{what}={t!r} is not a multiple of dt={dt!r}")
    return int(k)


@dataclass(frozen=True, eq=False)
class NoisePath:
    """A sampled path w on a grid aligned to 0, optionally with its OU path.

    ``w_values[k]`` is ``w(t_min + k dt)`` and ``z_values[k]`` is
    ``z(theta_{t_min + k dt} w)``.
    """

    t_min: float
    t_max: float
    dt: float
    w_values: np.ndarray
    z_values: np.ndarray | None = None
    seed: int = 0
    burn_in: float = DEFAULT_BURN_IN
    origin: int = field(init=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        origin = _grid_steps(-self.t_min, self.dt, "t_min")
        last = _grid_steps(self.t_max, self.dt, "t_max") + origin
        w = np.asarray(self.w_values, dtype=float)
        if w.ndim != 1 or w.size != last + 1:
            raise ValueError(f"w_values has {w.size} entries, grid needs {last + 1}")
        if not (0 <= origin <= last):
            raise ValueError("grid must contain t = 0")
        w.setflags(write=False)
        object.__setattr__(self, "w_values", w)
        object.__setattr__(self, "origin", origin)
        if self.z_values is not None:
            z = np.asarray(self.z_values, dtype=float)
            if z.shape != w.shape:
                raise ValueError("z_values must match w_values")
            z.setflags(write=False)
            object.__setattr__(self, "z_values", z)

    @property
    def n_points(self) -> int:
        return self.w_values.size

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.origin) * self.dt

    def index(self, t: float) -> int:
        """Grid index of time ``t`` (must lie on the grid)."""
        k = _grid_steps(t, self.dt, "t") + self.origin
        if not 0 <= k < self.n_points:
            raise ValueError(f"t={t!r} outside path grid [{self.t_min}, {self.t_max}]")
        return k

    def covers(self, t0: float, t1: float) -> bool:
        eps = _GRID_TOL * self.dt
        return self.t_min - eps <= t0 and t1 <= self.t_max + eps

    def require_z(self) -> np.ndarray:
        if self.z_values is None:
            raise ValueError("path has no OU values; call ou_attach first")
        return self.z_values

    def w_at(self, t: float) -> float:
        return _interp(self.w_values, self, t)


def _interp(values: np.ndarray, path: NoisePath, t: float) -> float:
    x = (t - path.t_min) / path.dt
    if x < -_GRID_TOL or x > path.n_points - 1 + _GRID_TOL:
        raise ValueError(f"t={t!r} outside path grid [{path.t_min}, {path.t_max}]")
    k = round(x)
    if abs(x - k) <= _GRID_TOL:
        return float(values[int(k)])
    k = int(math.floor(x))
    frac = x - k
    return float((1.0 - frac) * values[k] + frac * values[k + 1])


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    ss = np.random.SeedSequence(int(seed))
    wiener, burn = ss.spawn(2)
    return np.random.default_rng(wiener), np.random.default_rng(burn)


def sample_wiener(seed: int, t_min: float, t_max: float, dt: float = DEFAULT_DT,
                  burn_in: float = DEFAULT_BURN_IN) -> NoisePath:
    """Draw a two-sided Wiener path on ``[t_min, t_max]`` with ``w(0) = 0``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_min < 0 < t_max:
        raise ValueError("need t_min < 0 < t_max")
    n_neg = _grid_steps(-t_min, dt, "t_min")
    n_pos = _grid_steps(t_max, dt, "t_max")
    rng, _ = _streams(seed)
    incr = rng.standard_normal(n_neg + n_pos) * math.sqrt(dt)
    w = np.concatenate([[0.0], np.cumsum(incr)])
    w -= w[n_neg]
    w[n_neg] = 0.0
    return NoisePath(t_min=-n_neg * dt, t_max=n_pos * dt, dt=dt, w_values=w,
                     seed=int(seed), burn_in=float(burn_in))


def _ou_filter(increments: np.ndarray, dt: float, z0: float) -> np.ndarray:
    """Run the OU recursion; returns ``z_1..z_n`` given ``z_0``."""
    a = math.exp(-dt)
    b = math.exp(-dt / 2)
    out, _ = lfilter([b], [1.0, -a], increments, zi=[a * z0])
    return out


def ou_attach(path: NoisePath, z_init: float | None = None) -> NoisePath:
    """Attach ``z(theta_t w)`` on the grid of ``path``.

    ``z(t_min)`` comes from running the recursion over ``burn_in`` time units
    of increments from the seed's burn-in stream, starting at 0; pass
    ``z_init`` to fix it instead.
    """
    if path.w_values is None:
        raise ValueError("path has no Wiener values")
    dt = path.dt
    if z_init is None:
        n_burn = int(round(path.burn_in / dt))
        z0 = 0.0
        if n_burn > 0:
            _, burn_rng = _streams(path.seed)
            burn_incr = burn_rng.standard_normal(n_burn) * math.sqrt(dt)
            z0 = float(_ou_filter(burn_incr, dt, 0.0)[-1])
    else:
        z0 = float(z_init)
    z = np.empty(path.n_points)
    z[0] = z0
    if path.n_points > 1:
        z[1:] = _ou_filter(np.diff(path.w_values), dt, z0)
    return replace(path, z_values=z)


def theta_shift(path: NoisePath, s: float) -> NoisePath:
    """Return the path ``t -> w(t + s) - w(s)`` on the shifted grid."""
    if not path.covers(s, s):
        raise ValueError(f"shift {s!r} leaves no grid containing 0")
    x = s / path.dt
    m = round(x)
    if abs(x - m) <= _GRID_TOL:
        m = int(m)
        k = path.origin + m
        w = path.w_values - path.w_values[k]
        w[k] = 0.0
        return replace(path, t_min=path.t_min - m * path.dt, t_max=path.t_max - m * path.dt,
                       w_values=w, z_values=path.z_values)
    # off-grid shift: resample on the largest grid aligned to the new origin
    dt = path.dt
    n_neg = int(math.floor((s - path.t_min) / dt + _GRID_TOL))
    n_pos = int(math.floor((path.t_max - s) / dt + _GRID_TOL))
    new_t = s + np.arange(-n_neg, n_pos + 1) * dt
    old_t = path.times
    w = np.interp(new_t, old_t, path.w_values)
    w -= w[n_neg]
    w[n_neg] = 0.0
    z = None if path.z_values is None else np.interp(new_t, old_t, path.z_values)
    return replace(path, t_min=-n_neg * dt, t_max=n_pos * dt, w_values=w, z_values=z)


def z_at(path: NoisePath, t: float) -> float:
    """Linear interpolation of ``z(theta_t w)``."""
    return _interp(path.require_z(), path, t)


def coarsen(path: NoisePath, factor: int, keep_z: bool = False) -> NoisePath:
    """Keep every ``factor``-th grid point of w.

    The coarse path shares w with ``path`` at the common times.  By default
    the OU recursion is rerun on the coarse grid from the same ``z(t_min)``;
    ``keep_z=True`` subsamples the fine z instead, which is the more accurate
    value of the same OU functional of w.
    """
    factor = int(factor)
    if factor < 1:
        raise ValueError("factor must be >= 1")
    if path.origin % factor or (path.n_points - 1 - path.origin) % factor:
        raise ValueError("grid length not divisible by factor")
    start = path.origin % factor
    w = path.w_values[start::factor]
    coarse = replace(path, dt=path.dt * factor, w_values=w, z_values=None)
    if path.z_values is None:
        return coarse
    if keep_z:
        return replace(coarse, z_values=path.z_values[start::factor])
    return ou_attach(coarse, z_init=float(path.z_values[0]))


def refine(path: NoisePath) -> NoisePath:
    """Halve ``dt`` by Brownian-bridge midpoints drawn from the seed's stream.

    The refined w agrees with ``path`` on the old grid; z is recomputed from the
    same ``z(t_min)``.
    """
    dt = path.dt / 2
    ss = np.random.SeedSequence(int(path.seed), spawn_key=(7, path.n_points))
    rng = np.random.default_rng(ss)
    mid = 0.5 * (path.w_values[:-1] + path.w_values[1:])
    mid = mid + rng.standard_normal(mid.size) * math.sqrt(dt / 2)
    w = np.empty(2 * path.n_points - 1)
    w[0::2] = path.w_values
    w[1::2] = mid
    fine = replace(path, dt=dt, w_values=w, z_values=None)
    if path.z_values is None:
        return fine
    return ou_attach(fine, z_init=float(path.z_values[0]))


def _to_bytes(path: NoisePath) -> bytes:
    header = _HEADER.pack(int(path.seed), float(path.t_min), float(path.t_max),
                          float(path.dt), float(path.burn_in))
    parts = [header, np.ascontiguousarray(path.w_values, dtype="<f8").tobytes()]
    if path.z_values is not None:
        parts.append(np.ascontiguousarray(path.z_values, dtype="<f8").tobytes())
    return b"".join(parts)


def save_path(path: NoisePath, filename: str | Path) -> str:
    """Write the binary path file and return its sha256 digest."""
    data = _to_bytes(path)
    Path(filename).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_path(filename: str | Path) -> NoisePath:
    data = Path(filename).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{filename}: truncated noise file")
    seed, t_min, t_max, dt, burn_in = _HEADER.unpack_from(data)
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(float)
    n = _grid_steps(t_max, dt, "t_max") + _grid_steps(-t_min, dt, "t_min") + 1
    if body.size == n:
        w, z = body, None
    elif body.size == 2 * n:
        w, z = body[:n], body[n:]
    else:
        raise ValueError(f"{filename}: expected {n} or {2 * n} values, found {body.size}")
    return NoisePath(t_min=t_min, t_max=t_max, dt=dt, w_values=w, z_values=z,
                     seed=seed, burn_in=burn_in)


def path_digest(path: NoisePath) -> str:
    return hashlib.sha256(_to_bytes(path)).hexdigest()
