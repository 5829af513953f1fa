"""Model constants, forcing, the conjugated vector field and its integrator.

With ``v = exp(-alpha z(theta_t w)) u`` the stochastic lattice equation
becomes the pathwise random ODE ``dv/dt = F(t, w, v)`` with

    F = -exp(alpha (p-2) z) nu(t) A v + (alpha z - lambda) v
        + exp(-alpha z) f(t, exp(alpha z) v).

Everything is integrated with explicit Heun steps on the grid of the noise
path, so no noise is ever resampled when alpha changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

from . import _kernel
from .lattice import LatticeVec, apply_A, norms_along_last, signed_pow
from .noise import NoisePath, theta_shift

__all__ = [
    "IntegrationError",
    "NuProfile",
    "SystemParams",
    "Forcing",
    "Trajectory",
    "rhs_F",
    "rhs_terms",
    "integrate",
    "cocycle_phi",
    "evolve_rows",
    "energy_inequality",
    "diag_G1",
    "diag_G2",
    "diag_E",
    "weighted_radii",
    "tempered_decay_rate",
    "check_tempered",
]


class IntegrationError(ArithmeticError):
    """A state left the guard box (NaN or too large); the step is too big."""

    def __init__(self, message, row=None, time=None):
        super().__init__(message)
        self.row = row
        self.time = time


@dataclass(frozen=True)
class NuProfile:
    """Diffusion coefficient nu(t) with declared bound ``0 <= nu <= nu0``.

    kinds: ``constant`` (nu = nu0), ``sine`` (nu0 (1 + sin(freq t)) / 2) and
    ``piecewise`` (value ``values[j]`` on ``[breakpoints[j-1], breakpoints[j])``).
    """

    kind: str = "constant"
    nu0: float = 1.0
    freq: float = 1.0
    breakpoints: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "sine", "piecewise"):
            raise ValueError(f"unknown nu profile kind {self.kind!r}")
        if self.nu0 < 0:
            raise ValueError("nu0 must be nonnegative")
        if self.kind == "piecewise":
            if len(self.values) != len(self.breakpoints) + 1:
                raise ValueError("piecewise nu needs len(values) == len(breakpoints) + 1")
            if list(self.breakpoints) != sorted(self.breakpoints):
                raise ValueError("piecewise breakpoints must be increasing")
            if any(not 0 <= x <= self.nu0 for x in self.values):
                raise ValueError("piecewise nu values must lie in [0, nu0]")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.full_like(t, self.nu0)
        if self.kind == "sine":
            return 0.5 * self.nu0 * (1.0 + np.sin(self.freq * t))
        idx = np.searchsorted(np.asarray(self.breakpoints, dtype=float), t, side="right")
        return np.asarray(self.values, dtype=float)[idx]


@dataclass(frozen=True)
class SystemParams:
    p: float = 3.0
    q: float = 4.0
    lam: float = 1.0
    lambda0: float = 1.5
    lambda1: float = 1.0
    beta: float = 1.0
    alpha: float = 0.5
    nu: NuProfile = field(default_factory=NuProfile)

    def __post_init__(self):
        if not self.p >= 2:
            raise ValueError(f"p must be >= 2, got {self.p}")
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.lambda1 < self.lambda0 < 2 * self.lam:
            raise ValueError("need 0 < lambda1 < lambda0 < 2 lambda")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")

    def with_alpha(self, alpha: float) -> "SystemParams":
        return SystemParams(self.p, self.q, self.lam, self.lambda0, self.lambda1,
                            self.beta, float(alpha), self.nu)


@dataclass(frozen=True)
class Forcing:
    """``f_i(t, u) = -beta |u|^{q-2} u + g_i sin(gamma t + phase)``.

    ``family="zero"`` switches f off entirely.  The spatial profile is
    ``amplitude / (1 + i^2)`` (``inverse_square``) or
    ``amplitude exp(-i^2 / (2 width^2))`` (``gaussian``).  ``kappa0``,
    ``Lambda`` and ``t0`` are the growth constants needed when ``q < 2``;
    they are validated but never used by the simulator.
    """

    family: str = "sine"
    amplitude: float = 1.0
    gamma: float = 1.0
    phase: float = 0.0
    profile: str = "inverse_square"
    width: float = 2.0
    kappa0: float | None = None
    Lambda: float | None = None
    t0: float | None = None

    def __post_init__(self):
        if self.family not in ("sine", "zero"):
            raise ValueError(f"unknown forcing family {self.family!r}")
        if self.profile not in ("inverse_square", "gaussian"):
            raise ValueError(f"unknown forcing profile {self.profile!r}")
        if self.profile == "gaussian" and not self.width > 0:
            raise ValueError("gaussian profile width must be positive")

    def validate(self, params: SystemParams) -> None:
        if self.family == "sine" and self.amplitude != 0 and params.q <= 1:
            raise ValueError("the sine forcing needs q > 1 for an l^1 dissipativity bound")
        if params.q < 2 and self.family != "zero":
            if None in (self.kappa0, self.Lambda, self.t0):
                raise ValueError("q < 2 requires kappa0, Lambda and t0")
            if not (self.kappa0 > 0 and self.Lambda > 0 and self.t0 > 0):
                raise ValueError("kappa0, Lambda, t0 must be positive")
            if not params.q * params.lambda0 > 2 * self.kappa0:
                raise ValueError("need q lambda0 > 2 kappa0")

    def g(self, half_width: int) -> np.ndarray:
        i = np.arange(-half_width, half_width + 1, dtype=float)
        if self.family == "zero":
            return np.zeros_like(i)
        if self.profile == "inverse_square":
            return self.amplitude / (1.0 + i * i)
        return self.amplitude * np.exp(-i * i / (2.0 * self.width**2))

    def time_factor(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "zero":
            return np.zeros_like(t)
        return np.sin(self.gamma * t + self.phase)

    def damping(self, params: SystemParams) -> float:
        return 0.0 if self.family == "zero" else params.beta

    def dissipation(self, params: SystemParams) -> float:
        """Constant ``b`` in ``f_i(t,u) u <= -b |u|^q + psi_1i(t)``.

        Half of beta is spent absorbing the ``g_i`` term by Young's inequality.
        """
        return 0.0 if self.family == "zero" else 0.5 * params.beta

    def evaluate(self, t: float, u: np.ndarray, params: SystemParams) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        n = (u.shape[-1] - 1) // 2
        out = self.g(n) * self.time_factor(t)
        c = self.damping(params)
        if c:
            out = out - c * signed_pow(u, params.q - 1.0)
        return out

    def psi1(self, t, params: SystemParams, half_width: int) -> np.ndarray:
        """``psi_1(t)`` entrywise; shape ``t.shape + (2N+1,)``."""
        t = np.asarray(t, dtype=float)
        g = self.g(half_width)
        if self.family == "zero" or not np.any(g):
            return np.zeros(t.shape + g.shape)
        q = params.q
        qc = q / (q - 1.0)
        const = (q - 1.0) / q * (q * params.beta / 2.0) ** (-1.0 / (q - 1.0))
        gh = np.abs(g * self.time_factor(t)[..., None])
        return const * gh**qc

    def psi1_l1(self, t, params: SystemParams, half_width: int) -> np.ndarray:
        return self.psi1(t, params, half_width).sum(axis=-1)

    def psi5(self, params: SystemParams, radius: float) -> float:
        """Sup of ``|df_i/du|`` over ``|u| <= radius`` (inf when unbounded)."""
        c = self.damping(params)
        if c == 0.0:
            return 0.0
        q = params.q
        if q == 2.0:
            return c
        if q < 2.0:
            return math.inf
        return c * (q - 1.0) * radius ** (q - 2.0)

    def assumption_report(self, params: SystemParams) -> dict:
        """Which structural assumptions this forcing satisfies.

        ``psi_3 = beta`` is constant in i, so the l^1 requirement on psi_3 and
        the l^2 requirement in the invariant-measure assumption are not met by
        the sine family; the dissipativity the estimates use does hold.
        """
        zero = self.family == "zero"
        return {
            "F1_dissipative": True,
            "F1_derivative_upper": True,
            "F2_psi1_integrable": True,
            "F3_psi3_l1": zero,
            "F4_psi34_l2": zero,
            "F5_derivative_bounded": zero or params.q >= 2,
        }

    def check_dissipativity(self, params: SystemParams, half_width: int = 8,
                            n_samples: int = 1000, seed: int = 0, scale: float = 5.0) -> bool:
        """Randomized check of ``f_i(t,u) u <= -b |u|^q + psi_1i(t)``."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(-50, 50, n_samples)
        u = rng.standard_normal((n_samples, 2 * half_width + 1)) * scale
        lhs = np.stack([self.evaluate(ti, ui, params) for ti, ui in zip(t, u)]) * u
        rhs = -self.dissipation(params) * np.abs(u) ** params.q + self.psi1(t, params, half_width)
        return bool(np.all(lhs <= rhs + 1e-12 * (1 + np.abs(rhs))))


def rhs_terms(t: float, z: float, v: np.ndarray, params: SystemParams, forcing: Forcing,
              alpha: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three terms of the conjugated field (diffusion, linear, forcing)."""
    a = params.alpha if alpha is None else alpha
    v = np.asarray(v, dtype=float)
    e = math.exp(a * z)
    nu = float(params.nu(t))
    diffusion = -math.exp(a * (params.p - 2.0) * z) * nu * apply_A(v, params.p)
    linear = (a * z - params.lam) * v
    forced = forcing.evaluate(t, e * v, params) / e
    return diffusion, linear, forced


def rhs_F(t: float, path: NoisePath, v: LatticeVec, params: SystemParams,
          forcing: Forcing) -> LatticeVec:
    """``F(t, w, v)`` with ``z(theta_t w)`` interpolated from ``path``."""
    from .noise import z_at

    z = z_at(path, t)
    d, l, f = rhs_terms(t, z, v.values, params, forcing)
    return LatticeVec(d + l + f)


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    v: np.ndarray
    u: np.ndarray
    z: np.ndarray
    params: SystemParams
    forcing: Forcing
    path: NoisePath
    tau: float
    initial: np.ndarray

    def v_at(self, k: int) -> LatticeVec:
        return LatticeVec(self.v[k])

    def u_at(self, k: int) -> LatticeVec:
        return LatticeVec(self.u[k])


class _GridData:
    """z, nu and forcing factor on the path grid between two indices."""

    def __init__(self, path: NoisePath, k0: int, k1: int, params: SystemParams, forcing: Forcing):
        self.k0 = k0
        self.z = np.ascontiguousarray(path.require_z()[k0 : k1 + 1])
        t = (np.arange(k0, k1 + 1) - path.origin) * path.dt
        self.t = t
        self.nu = np.ascontiguousarray(params.nu(t), dtype=float)
        self.h = np.ascontiguousarray(forcing.time_factor(t), dtype=float)


def _run(v, alpha, grid: _GridData, ka: int, kb: int, dt, params, forcing, g, guard, out=None):
    a, b = ka - grid.k0, kb - grid.k0 + 1
    if out is None:
        out = np.empty((0, v.shape[0], v.shape[1]))
    status = _kernel.heun_segment(v, alpha, grid.z[a:b], grid.nu[a:b], grid.h[a:b], dt,
                                  float(params.p), float(params.q), float(params.lam),
                                  float(forcing.damping(params)), g, guard, out)
    if status >= 0:
        bad = np.flatnonzero(~np.all(np.abs(v) <= guard, axis=1))
        row = int(bad[0]) if bad.size else None
        raise IntegrationError(
            f"state left the guard box |v| <= {guard:g} at t={grid.t[a + status + 1]:.6g}"
            f" (row {row}); reduce dt", row=row, time=float(grid.t[a + status + 1]))


def integrate(v_init: LatticeVec, tau: float, t_end: float, path: NoisePath,
              params: SystemParams, forcing: Forcing, guard: float = 1e8) -> Trajectory:
    """Integrate the conjugated system from ``v(tau) = v_init`` to ``t_end``."""
    if t_end < tau:
        raise ValueError("t_end must be >= tau")
    if not path.covers(tau, t_end):
        raise ValueError(f"[{tau}, {t_end}] not inside path grid [{path.t_min}, {path.t_max}]")
    forcing.validate(params)
    k0, k1 = path.index(tau), path.index(t_end)
    grid = _GridData(path, k0, k1, params, forcing)
    n = v_init.values.size
    v = np.array(v_init.values[None, :], dtype=float)
    out = np.empty((k1 - k0 + 1, 1, n))
    g = forcing.g((n - 1) // 2)
    _run(v, np.array([params.alpha]), grid, k0, k1, path.dt, params, forcing, g, guard, out)
    vs = out[:, 0, :]
    us = np.exp(params.alpha * grid.z)[:, None] * vs
    return Trajectory(times=grid.t, v=vs, u=us, z=grid.z, params=params, forcing=forcing,
                      path=path, tau=float(tau), initial=v_init.values)


def evolve_rows(u0: np.ndarray, start_times: Sequence[float], t_end: float, path: NoisePath,
                params: SystemParams, forcing: Forcing, alphas: Sequence[float] | None = None,
                record_times: Sequence[float] | None = None, merge_tol: float = 0.0,
                guard: float = 1e8, threads: int = 1) -> np.ndarray:
    """Evolve many physical states ``u`` along one noise path.

    Row ``r`` starts at ``start_times[r]`` from ``u0[r]`` and follows
    ``u(t, start, path, u0[r])``; rows may carry their own alpha.  Returns the
    states at ``t_end`` with shape ``(B, n)``, or, when ``record_times`` is
    given, an array ``(len(record_times), B, n)`` holding NaN for rows that
    have not started yet.

    Rows with equal alpha whose conjugated states agree to ``merge_tol`` (sup
    norm) are fused and followed once; 0 disables fusing.
    """
    u0 = np.atleast_2d(np.asarray(u0, dtype=float))
    B, n = u0.shape
    alphas = np.full(B, params.alpha) if alphas is None else np.asarray(alphas, dtype=float)
    if alphas.shape != (B,) or len(start_times) != B:
        raise ValueError("start_times and alphas must have one entry per row")
    forcing.validate(params)
    z_all = path.require_z()
    ks = np.array([path.index(s) for s in start_times], dtype=np.int64)
    ke = path.index(t_end)
    if np.any(ks > ke):
        raise ValueError("a row starts after t_end")
    rec = [] if record_times is None else [path.index(t) for t in record_times]
    if any(r > ke for r in rec):
        raise ValueError("record time after t_end")

    order = np.argsort(ks, kind="stable")
    kmin = int(ks[order[0]])
    grid = _GridData(path, kmin, ke, params, forcing)
    g = forcing.g((n - 1) // 2)

    # slot bookkeeping: live rows are compacted into `state`
    root = np.arange(B)
    state = np.empty((0, n))
    slot_rows: list[int] = []
    result_final = np.full((B, n), np.nan)
    recorded = np.full((len(rec), B, n), np.nan) if rec else None

    events = sorted(set(int(k) for k in ks) | set(r for r in rec if r >= kmin) | {ke})
    next_row = 0
    k = events[0]
    for target in events:
        if target > k:
            if state.shape[0]:
                _advance(state, alphas[slot_rows], grid, k, target, path.dt, params, forcing,
                         g, guard, threads)
            k = target
        # activate rows starting now
        new = []
        while next_row < B and ks[order[next_row]] <= k:
            r = int(order[next_row])
            new.append(r)
            next_row += 1
        if new:
            v_new = np.exp(-alphas[new] * z_all[k])[:, None] * u0[new]
            state = np.ascontiguousarray(np.vstack([state, v_new]))
            slot_rows.extend(new)
        if merge_tol > 0 and len(slot_rows) > 1:
            state, slot_rows = _fuse(state, slot_rows, alphas, root, merge_tol)
        if rec and k in rec:
            _snapshot(recorded, [i for i, r in enumerate(rec) if r == k], state, slot_rows,
                      root, alphas, z_all[k], ks, k)
    slot_of = {r: i for i, r in enumerate(slot_rows)}
    for r in range(B):
        rr = _find(root, r)
        result_final[r] = np.exp(alphas[r] * z_all[ke]) * state[slot_of[rr]]
    if rec:
        return recorded
    return result_final


def _advance(state, alphas, grid, ka, kb, dt, params, forcing, g, guard, threads):
    alphas = np.ascontiguousarray(alphas, dtype=float)
    if threads <= 1 or state.shape[0] < 2 * threads:
        _run(state, alphas, grid, ka, kb, dt, params, forcing, g, guard)
        return
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(np.arange(state.shape[0]), threads)

    def work(idx):
        part = np.ascontiguousarray(state[idx])
        _run(part, alphas[idx], grid, ka, kb, dt, params, forcing, g, guard)
        return idx, part

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for idx, part in pool.map(work, chunks):
            state[idx] = part


def _find(root, r):
    while root[r] != r:
        r = root[r]
    return r


def _fuse(state, slot_rows, alphas, root, tol):
    keep = [0]
    for i in range(1, len(slot_rows)):
        j = keep[-1]
        ri, rj = slot_rows[i], slot_rows[j]
        if alphas[ri] == alphas[rj] and np.max(np.abs(state[i] - state[j])) <= tol:
            root[ri] = rj
        else:
            keep.append(i)
    if len(keep) == len(slot_rows):
        return state, slot_rows
    return np.ascontiguousarray(state[keep]), [slot_rows[i] for i in keep]


def _snapshot(recorded, positions, state, slot_rows, root, alphas, z, ks, k):
    slot_of = {r: i for i, r in enumerate(slot_rows)}
    for r in range(recorded.shape[1]):
        if ks[r] > k:
            continue
        u = np.exp(alphas[r] * z) * state[slot_of[_find(root, r)]]
        for pos in positions:
            recorded[pos, r] = u


def cocycle_phi(t: float, tau: float, path: NoisePath, u_tau, params: SystemParams,
                forcing: Forcing, guard: float = 1e8):
    """``phi(t, tau, w, u_tau) = u(t + tau, tau, theta_{-tau} w, u_tau)``.

    Accepts a :class:`LatticeVec` (returns one) or a ``(B, n)`` array of
    initial states (returns an array).
    """
    if t < 0:
        raise ValueError("cocycle time must be nonnegative")
    shifted = theta_shift(path, -tau)
    if isinstance(u_tau, LatticeVec):
        out = evolve_rows(u_tau.values[None, :], [tau], tau + t, shifted, params, forcing,
                          guard=guard)
        return LatticeVec(out[0])
    arr = np.atleast_2d(np.asarray(u_tau, dtype=float))
    return evolve_rows(arr, [tau] * arr.shape[0], tau + t, shifted, params, forcing, guard=guard)


# -- energy diagnostics -------------------------------------------------------

def _cumtrapz(y: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    out[1:] = np.cumsum(0.5 * dt * (y[1:] + y[:-1]))
    return out


def _discounted_integral(phi: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """``I_k = int_{t_0}^{t_k} exp(phi(s) - phi(t_k)) h(s) ds`` by trapezoid."""
    out = np.zeros_like(h, dtype=float)
    for k in range(1, h.size):
        dec = math.exp(phi[k - 1] - phi[k])
        out[k] = dec * out[k - 1] + 0.5 * dt * (dec * h[k - 1] + h[k])
    return out


def energy_inequality(traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """Left and right sides of the Gronwall energy estimate at every grid point.

    left:  ||v(t)||^2 + 2b int_tau^t e^{2lam(s-t) + 2a int_s^t z + a(q-2) z(s)} ||v(s)||_q^q ds
    right: e^{2lam(tau-t) + 2a int_tau^t z} ||v(tau)||^2
           + 2 int_tau^t e^{2lam(s-t) + 2a int_s^t z - 2a z(s)} ||psi_1(s)||_1 ds
    """
    p = traj.params
    a, dt = p.alpha, traj.path.dt
    z = traj.z
    zint = _cumtrapz(z, dt)
    phi = 2 * p.lam * (traj.times - traj.times[0]) - 2 * a * zint
    b = traj.forcing.dissipation(p)
    n = (traj.v.shape[1] - 1) // 2
    vq = norms_along_last(traj.v, p.q) ** p.q
    v2 = np.sum(traj.v * traj.v, axis=1)
    left = v2 + 2 * b * _discounted_integral(phi, np.exp(a * (p.q - 2) * z) * vq, dt)
    psi = traj.forcing.psi1_l1(traj.times, p, n)
    right = np.exp(phi[0] - phi) * v2[0] + 2 * _discounted_integral(
        phi, np.exp(-2 * a * z) * psi, dt)
    return left, right


def _window(path: NoisePath, tau: float, T: float):
    k0, k1 = path.index(tau), path.index(T)
    z = path.require_z()[k0 : k1 + 1]
    t = (np.arange(k0, k1 + 1) - path.origin) * path.dt
    return t, z


def diag_G1(alpha: float, tau: float, T: float, path: NoisePath, radius: float,
            params: SystemParams, forcing: Forcing, half_width: int) -> float:
    """Bound on ``||v(t)||^2`` over ``(tau, T]`` for ``||u_tau|| <= radius``.

    Uses ``|alpha|`` in the ``int |z|`` exponents so the bound also covers
    negative alpha.
    """
    t, z = _window(path, tau, T)
    dt = path.dt
    az = abs(alpha)
    cum = _cumtrapz(np.abs(z), dt)
    tail = cum[-1] - cum
    first = math.exp(2 * az * cum[-1] - 2 * alpha * z[0]) * radius**2
    psi = forcing.psi1_l1(t, params, half_width)
    integrand = np.exp(2 * az * tail - 2 * alpha * z) * psi
    return float(first + 2 * trapezoid(integrand, dx=dt))


def diag_E(alpha: float, tau: float, T: float, path: NoisePath, params: SystemParams,
           forcing: Forcing) -> float:
    t, z = _window(path, tau, T)
    b = forcing.dissipation(params)
    if b == 0:
        return math.inf
    zabs = trapezoid(np.abs(z), dx=path.dt)
    expo = (2 * params.lam * (T - tau) + 2 * abs(alpha) * zabs
            + abs(alpha * (params.q - 2)) * np.max(np.abs(z)))
    return float(math.exp(expo) / (2 * b))


def diag_G2(alpha: float, tau: float, T: float, path: NoisePath, radius: float,
            params: SystemParams, forcing: Forcing, half_width: int) -> float:
    """Bound on ``int_tau^t ||v(s)||_q^q ds``."""
    return diag_E(alpha, tau, T, path, params, forcing) * diag_G1(
        alpha, tau, T, path, radius, params, forcing, half_width)


# -- temperedness -------------------------------------------------------------

def weighted_radii(radius_history: dict, alpha: float, path: NoisePath,
                   lambda0: float) -> tuple[np.ndarray, np.ndarray]:
    """``exp(lambda0 s + 2a int_s^0 z - 2a z(s)) R(s)^2`` for the sampled s <= 0.

    Returns ``(s, weighted)`` sorted from s = 0 towards -inf.
    """
    s = np.array(sorted(radius_history, reverse=True), dtype=float)
    if np.any(s > 0):
        raise ValueError("pullback times must be <= 0")
    r = np.array([radius_history[x] for x in s], dtype=float)
    z = path.require_z()
    k0 = path.index(float(s[-1]))
    k1 = path.index(0.0)
    zseg = z[k0 : k1 + 1]
    cum = _cumtrapz(zseg, path.dt)  # int_{s_min}^{t}
    idx = np.array([path.index(float(x)) - k0 for x in s])
    int_s0 = cum[-1] - cum[idx]
    logw = lambda0 * s + 2 * alpha * int_s0 - 2 * alpha * zseg[idx] + 2 * np.log(np.maximum(r, 1e-300))
    return s, np.exp(logw)


def tempered_decay_rate(radius_history: dict, alpha: float, path: NoisePath,
                        lambda0: float) -> float:
    """Slope of ``log(weighted radius)`` against s (decay rate as s -> -inf)."""
    s, w = weighted_radii(radius_history, alpha, path, lambda0)
    return float(stats.linregress(s, np.log(w)).slope)


def check_tempered(radius_history: dict, alpha: float, path: NoisePath, lambda0: float,
                   threshold: float = 1e-6) -> bool:
    """Whether the weighted radii die out over the sampled pullback horizon.

    True when log-weighted radii trend down as s decreases and every value in
    the last third of the horizon is below ``threshold`` times the largest
    weighted radius seen.
    """
    s, w = weighted_radii(radius_history, alpha, path, lambda0)
    if s.size < 3:
        raise ValueError("need at least three pullback times")
    slope = stats.linregress(s, np.log(w)).slope
    tail = w[(2 * s.size) // 3 :]
    return bool(slope > 0 and np.max(tail) < threshold * np.max(w))
