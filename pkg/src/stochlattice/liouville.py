"""Term-by-term evaluation of the stochastic Liouville equation.

For a test functional Psi and a measure family mu_sigma on ``[s, t]`` the
balance reads

    int Psi d mu_t - int Psi d mu_s = int <F~, Psi'> d mu d sigma
        + alpha int (u, Psi') d mu dW~ + alpha^2/2 int Psi''(u)(u, u) d mu d sigma

with ``F~(t, u) = -nu(t) A u + f(t, u) - lambda u``.  The stochastic integral
is summed both with left points (Ito) and with the endpoint average of each
cell (Stratonovich); the residual with the correction term belongs to the
Ito reading, the residual without it to the Stratonovich reading.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid

from .attractor import PathMismatchError, check_same_path
from .dynamics import Forcing, SystemParams, Trajectory
from .lattice import LatticeVec, apply_A
from .measures import EnsembleMeasure, integrate_against, measure_family
from .noise import NoisePath, path_digest, theta_shift
from .testfunctions import CylTestFunction

__all__ = [
    "CylTestFunction",
    "LiouvilleReport",
    "drift_Ftilde",
    "ito_trajectory_residual",
    "liouville_terms",
    "statistical_solution_check",
    "termwise_sweep",
    "TermwiseSweep",
    "TERM_NAMES",
]

TERM_NAMES = ("psi_t", "psi_s", "drift", "stoch", "correction")


def _ftilde(t: float, X: np.ndarray, params: SystemParams, forcing: Forcing) -> np.ndarray:
    nu = float(params.nu(t))
    return -nu * apply_A(X, params.p) + forcing.evaluate(t, X, params) - params.lam * X


def drift_Ftilde(t: float, u: LatticeVec, params: SystemParams, forcing: Forcing) -> LatticeVec:
    """``-nu(t) A u + f(t, u) - lambda u`` on the window."""
    return LatticeVec(_ftilde(t, u.values, params, forcing))


@dataclass(frozen=True)
class LiouvilleReport:
    s: float
    t: float
    alpha: float
    psi_t: float
    psi_s: float
    lhs_diff: float
    drift_term: float
    stoch_term_ito: float
    stoch_term_strat: float
    correction_term: float
    residual_ito: float
    residual_strat: float
    scale: float
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_terms(cls, s, t, alpha, psi_t, psi_s, drift, ito, strat, corr, **meta):
        lhs = psi_t - psi_s
        res_ito = lhs - drift - alpha * ito - 0.5 * alpha**2 * corr
        res_strat = lhs - drift - alpha * strat
        scale = (abs(lhs) + abs(drift) + abs(alpha) * max(abs(ito), abs(strat))
                 + 0.5 * alpha**2 * abs(corr))
        return cls(float(s), float(t), float(alpha), float(psi_t), float(psi_s), float(lhs),
                   float(drift), float(ito), float(strat), float(corr), float(res_ito),
                   float(res_strat), float(scale), dict(meta))

    @property
    def best_residual(self) -> float:
        return min(abs(self.residual_ito), abs(self.residual_strat))

    def recombination_error(self) -> float:
        """How far the stored residuals are from the stored raw terms."""
        a = self.alpha
        e1 = self.residual_ito - (self.lhs_diff - self.drift_term - a * self.stoch_term_ito
                                  - 0.5 * a * a * self.correction_term)
        e2 = self.residual_strat - (self.lhs_diff - self.drift_term - a * self.stoch_term_strat)
        return max(abs(e1), abs(e2))

    def terms(self) -> dict:
        """The five terms of the balance, each with its alpha factor."""
        a = self.alpha
        return {"psi_t": self.psi_t, "psi_s": self.psi_s, "drift": self.drift_term,
                "stoch": a * self.stoch_term_ito + 0.0,
                "correction": 0.5 * a * a * self.correction_term + 0.0}

    def to_dict(self) -> dict:
        return asdict(self)


def _stoch_sums(y: np.ndarray, dw: np.ndarray) -> tuple[float, float]:
    ito = float(np.dot(y[:-1], dw))
    strat = float(np.dot(0.5 * (y[:-1] + y[1:]), dw))
    return ito, strat


def ito_trajectory_residual(traj: Trajectory, psi: CylTestFunction, s: float,
                            t: float) -> LiouvilleReport:
    """Check the chain rule for Psi along one simulated trajectory.

    Grid integrals use the trajectory grid; ``dW`` is the increment of the
    trajectory's own path.
    """
    path = traj.path
    k0 = int(round((s - traj.times[0]) / path.dt))
    k1 = int(round((t - traj.times[0]) / path.dt))
    if not (0 <= k0 <= k1 < traj.times.size):
        raise ValueError(f"[{s}, {t}] is not inside the trajectory grid")
    U = traj.u[k0 : k1 + 1]
    times = traj.times[k0 : k1 + 1]
    P = psi.evaluate(U)
    G = psi.gradient(U)
    par, f = traj.params, traj.forcing
    D = np.array([np.dot(_ftilde(tt, u, par, f), g) for tt, u, g in zip(times, U, G)])
    Y = np.sum(U * G, axis=1)
    C = psi.hessian_form(U, U, U)
    a = path.index(float(times[0]))
    w = path.w_values[a : a + times.size]
    ito, strat = _stoch_sums(Y, np.diff(w))
    drift = float(trapezoid(D, dx=path.dt)) if times.size > 1 else 0.0
    corr = float(trapezoid(C, dx=path.dt)) if times.size > 1 else 0.0
    return LiouvilleReport.from_terms(s, t, par.alpha, P[-1], P[0], drift, ito, strat, corr,
                                      dt=path.dt, level="trajectory")


def _family_grid(mu_family: dict, s: float, t: float) -> list[float]:
    lo, hi = min(s, t), max(s, t)
    keys = sorted(k for k in mu_family if lo - 1e-9 <= k <= hi + 1e-9)
    if not keys or abs(keys[0] - lo) > 1e-9 or abs(keys[-1] - hi) > 1e-9:
        raise ValueError(f"measure family does not cover [{lo}, {hi}]")
    return keys


def _sigma_terms(mu: EnsembleMeasure, sigma: float, psi, params, forcing):
    X = mu.particles
    w = mu.weights
    P = psi.evaluate(X)
    G = psi.gradient(X)
    D = np.sum(_ftilde(sigma, X, params, forcing) * G, axis=1)
    Y = np.sum(X * G, axis=1)
    C = psi.hessian_form(X, X, X)
    return float(w @ P), float(w @ D), float(w @ Y), float(w @ C)


def liouville_terms(mu_family: dict, psi: CylTestFunction, s: float, t: float, tau: float,
                    path: NoisePath, params: SystemParams, forcing: Forcing,
                    alpha: float | None = None) -> LiouvilleReport:
    """All terms of the Liouville balance on ``[s, t]`` for a measure family.

    ``mu_family`` maps times sigma to the measures at ``(sigma,
    theta_{sigma - tau} w)``; ``path`` is the base sample w, and
    ``W~(sigma) = w(sigma - tau) - w(-tau)``.  The family must cover the
    grid of its own keys inside ``[s, t]`` with s and t included.  Swapping s
    and t flips the sign of every term.
    """
    grid = _family_grid(mu_family, s, t)
    drive = theta_shift(path, -tau)
    digest = path_digest(drive)
    for k in grid:
        d = mu_family[k].provenance.get("path_digest")
        if d is not None and d != digest:
            raise PathMismatchError(f"measure at t={k} was built on a different sample")
    a = mu_family[grid[0]].provenance.get("alpha", params.alpha) if alpha is None else alpha
    vals = np.array([_sigma_terms(mu_family[k], k, psi, params, forcing) for k in grid])
    P, D, Y, C = vals.T
    sig = np.array(grid)
    w = np.array([drive.w_at(k) for k in grid])
    ito, strat = _stoch_sums(Y, np.diff(w))
    drift = float(trapezoid(D, sig)) if sig.size > 1 else 0.0
    corr = float(trapezoid(C, sig)) if sig.size > 1 else 0.0
    sign = 1.0 if t >= s else -1.0
    psi_hi, psi_lo = P[-1], P[0]
    psi_t, psi_s = (psi_hi, psi_lo) if sign > 0 else (psi_lo, psi_hi)
    return LiouvilleReport.from_terms(s, t, a, psi_t, psi_s, sign * drift, sign * ito,
                                      sign * strat, sign * corr, tau=float(tau),
                                      grid_points=len(grid), level="measure",
                                      path_digest=digest)


def statistical_solution_check(mu_family: dict, dictionary, psi_list: Sequence, s: float,
                               t: float, tau: float, path: NoisePath, params: SystemParams,
                               forcing: Forcing, continuity_tol: float = 0.1,
                               quad_tol: float = 0.01, residual_tol: float = 5e-2) -> dict:
    """The three conditions of a sample statistical solution on a grid.

    (1) continuity: largest jump of ``sigma -> int Psi d mu_sigma`` between
    neighbouring grid times over the dictionary.  (2) integrability: the
    maps ``sigma -> int <F~, g> d mu`` (dictionary directions g) and
    ``sigma -> int Psi''(u)(u, u) d mu`` are finite and their trapezoid
    integrals agree with the ones on the every-other-point grid to
    ``quad_tol`` relative to ``int |.|``; ``sigma -> int (u, g) d mu`` has a
    finite square integral.  (3) the Liouville residual of each Psi in
    ``psi_list`` is below ``residual_tol`` times its term scale under the
    better convention.
    """
    grid = _family_grid(mu_family, s, t)
    sig = np.array(grid)
    mus = [mu_family[k] for k in grid]
    ints = np.array([[integrate_against(m, f) for m in mus] for f in dictionary])
    modulus = float(np.max(np.abs(np.diff(ints, axis=1)))) if sig.size > 1 else 0.0

    dirs = np.vstack([f.directions for f in dictionary])
    dirs = np.unique(dirs, axis=0)
    fg = np.array([[m.weights @ (_ftilde(k, m.particles, params, forcing) @ dirs.T)[:, j]
                    for k, m in zip(grid, mus)] for j in range(dirs.shape[0])])
    ug = np.array([[m.weights @ (m.particles @ dirs[j]) for m in mus]
                   for j in range(dirs.shape[0])])
    hess = np.array([[m.weights @ p.hessian_form(m.particles, m.particles, m.particles)
                      for m in mus] for p in psi_list])
    finite = bool(np.all(np.isfinite(fg)) and np.all(np.isfinite(hess))
                  and np.all(np.isfinite(ug)))

    def rel_change(rows):
        if sig.size < 3 or (sig.size - 1) % 2:
            return 0.0
        fine = trapezoid(rows, sig, axis=1)
        coarse = trapezoid(rows[:, ::2], sig[::2], axis=1)
        mag = trapezoid(np.abs(rows), sig, axis=1)
        return float(np.max(np.abs(fine - coarse) / np.maximum(mag, 1e-300)))

    quad = max(rel_change(fg), rel_change(hess)) if len(psi_list) else rel_change(fg)
    l2 = float(np.max(trapezoid(ug**2, sig, axis=1))) if sig.size > 1 else 0.0
    reports = [liouville_terms(mu_family, p, s, t, tau, path, params, forcing) for p in psi_list]
    worst = max((r.best_residual / max(r.scale, 1e-300) for r in reports), default=0.0)
    return {
        "continuity_modulus": modulus,
        "continuity_ok": modulus < continuity_tol,
        "integrable_finite": finite,
        "quadrature_rel_change": quad,
        "integrability_ok": finite and quad < quad_tol and math.isfinite(l2),
        "square_integral": l2,
        "liouville_rel_residual": float(worst),
        "liouville_ok": worst < residual_tol,
        "reports": reports,
    }


@dataclass(frozen=True, eq=False)
class TermwiseSweep:
    rows: list
    reports: dict
    path_digest: str

    def differences(self, term: str) -> np.ndarray:
        return np.array([r[f"diff_{term}"] for r in self.rows])


def termwise_sweep(alpha_list: Sequence[float], alpha0: float, psi: CylTestFunction, s: float,
                   t: float, tau: float, path, params: SystemParams, forcing: Forcing,
                   window: float = 20.0, ds: float = 0.1, grid_step: float = 0.05,
                   half_width: int = 32, merge_tol: float = 1e-12,
                   threads: int = 1) -> TermwiseSweep:
    """Per-term differences of the Liouville balance between alpha_n and alpha_0.

    Each row carries the five terms for alpha_n, their absolute differences
    to the alpha_0 terms, and ``sup_diff``, the largest difference of
    ``int Psi d mu_sigma`` over the sigma grid of ``[s, t]``.
    """
    if isinstance(path, NoisePath):
        digest = path_digest(path)
    else:
        digest = check_same_path(path)
        path = path[0]
    if t < s:
        raise ValueError("need s <= t")
    steps = int(round((t - s) / grid_step))
    grid = [s + j * grid_step for j in range(steps + 1)]
    grid[-1] = t
    drive = theta_shift(path, -tau)
    alphas = [float(alpha0)] + [float(a) for a in alpha_list if float(a) != float(alpha0)]
    reports, curves = {}, {}
    for a in alphas:
        fam = measure_family(a, grid, window, drive, ds, params, forcing, half_width,
                             merge_tol=merge_tol, threads=threads)
        reports[a] = liouville_terms(fam, psi, s, t, tau, path, params, forcing, alpha=a)
        curves[a] = np.array([integrate_against(fam[k], psi) for k in sorted(fam)])
    ref = reports[float(alpha0)].terms()
    rows = []
    for a in alpha_list:
        rep = reports[float(a)]
        terms = rep.terms()
        row = {"alpha": float(a)}
        row.update(terms)
        row.update({f"diff_{k}": abs(terms[k] - ref[k]) for k in TERM_NAMES})
        row["sup_diff"] = float(np.max(np.abs(curves[float(a)] - curves[float(alpha0)])))
        row["residual_ito"] = rep.residual_ito
        row["residual_strat"] = rep.residual_strat
        rows.append(row)
    return TermwiseSweep(rows, reports, digest)
