"""Absorbing balls, pullback point clouds and their Hausdorff semi-distances.

Paths passed here represent the sample w itself.  The attractor section at
``(tau, w)`` is reached by solutions driven by ``theta_{-tau} w`` on physical
times ``[tau - T, tau]``, which in the frame of w means the grid must cover
``[-T - L, 0]`` (``L`` for the absorbing radius at the start of the pullback).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial.distance import cdist
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from .dynamics import Forcing, IntegrationError, SystemParams, _cumtrapz, evolve_rows
from .lattice import LatticeVec, norms_along_last
from .noise import NoisePath, path_digest, theta_shift

__all__ = [
    "AbsorbingSet",
    "AttractorCloud",
    "PathMismatchError",
    "absorbing_radius",
    "ball_samples",
    "pullback_cloud",
    "pullback_clouds",
    "hausdorff_semidist",
    "usc_sweep",
    "UscResult",
    "tail_profile",
    "cloud_scale",
    "cloud_resolution",
    "check_same_path",
    "DEFAULT_HORIZON",
]

DEFAULT_HORIZON = 40.0
TAIL_WARN = 1e-8


class PathMismatchError(ValueError):
    """Runs that must share one noise sample were given different paths."""


@dataclass(frozen=True)
class AbsorbingSet:
    alpha: float
    tau: float
    radius_sq: float
    horizon: float
    integral: float
    tail_integrand: float

    @property
    def radius(self) -> float:
        return math.sqrt(self.radius_sq)

    def contains(self, points: np.ndarray, slack: float = 0.0) -> np.ndarray:
        sq = np.sum(np.atleast_2d(points) ** 2, axis=-1)
        return sq <= self.radius_sq * (1.0 + slack)


def absorbing_radius(alpha: float, tau: float, path: NoisePath, params: SystemParams,
                     forcing: Forcing, horizon: float = DEFAULT_HORIZON,
                     half_width: int = 32, warn_threshold: float = TAIL_WARN) -> AbsorbingSet:
    """Radius of the pullback absorbing ball at ``(tau, w)``.

    ``radius_sq = exp(2 alpha z(w)) (1 + 2 int_{-L}^0 exp(lambda0 s
    + 2 alpha int_s^0 z - 2 alpha z(theta_s w)) ||psi_1(tau + s)||_1 ds)``,
    with the improper integral cut at ``-L`` and evaluated by trapezoid on
    the grid of ``path``.  Warns when the integrand at ``s = -L`` is not
    negligible against ``warn_threshold``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    k0, k1 = path.index(-horizon), path.index(0.0)
    z = path.require_z()[k0 : k1 + 1]
    s = (np.arange(k0, k1 + 1) - path.origin) * path.dt
    cum = _cumtrapz(z, path.dt)
    zint = cum[-1] - cum
    psi = forcing.psi1_l1(tau + s, params, half_width)
    integrand = np.exp(params.lambda0 * s + 2 * alpha * zint - 2 * alpha * z) * psi
    integral = float(trapezoid(integrand, dx=path.dt))
    tail = float(integrand[0])
    if tail > warn_threshold:
        warnings.warn(f"absorbing-radius integrand is {tail:.3g} at s=-{horizon:g}; "
                      "increase the horizon", RuntimeWarning, stacklevel=2)
    big_r = 1.0 + 2.0 * integral
    radius_sq = math.exp(2 * alpha * z[-1]) * big_r
    return AbsorbingSet(float(alpha), float(tau), radius_sq, float(horizon), integral, tail)


@dataclass(frozen=True, eq=False)
class AttractorCloud:
    """Terminal pullback image of a sampled absorbing ball."""

    points: np.ndarray
    alpha: float
    tau: float
    pullback_time: float
    initial_radius: float
    path_digest: str
    seed: int
    resolution: float = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("points must be a nonempty (M, n) matrix")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "resolution", cloud_resolution(pts))

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def vectors(self) -> list[LatticeVec]:
        return [LatticeVec(p) for p in self.points]

    def diameter(self) -> float:
        return float(cdist(self.points, self.points).max())


def cloud_resolution(points: np.ndarray) -> float:
    """Largest nearest-neighbour spacing in l^2 (0 for a single point)."""
    if points.shape[0] < 2:
        return 0.0
    d = cdist(points, points)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).max())


def ball_samples(M: int, dim: int, radius: float) -> np.ndarray:
    """``M`` deterministic points in the l^2 ball of the given radius.

    Directions come from a fixed scrambled Halton sequence mapped through the
    normal quantile function; radii are stratified as ``radius (j+1)/M``.
    The points depend only on ``(M, dim)`` up to the scale ``radius``.
    """
    if M < 1:
        raise ValueError("M must be positive")
    halton = qmc.Halton(d=dim, scramble=True, seed=0)
    u = halton.random(M)
    g = normal_dist.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radii = radius * (np.arange(1, M + 1) / M)
    return g * radii[:, None]


def pullback_clouds(alphas: Sequence[float], tau: float, path: NoisePath, T: float, M: int,
                    params: SystemParams, forcing: Forcing, half_width: int = 32,
                    horizon: float = DEFAULT_HORIZON, threads: int = 1,
                    guard: float = 1e8) -> list[AttractorCloud]:
    """Pullback clouds for several alphas on one sample, integrated together."""
    if M < 2:
        raise ValueError("M must be at least 2")
    if not T > 0:
        raise ValueError("pullback time must be positive")
    n = 2 * half_width + 1
    early = theta_shift(path, -T)
    shifted = theta_shift(path, -tau)
    rows, row_alpha, radii = [], [], []
    for a in alphas:
        ball = absorbing_radius(a, tau - T, early, params, forcing, horizon, half_width)
        radii.append(ball.radius)
        rows.append(ball_samples(M, n, ball.radius))
        row_alpha.extend([a] * M)
    u0 = np.vstack(rows)
    try:
        final = evolve_rows(u0, [tau - T] * u0.shape[0], tau, shifted, params, forcing,
                            alphas=row_alpha, guard=guard, threads=threads)
    except IntegrationError as err:
        idx = err.row if err.row is not None else -1
        raise IntegrationError(f"pullback sample {idx % M} (alpha={row_alpha[idx]}) blew up: "
                               f"{err}", row=idx, time=err.time) from err
    digest = path_digest(path)
    return [AttractorCloud(final[j * M : (j + 1) * M], float(a), float(tau), float(T),
                           radii[j], digest, int(path.seed))
            for j, a in enumerate(alphas)]


def pullback_cloud(alpha: float, tau: float, path: NoisePath, T: float, M: int,
                   params: SystemParams, forcing: Forcing, **kw) -> AttractorCloud:
    """Approximate the attractor section at ``(tau, w)`` by ``M`` pullback points.

    Samples ``M`` points in the absorbing ball at ``(tau - T, theta_{-T} w)``
    and evolves them with the cocycle for time ``T``.
    """
    return pullback_clouds([alpha], tau, path, T, M, params, forcing, **kw)[0]


def _pair_dist(a: np.ndarray, b: np.ndarray, tag: str, q: float) -> np.ndarray:
    if tag == "l2":
        return cdist(a, b)
    if tag == "lq":
        return cdist(a, b, "minkowski", p=q)
    if tag == "l2_cap_lq":
        return cdist(a, b) + cdist(a, b, "minkowski", p=q)
    raise ValueError(f"unknown norm tag {tag!r}")


def hausdorff_semidist(cloud_a, cloud_b, norm_tag: str = "l2", q: float = 2.0) -> float:
    """``sup_{a in A} inf_{b in B} ||a - b||`` in l^2, l^q or l^2 + l^q."""
    a = cloud_a.points if isinstance(cloud_a, AttractorCloud) else np.atleast_2d(cloud_a)
    b = cloud_b.points if isinstance(cloud_b, AttractorCloud) else np.atleast_2d(cloud_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("clouds must be nonempty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("clouds live on different windows")
    return float(_pair_dist(a, b, norm_tag, q).min(axis=1).max())


def check_same_path(paths: Sequence[NoisePath]) -> str:
    digests = {path_digest(p) for p in paths}
    if len(digests) != 1:
        raise PathMismatchError("all alpha values must share one noise path; digests differ")
    return digests.pop()


@dataclass(frozen=True, eq=False)
class UscResult:
    rows: list
    clouds: dict
    path_digest: str

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows])


def usc_sweep(alpha_list: Sequence[float], alpha0: float, tau: float, path, T: float, M: int,
              params: SystemParams, forcing: Forcing, half_width: int = 32,
              threads: int = 1, horizon: float = DEFAULT_HORIZON) -> UscResult:
    """Distances from the alpha_n clouds to the alpha_0 cloud on one sample.

    ``path`` is a NoisePath or a sequence with one path per alpha value; in
    the latter case all of them must be the same sample.
    """
    if isinstance(path, NoisePath):
        digest = path_digest(path)
    else:
        digest = check_same_path(path)
        path = path[0]
    alphas = [float(alpha0)] + [float(a) for a in alpha_list if float(a) != float(alpha0)]
    clouds = pullback_clouds(alphas, tau, path, T, M, params, forcing, half_width,
                             horizon, threads)
    by_alpha = dict(zip(alphas, clouds))
    ref = by_alpha[float(alpha0)]
    rows = []
    for a in alpha_list:
        c = by_alpha[float(a)]
        rows.append({
            "alpha": float(a),
            "dist_l2": hausdorff_semidist(c, ref, "l2"),
            "dist_lq": hausdorff_semidist(c, ref, "lq", params.q),
            "dist_sum": hausdorff_semidist(c, ref, "l2_cap_lq", params.q),
            "M": int(M),
            "T": float(T),
        })
    return UscResult(rows, by_alpha, digest)


def tail_profile(cloud, cutoffs: Sequence[int], q: float) -> list[dict]:
    """Worst tails over the cloud beyond each cutoff.

    Columns ``tail_l2``/``tail_lq`` are rooted tail norms; ``mass_l2`` and
    ``mass_lq`` are the largest tail fractions ``sum_{|i|>N'} |u_i|^r /
    sum_i |u_i|^r`` over the cloud.
    """
    pts = cloud.points if isinstance(cloud, AttractorCloud) else np.atleast_2d(cloud)
    n = (pts.shape[1] - 1) // 2
    idx = np.abs(np.arange(-n, n + 1))
    total2 = np.sum(pts**2, axis=1)
    totalq = np.sum(np.abs(pts) ** q, axis=1)
    out = []
    for c in cutoffs:
        if not 0 <= c <= n:
            raise ValueError(f"cutoff {c} outside window half-width {n}")
        tail = pts[:, idx > c]
        t2 = np.sum(tail**2, axis=1)
        tq = np.sum(np.abs(tail) ** q, axis=1)
        out.append({
            "cutoff": int(c),
            "tail_l2": float(np.sqrt(t2).max()),
            "tail_lq": float((tq ** (1 / q)).max()),
            "mass_l2": float(np.max(np.divide(t2, total2, out=np.zeros_like(t2),
                                              where=total2 > 0))),
            "mass_lq": float(np.max(np.divide(tq, totalq, out=np.zeros_like(tq),
                                              where=totalq > 0))),
        })
    return out


def cloud_scale(cloud, q: float) -> tuple[float, float]:
    """Largest l^2 and l^q norms over the cloud."""
    pts = cloud.points if isinstance(cloud, AttractorCloud) else np.atleast_2d(cloud)
    return float(norms_along_last(pts, 2.0).max()), float(norms_along_last(pts, q).max())
