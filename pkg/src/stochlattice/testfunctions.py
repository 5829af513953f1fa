"""Cylindrical test functionals built from logistic bumps.

A :class:`CylTestFunction` is ``Psi(u) = prod_k b(s ((u, g_k) - c_k))`` with
``b(y) = 4 sigma(y) (1 - sigma(y))``, where sigma is the logistic function.
``b`` peaks at 1 for ``y = 0``, so ``0 < Psi <= 1``; its derivative is at most
``4 / (6 sqrt 3) s ~ 0.385 s`` in modulus.  All evaluations are vectorized
over rows of a ``(K, n)`` particle matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "bump",
    "bump_d1",
    "bump_d2",
    "BUMP_SLOPE_MAX",
    "CylTestFunction",
    "TestFunctionDict",
    "direction_vectors",
    "van_der_corput",
]

BUMP_SLOPE_MAX = 4.0 / (6.0 * math.sqrt(3.0))


def bump(y):
    s = expit(y)
    return 4.0 * s * (1.0 - s)


def bump_d1(y):
    s = expit(y)
    return 4.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def bump_d2(y):
    s = expit(y)
    v = s * (1.0 - s)
    return 4.0 * v * ((1.0 - 2.0 * s) ** 2 - 2.0 * v)


@dataclass(frozen=True, eq=False)
class CylTestFunction:
    """``Psi(u) = chi((u, g_1), ..., (u, g_m))`` with a product-of-bumps chi.

    directions: ``(m, n)`` matrix whose rows are the ``g_k``.
    centers: the ``c_k``; scale: the common slope ``s``; weight: an overall
    constant factor (0 gives the constant-zero functional).
    """

    directions: np.ndarray
    centers: np.ndarray
    scale: float = 1.0
    weight: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        g = np.atleast_2d(np.array(self.directions, dtype=float))
        c = np.atleast_1d(np.array(self.centers, dtype=float))
        if c.shape != (g.shape[0],):
            raise ValueError("need one center per direction")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        g.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "directions", g)
        object.__setattr__(self, "centers", c)

    @property
    def m(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def _y(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.scale * (X @ self.directions.T - self.centers)

    def evaluate(self, X) -> np.ndarray:
        """``Psi`` on every row of ``X``."""
        return self.offset + self.weight * np.prod(bump(self._y(X)), axis=1)

    def __call__(self, u) -> float:
        vals = u.values if hasattr(u, "values") else u
        return float(self.evaluate(np.asarray(vals)[None, :])[0])

    def chi_grad(self, X) -> np.ndarray:
        """``d chi / d y_k`` per row, shape ``(K, m)``."""
        y = self._y(X)
        b = bump(y)
        d = bump_d1(y) * self.scale
        out = np.empty_like(y)
        for k in range(self.m):
            others = np.prod(np.delete(b, k, axis=1), axis=1)
            out[:, k] = d[:, k] * others
        return self.weight * out

    def chi_hessian(self, X) -> np.ndarray:
        """Second derivatives of chi per row, shape ``(K, m, m)``."""
        y = self._y(X)
        b = bump(y)
        d1 = bump_d1(y) * self.scale
        d2 = bump_d2(y) * self.scale**2
        K, m = y.shape
        H = np.empty((K, m, m))
        for k in range(m):
            for l in range(m):
                rest = np.prod(np.delete(b, [k, l], axis=1), axis=1)
                H[:, k, l] = (d2[:, k] if k == l else d1[:, k] * d1[:, l]) * rest
        return self.weight * H

    def gradient(self, X) -> np.ndarray:
        """``Psi'(u) = sum_k d_k chi g_k`` per row; lies in span{g_k}."""
        return self.chi_grad(X) @ self.directions

    def hessian_form(self, X, A, B) -> np.ndarray:
        """``Psi''(u)(a, b) = sum_{k,l} d_kl chi (a, g_k)(b, g_l)`` per row."""
        H = self.chi_hessian(X)
        ga = np.atleast_2d(A) @ self.directions.T
        gb = np.atleast_2d(B) @ self.directions.T
        return np.einsum("ik,ikl,il->i", ga, H, gb)

    def sup_norm(self) -> float:
        return abs(self.offset) + abs(self.weight)

    def lipschitz_bound(self) -> float:
        """Upper bound on the l^2 Lipschitz constant of Psi."""
        gn = np.linalg.norm(self.directions, axis=1)
        return abs(self.weight) * BUMP_SLOPE_MAX * self.scale * float(np.sqrt(np.sum(gn**2)))

    def hessian_bound(self) -> float:
        """Upper bound on ``|Psi''(u)(a, b)| / (||a|| ||b||)``."""
        gn = np.linalg.norm(self.directions, axis=1)
        return abs(self.weight) * self.scale**2 * float(np.sum(gn) ** 2)


def van_der_corput(k: int, base: int = 2) -> float:
    x, denom = 0.0, 1.0
    while k:
        k, r = divmod(k, base)
        denom *= base
        x += r / denom
    return x


def direction_vectors(count: int, half_width: int, width: float | None = None) -> np.ndarray:
    """Unit-norm Gaussian bumps on the lattice at low-discrepancy centres.

    Centre k is ``(vdc(k+1) - 1/2) * 2 N`` with vdc the base-2 van der Corput
    sequence, so the first direction sits at 0 and the next ones fill in
    ``-N/2, N/2, -3N/4, ...``; width defaults to ``N / 8``.
    """
    n = half_width
    width = max(n / 8.0, 1.0) if width is None else float(width)
    idx = np.arange(-n, n + 1, dtype=float)
    out = np.empty((count, idx.size))
    for k in range(count):
        c = (van_der_corput(k + 1) - 0.5) * 2 * n
        g = np.exp(-((idx - c) ** 2) / (2 * width**2))
        out[k] = g / np.linalg.norm(g)
    return out


@dataclass(frozen=True, eq=False)
class TestFunctionDict:
    """Bounded-Lipschitz surrogate family: bumps of single projections.

    Element ``4 k + j`` is ``b(s ((u, g_k) - R c_j))`` with
    ``c_j in {-3/4, -1/4, 1/4, 3/4}`` and ``s = min(2.5, 4 / R)``, so every
    element has sup norm 1 and l^2 Lipschitz constant below 1.
    """

    __test__ = False

    functions: tuple
    radius: float

    @classmethod
    def build(cls, size: int, half_width: int, radius: float) -> "TestFunctionDict":
        if size < 4 or size % 4:
            raise ValueError("dictionary size must be a positive multiple of 4")
        if not radius > 0:
            raise ValueError("working-ball radius must be positive")
        dirs = direction_vectors(size // 4, half_width)
        s = min(2.5, 4.0 / radius)
        funcs = []
        for g in dirs:
            for c in (-0.75, -0.25, 0.25, 0.75):
                funcs.append(CylTestFunction(g[None, :], [c * radius], scale=s))
        return cls(tuple(funcs), float(radius))

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def __getitem__(self, i):
        return self.functions[i]

    def evaluate(self, X) -> np.ndarray:
        """All dictionary values on the rows of ``X``, shape ``(len, K)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        G = np.vstack([f.directions for f in self.functions])
        c = np.array([f.centers[0] for f in self.functions])
        s = np.array([f.scale for f in self.functions])
        return bump(s[:, None] * (G @ X.T - c[:, None]))
