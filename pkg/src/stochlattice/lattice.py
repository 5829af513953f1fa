"""Finite-window lattice vectors and the difference operators B, B* and A.

A :class:`LatticeVec` stores the entries ``u_i`` for ``i = -N..N`` of a
bi-infinite sequence that is zero outside the window.  Every operator here
works with that zero extension, so ``(Bu)_N = u_{N+1} - u_N = -u_N``.

The module-level helpers prefixed ``apply_`` act on plain arrays along the
last axis; they are what the integrators call on ``(batch, 2N+1)`` arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatticeVec",
    "lp_norm",
    "op_B",
    "op_Bstar",
    "op_A",
    "pairing",
    "tail_norm",
    "signed_pow",
    "apply_B",
    "apply_Bstar",
    "apply_A",
    "norms_along_last",
]


@dataclass(frozen=True, eq=False)
class LatticeVec:
    """Entries ``u_{-N}, ..., u_N`` of a sequence in l^2 with zero extension."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float, copy=True)
        if arr.ndim != 1 or arr.size % 2 != 1:
            raise ValueError("values must be a 1-d array of odd length 2N+1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("LatticeVec entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, half_width: int) -> "LatticeVec":
        return cls(np.zeros(2 * int(half_width) + 1))

    @classmethod
    def unit(cls, half_width: int, index: int) -> "LatticeVec":
        if abs(index) > half_width:
            raise ValueError(f"index {index} outside window [-{half_width}, {half_width}]")
        arr = np.zeros(2 * half_width + 1)
        arr[index + half_width] = 1.0
        return cls(arr)

    @classmethod
    def from_function(cls, half_width: int, fn) -> "LatticeVec":
        idx = np.arange(-half_width, half_width + 1)
        return cls(np.asarray(fn(idx), dtype=float))

    @property
    def window_half_width(self) -> int:
        return (self.values.size - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        n = self.window_half_width
        return np.arange(-n, n + 1)

    def __getitem__(self, i: int) -> float:
        n = self.window_half_width
        if abs(i) > n:
            return 0.0
        return float(self.values[i + n])

    def embed(self, half_width: int) -> "LatticeVec":
        """Zero-pad into the larger window ``[-half_width, half_width]``."""
        n = self.window_half_width
        if half_width < n:
            raise ValueError("cannot embed into a smaller window")
        pad = half_width - n
        return LatticeVec(np.pad(self.values, (pad, pad)))

    def __add__(self, other: "LatticeVec") -> "LatticeVec":
        a, b = _common(self, other)
        return LatticeVec(a + b)

    def __sub__(self, other: "LatticeVec") -> "LatticeVec":
        a, b = _common(self, other)
        return LatticeVec(a - b)

    def __mul__(self, scalar: float) -> "LatticeVec":
        return LatticeVec(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "LatticeVec":
        return LatticeVec(-self.values)

    def __repr__(self) -> str:
        return f"LatticeVec(N={self.window_half_width}, l2={lp_norm(self, 2):.6g})"


def _common(u: LatticeVec, v: LatticeVec) -> tuple[np.ndarray, np.ndarray]:
    n = max(u.window_half_width, v.window_half_width)
    return u.embed(n).values, v.embed(n).values


def signed_pow(x: np.ndarray, r: float) -> np.ndarray:
    """Return ``|x|^r sgn(x)``, i.e. ``|x|^{r-1} x`` with ``0^0 = 1``.

    Gives 0 at ``x = 0`` for every ``r >= 0``.
    """
    x = np.asarray(x, dtype=float)
    if r == 1.0:
        return x.copy()
    if r == 2.0:
        return x * np.abs(x)
    if r == 3.0:
        return x * x * x
    return np.sign(x) * np.abs(x) ** r


def norms_along_last(arr: np.ndarray, p: float) -> np.ndarray:
    """l^p norms over the last axis (``p = inf`` gives the sup norm)."""
    a = np.abs(np.asarray(arr, dtype=float))
    if math.isinf(p):
        return a.max(axis=-1, initial=0.0)
    if p == 2.0:
        return np.sqrt(np.sum(a * a, axis=-1))
    if p == 1.0:
        return np.sum(a, axis=-1)
    return np.sum(a**p, axis=-1) ** (1.0 / p)


def apply_B(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    out = np.empty_like(arr)
    out[..., :-1] = arr[..., 1:] - arr[..., :-1]
    out[..., -1] = -arr[..., -1]
    return out


def apply_Bstar(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    out = np.empty_like(arr)
    out[..., 1:] = arr[..., :-1] - arr[..., 1:]
    out[..., 0] = -arr[..., 0]
    return out


def apply_A(arr: np.ndarray, p: float) -> np.ndarray:
    """p-Laplacian stencil on the last axis.

    ``(Au)_i = phi(u_i - u_{i-1}) - phi(u_{i+1} - u_i)`` with
    ``phi(x) = |x|^{p-2} x``.  Only the window entries are returned, but the
    jumps across the two window edges are kept, as the zero extension demands.
    """
    arr = np.asarray(arr, dtype=float)
    shape = arr.shape[:-1] + (arr.shape[-1] + 1,)
    d = np.empty(shape)
    # d[j] = u_j - u_{j-1} for j = -N .. N+1
    d[..., 0] = arr[..., 0]
    d[..., 1:-1] = arr[..., 1:] - arr[..., :-1]
    d[..., -1] = -arr[..., -1]
    w = signed_pow(d, p - 1.0)
    return w[..., :-1] - w[..., 1:]


def lp_norm(u: LatticeVec, p: float) -> float:
    """``(sum |u_i|^p)^{1/p}``, or ``max |u_i|`` for ``p = inf``."""
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1, got {p}")
    return float(norms_along_last(u.values, float(p)))


def op_B(u: LatticeVec) -> LatticeVec:
    return LatticeVec(apply_B(u.values))


def op_Bstar(u: LatticeVec) -> LatticeVec:
    return LatticeVec(apply_Bstar(u.values))


def op_A(u: LatticeVec, p: float) -> LatticeVec:
    if not p >= 2:
        raise ValueError(f"op_A needs p >= 2, got {p}")
    return LatticeVec(apply_A(u.values, float(p)))


def pairing(u: LatticeVec, v: LatticeVec) -> float:
    """``sum_i u_i v_i`` after embedding both vectors into a common window.

    On finite windows this is both the l^2 inner product and the V*-V
    duality pairing.
    """
    a, b = _common(u, v)
    return float(np.dot(a, b))


def tail_norm(u: LatticeVec, cutoff: int, p: float = 2.0) -> float:
    """``(sum_{|i| > cutoff} |u_i|^p)^{1/p}``."""
    n = u.window_half_width
    if cutoff > n:
        raise ValueError(f"cutoff {cutoff} exceeds window half-width {n}")
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    lo = u.values[: n - cutoff]
    hi = u.values[n + cutoff + 1 :]
    return float(norms_along_last(np.concatenate([lo, hi]), float(p)))
