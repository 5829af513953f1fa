"""Compiled Heun stepping for the conjugated lattice system.

Rows of ``v`` are independent states; every row has its own noise intensity
``alpha[b]`` but they all share the grid data (z, nu, forcing time factor).
The forcing is the parametric family ``f_i(t, u) = -c |u|^{q-2} u + g_i h(t)``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _spow(x, r):
    if r == 1.0:
        return x
    if r == 2.0:
        return x * abs(x)
    if r == 3.0:
        return x * x * x
    if x == 0.0:
        return 0.0
    if x > 0.0:
        return x**r
    return -((-x) ** r)


@njit(cache=True)
def _rhs_row(v, a, z, nu, h, p, q, lam, cf, g, d, out):
    n = v.shape[0]
    e = math.exp(a * z)
    ca = math.exp(a * (p - 2.0) * z) * nu
    lin = a * z - lam
    # d[j] = phi(v_j - v_{j-1}), j = 0..n with zero extension
    prev = 0.0
    for j in range(n):
        d[j] = _spow(v[j] - prev, p - 1.0)
        prev = v[j]
    d[n] = _spow(-prev, p - 1.0)
    for i in range(n):
        u = e * v[i]
        fu = g[i] * h
        if cf != 0.0:
            fu -= cf * _spow(u, q - 1.0)
        out[i] = -ca * (d[i] - d[i + 1]) + lin * v[i] + fu / e


@njit(cache=True)
def heun_segment(v, alpha, z, nu, h, dt, p, q, lam, cf, g, guard, out):
    """Advance every row of ``v`` in place over ``len(z) - 1`` steps.

    ``out`` is either empty or has shape ``(len(z), B, n)`` and then receives
    the state at every grid point.  Returns -1 on success or the local index
    of the step at which a row left the guard box.
    """
    B, n = v.shape
    steps = z.shape[0] - 1
    record = out.shape[0] > 0
    k1 = np.empty(n)
    k2 = np.empty(n)
    pred = np.empty(n)
    d = np.empty(n + 1)
    if record:
        for b in range(B):
            for i in range(n):
                out[0, b, i] = v[b, i]
    for k in range(steps):
        for b in range(B):
            row = v[b]
            a = alpha[b]
            _rhs_row(row, a, z[k], nu[k], h[k], p, q, lam, cf, g, d, k1)
            for i in range(n):
                pred[i] = row[i] + dt * k1[i]
            _rhs_row(pred, a, z[k + 1], nu[k + 1], h[k + 1], p, q, lam, cf, g, d, k2)
            bad = False
            for i in range(n):
                x = row[i] + 0.5 * dt * (k1[i] + k2[i])
                if not (abs(x) <= guard):
                    bad = True
                row[i] = x
            if bad:
                return k
            if record:
                for i in range(n):
                    out[k + 1, b, i] = row[i]
    return -1
