"""Independent classical oracles for commuting (diagonal) instances."""

import itertools
import math

import numpy as np
from scipy.optimize import brentq, linprog


def dh_vertex_enum(p, q, eps):
    """``min sum(t*q)`` over ``0 <= t <= 1``, ``sum(t*p) >= 1-eps`` by enumerating vertices.

    Vertices of this polytope have every coordinate in {0, 1} except at most
    one, which is then fixed by the tight acceptance constraint.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    n = len(p)
    best = math.inf
    target = 1 - eps
    for bits in itertools.product((0.0, 1.0), repeat=n):
        t = np.array(bits)
        if t @ p >= target - 1e-15:
            best = min(best, t @ q)
        for k in range(n):
            if p[k] <= 0:
                continue
            rest = t @ p - t[k] * p[k]
            frac = (target - rest) / p[k]
            if 0 <= frac <= 1:
                tt = t.copy()
                tt[k] = frac
                best = min(best, tt @ q)
    return best


def dh_linprog(p, q, eps):
    p, q = np.asarray(p, float), np.asarray(q, float)
    res = linprog(q, A_ub=[-p], b_ub=[-(1 - eps)], bounds=[(0, 1)] * len(p), method="highs")
    return res.fun


def dmax_smooth_diag(p, q, eps):
    """Trace-ball smoothed D_max for commuting states.

    For fixed ``c`` the closest subnormalized ``t <= c q`` is ``min(p, c q)``,
    so ``c`` is feasible iff ``sum (p - c q)_+ <= eps``.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)

    def excess(c):
        return np.clip(p - c * q, 0, None).sum() - eps

    if excess(1e-300) <= 0:
        return -math.inf
    hi = 1.0
    while excess(hi) > 0:
        hi *= 2
    return math.log2(brentq(excess, 1e-12, hi, xtol=1e-14, rtol=1e-14))
