"""Bracketed scalar minimisation for convex one-dimensional objectives."""
from __future__ import annotations

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol=1e-10, max_iter=500):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; endpoints are also compared.

    Returns ``(x, f(x))``.
    """
    if hi < lo:
        raise ValueError("empty bracket")
    a, b = float(lo), float(hi)
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    best = min(((x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))), key=lambda p: (p[1], p[0]))
    return best
