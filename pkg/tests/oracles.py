"""Independent reference values used by the tests.

Nothing here imports homog_lab; each oracle is a closed form or a direct
quadrature so that agreement with the package is meaningful.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate


def laminate_normalization(mu: float) -> float:
    return max(1.0, 1.0 + mu)


def laminate_tensor(mu: float) -> tuple[float, float]:
    """(harmonic mean, arithmetic mean) of (1 + mu cos 2 pi t) / N over one period."""
    n = laminate_normalization(mu)
    harmonic = 1.0 / integrate.quad(lambda t: n / (1.0 + mu * math.cos(2 * math.pi * t)), 0.0, 1.0)[0]
    arithmetic = integrate.quad(lambda t: (1.0 + mu * math.cos(2 * math.pi * t)) / n, 0.0, 1.0)[0]
    return harmonic, arithmetic


def laminate_corrector(mu: float, t):
    """Mean-zero 1-periodic chi with (a (1 + chi'))' = 0, computed by quadrature."""
    n = laminate_normalization(mu)
    a_hat = laminate_tensor(mu)[0]

    def dchi(s):
        return a_hat * n / (1.0 + mu * math.cos(2 * math.pi * s)) - 1.0

    grid = np.linspace(0.0, 1.0, 2049)
    prim = np.array([0.0] + [integrate.quad(dchi, a, b)[0] for a, b in zip(grid[:-1], grid[1:])]).cumsum()
    prim -= integrate.trapezoid(prim, grid)
    tt = np.mod(np.asarray(t, dtype=float), 1.0)
    return np.interp(tt, grid, prim)


def laminate_dirichlet_1d(mu: float, eps: float, half_width: float, x):
    """u(x) solving (a(x/eps) u')' = 0 on (-L, L) with u(+-L) = +-L."""
    n = laminate_normalization(mu)

    def inv_a(t):
        return n / (1.0 + mu * math.cos(2 * math.pi * t / eps))

    total = integrate.quad(inv_a, -half_width, half_width, limit=2000)[0]
    out = []
    for xi in np.atleast_1d(x):
        part = integrate.quad(inv_a, -half_width, float(xi), limit=2000)[0]
        out.append(-half_width + 2.0 * half_width * part / total)
    return np.array(out)


def disk_mean_monomial(p: int, q: int, r: float) -> float:
    """Average of x^p y^q over the disk of radius r centred at the origin."""
    if p % 2 or q % 2:
        return 0.0
    # int_0^r rho^{p+q+1} d rho * int_0^{2 pi} cos^p sin^q
    ang = 2.0 * math.gamma((p + 1) / 2) * math.gamma((q + 1) / 2) / math.gamma((p + q + 2) / 2)
    radial = r ** (p + q + 2) / (p + q + 2)
    return ang * radial / (math.pi * r * r)


def ols_slope(xs, ys) -> float:
    """Closed-form least-squares slope."""
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)


def chord_length(a: float, b: float, c: float, center, r: float) -> float:
    """Length of {a x + b y + c = 0} inside the open disk B(center, r)."""
    d = abs(a * center[0] + b * center[1] + c) / math.hypot(a, b)
    return 2.0 * math.sqrt(r * r - d * d) if d < r else 0.0
