"""Homogenized solutions, first-order expansions and approximation errors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cell import CorrectorSet, HomogenizedTensor
from .coefficients import CoefficientField, SymMatrix2
from .errors import DegenerateSolutionError
from .solver import BoxGrid, DiscreteField, ball_average_sq, gradient, solve_dirichlet

# off-diagonal entries below this fraction of the diagonal are rounding noise
# from the cell solve; dropping them keeps the fast diagonal solver available
_OFFDIAG_SNAP = 1e-9

APPROX_RADIUS = 0.75
NORMALIZER_RADIUS = 1.5


def tensor_field(a_hat: HomogenizedTensor | SymMatrix2) -> CoefficientField:
    m = a_hat.a_hat if isinstance(a_hat, HomogenizedTensor) else a_hat
    a12 = m.a12
    if abs(a12) <= _OFFDIAG_SNAP * max(abs(m.a11), abs(m.a22)):
        a12 = 0.0
    return CoefficientField.constant(m.a11, a12, m.a22)


def homogenized_solution(a_hat, grid: BoxGrid, boundary, source=None, tol: float = 1e-10) -> DiscreteField:
    """Solve -div(A_hat grad u0) = source with the given Dirichlet data."""
    u0 = solve_dirichlet(tensor_field(a_hat), 1.0, grid, boundary, source, tol)
    u0.tag = "u0"
    return u0


def corrected_expansion(u0: DiscreteField, chi: CorrectorSet, eps: float) -> DiscreteField:
    """u0 + eps * chi_j(x/eps) * d_j u0, chi interpolated bilinearly on the torus."""
    X1, X2 = u0.grid.mesh()
    d1, d2 = gradient(u0)
    out = u0.values.copy()
    for chi_j, d in ((chi.chi1, d1), (chi.chi2, d2)):
        if not np.any(chi_j.values):
            continue
        out += eps * chi_j.interpolate(X1 / eps, X2 / eps) * d.values
    return DiscreteField(u0.grid, out, tag="expansion")


@dataclass(frozen=True)
class ApproximationReport:
    eps: float
    sup_err_B34: float
    sup_err_corrected_B34: float
    normalizer: float
    normalized_err: float


def interior_mask(grid: BoxGrid, radius: float = APPROX_RADIUS) -> np.ndarray:
    """Nodes inside B_radius minus a 2h collar."""
    X1, X2 = grid.mesh()
    rr = radius - 2.0 * grid.h
    return X1 * X1 + X2 * X2 <= rr * rr


def l2_norm_ball(u: DiscreteField, r: float) -> float:
    return math.sqrt(ball_average_sq(u, (0.0, 0.0), r) * math.pi * r * r)


def approximation_report(u_eps: DiscreteField, u0: DiscreteField, expansion: DiscreteField,
                         eps: float) -> ApproximationReport:
    if not (u_eps.grid == u0.grid == expansion.grid):
        raise ValueError("fields must live on the same grid")
    mask = interior_mask(u_eps.grid)
    err = float(np.abs(u_eps.values - u0.values)[mask].max())
    err_c = float(np.abs(u_eps.values - expansion.values)[mask].max())
    normalizer = l2_norm_ball(u_eps, NORMALIZER_RADIUS)
    if normalizer == 0.0:
        raise DegenerateSolutionError("u_eps vanishes on B_{3/2}")
    return ApproximationReport(eps, err, err_c, normalizer, err / normalizer)


def energy_seminorm(u: DiscreteField, v: DiscreteField, radius: float = APPROX_RADIUS) -> float:
    """Discrete H^1 seminorm of u - v over B_radius."""
    diff = DiscreteField(u.grid, u.values - v.values)
    d1, d2 = gradient(diff)
    mask = interior_mask(u.grid, radius)
    return math.sqrt(float((d1.values[mask] ** 2 + d2.values[mask] ** 2).sum()) * u.grid.h ** 2)


def c1_proxy(u0: DiscreteField, normalizer: float, radius: float = 1.0) -> float:
    """max over B_radius of (|u0| + |grad u0|), divided by ``normalizer``."""
    d1, d2 = gradient(u0)
    mask = interior_mask(u0.grid, radius)
    val = np.abs(u0.values) + np.hypot(d1.values, d2.values)
    return float(val[mask].max()) / normalizer


def rate_fit(points) -> float:
    """Least-squares slope of log(err) against log(eps)."""
    pts = [(float(e), float(r)) for e, r in points]
    if len(pts) < 3:
        raise ValueError("rate_fit needs at least three points")
    if any(e <= 0.0 or r <= 0.0 for e, r in pts):
        raise ValueError("rate_fit needs positive eps and errors")
    x = np.log([e for e, _ in pts])
    y = np.log([r for _, r in pts])
    return float(np.polyfit(x, y, 1)[0])
