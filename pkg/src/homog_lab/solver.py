"""Dirichlet solves for -div(A(x/eps) grad u) = s on the box (-L, L)^2.

Also houses the grid-function container and the mean-square averages over
balls and ellipsoids used by every analysis downstream.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np
import pyamg
import scipy.fft
from scipy import ndimage

from . import stencil
from .coefficients import CoefficientField, SymMatrix2
from .errors import ConfigurationError, PrecisionError, SolverFailure

log = logging.getLogger(__name__)

MIN_HALF_WIDTH = 2.25
POINTS_PER_EPS = 16
_AMG_MAXITER = 500
_AMG_SEED = 0


@dataclass(frozen=True)
class BoxGrid:
    """Uniform node grid on [-L, L]^2 with m nodes per axis."""

    half_width: float
    m: int

    def __post_init__(self):
        if self.half_width < MIN_HALF_WIDTH:
            raise ConfigurationError(
                f"box half-width {self.half_width} < {MIN_HALF_WIDTH}; B_2 must lie strictly inside"
            )
        if self.m < 5:
            raise ConfigurationError(f"need at least 5 nodes per axis, got {self.m}")

    @classmethod
    def from_spacing(cls, half_width: float, h: float) -> BoxGrid:
        cells = 2.0 * half_width / h
        m = int(round(cells))
        if abs(cells - m) > 1e-9 * cells:
            raise ConfigurationError(f"spacing {h} does not divide the box width {2 * half_width}")
        return cls(float(half_width), m + 1)

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.m - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.m)

    def mesh(self):
        return np.meshgrid(self.x, self.x, indexing="ij")

    def check_resolution(self, eps: float):
        if self.h > eps / POINTS_PER_EPS * (1.0 + 1e-12):
            raise ConfigurationError(
                f"grid spacing h={self.h:.6g} violates the resolution rule h <= eps/{POINTS_PER_EPS} "
                f"for eps={eps:.6g}"
            )


@dataclass(eq=False)
class DiscreteField:
    grid: BoxGrid
    values: np.ndarray
    tag: str = "u_eps"
    residual: float = 0.0
    _spline: np.ndarray | None = dc_field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.m, self.grid.m):
            raise ValueError(f"values shape {self.values.shape} does not match grid m={self.grid.m}")

    def spline_coefficients(self) -> np.ndarray:
        """Cubic B-spline coefficients of the nodal values (cached)."""
        if self._spline is None:
            self._spline = ndimage.spline_filter(self.values, order=3, mode="mirror")
        return self._spline

    def sample(self, x1, x2) -> np.ndarray:
        """Cubic-spline interpolation at arbitrary points inside the box."""
        g = self.grid
        c1 = (np.asarray(x1) + g.half_width) / g.h
        c2 = (np.asarray(x2) + g.half_width) / g.h
        return ndimage.map_coordinates(self.spline_coefficients(), [c1, c2], order=3,
                                       mode="mirror", prefilter=False)

    def scaled(self, c: float, tag: str | None = None) -> DiscreteField:
        return DiscreteField(self.grid, c * self.values, tag or self.tag)


@dataclass(frozen=True)
class Ellipsoid:
    """E_r = {x : <A_hat^{-1}(x - c), x - c> < r^2}."""

    a_hat_inverse: SymMatrix2
    center: tuple[float, float]
    r: float

    @classmethod
    def from_tensor(cls, a_hat: SymMatrix2, center=(0.0, 0.0), r=1.0) -> Ellipsoid:
        return cls(a_hat.inverse(), (float(center[0]), float(center[1])), float(r))

    def contains(self, x1, x2) -> np.ndarray:
        d1 = np.asarray(x1) - self.center[0]
        d2 = np.asarray(x2) - self.center[1]
        return self.a_hat_inverse.quadratic_form(d1, d2) < self.r * self.r

    def shape_matrix(self) -> SymMatrix2:
        """S with E_r = c + r S B_1, i.e. S = A_hat^{1/2}."""
        return self.a_hat_inverse.inverse().sqrt()


Boundary = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _node_values(fn, x1, x2):
    return np.broadcast_to(np.asarray(fn(x1, x2), dtype=float), x1.shape)


def solve_dirichlet(field: CoefficientField, eps: float, grid: BoxGrid, boundary: Boundary,
                    source: Boundary | None = None, tol: float = 1e-10) -> DiscreteField:
    """Conservative finite-difference solve of -div(A(x/eps) grad u) = source.

    ``boundary`` and ``source`` are vectorized callables g(x1, x2). Constant
    diagonal coefficients use an exact sine-transform solver; everything else
    uses conjugate gradients preconditioned by smoothed-aggregation AMG.
    """
    if not eps > 0.0:
        raise ConfigurationError(f"eps must be positive, got {eps}")
    if not 0.0 < tol <= 1e-8:
        raise ConfigurationError(f"solver tolerance must lie in (0, 1e-8], got {tol}")
    if not field.is_constant:
        grid.check_resolution(eps)

    X1, X2 = grid.mesh()
    g = _node_values(boundary, X1, X2)
    h = grid.h
    rhs = np.zeros((grid.m - 2, grid.m - 2))
    if source is not None:
        rhs += h * h * _node_values(source, X1[1:-1, 1:-1], X2[1:-1, 1:-1])

    if field.is_constant:
        a11, a12, a22 = field.components(0.0, 0.0)
        a11, a12, a22 = float(a11), float(a12), float(a22)
        shape = X1.shape
        a11 = np.full(shape, a11)
        a12 = np.full(shape, a12)
        a22 = np.full(shape, a22)
    else:
        a11, a12, a22 = field.components(X1 / eps, X2 / eps)
    del X1, X2

    weights = stencil.box_weights(*stencil.box_coefficients(a11, a12, a22))
    del a11, a12, a22
    rhs += stencil.box_boundary_rhs(weights, g)

    if len(weights) == 5 and field.is_constant:
        c11 = -float(weights[(1, 0)][0, 0])
        c22 = -float(weights[(0, 1)][0, 0])
        interior = _dst_solve(rhs, c11, c22)
        residual = _relative_residual(weights, interior, rhs)
    else:
        interior, residual = _amg_solve(weights, rhs, tol)

    u = g.copy()
    u[1:-1, 1:-1] = interior
    return DiscreteField(grid, u, tag="u_eps", residual=residual)


def _dst_solve(rhs, c11, c22):
    k = rhs.shape[0]
    lam = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, k + 1) / (k + 1))
    spec = scipy.fft.dstn(rhs, type=1, norm="ortho")
    spec /= c11 * lam[:, None] + c22 * lam[None, :]
    return scipy.fft.idstn(spec, type=1, norm="ortho")


def _relative_residual(weights, interior, rhs):
    k = interior.shape[0]
    padded = np.zeros((k + 2, k + 2))
    padded[1:-1, 1:-1] = interior
    au = np.zeros_like(interior)
    for (di, dj), w in weights.items():
        au += w * padded[1 + di : k + 1 + di, 1 + dj : k + 1 + dj]
    bnorm = np.linalg.norm(rhs)
    return float(np.linalg.norm(au - rhs) / bnorm) if bnorm > 0 else float(np.linalg.norm(au))


def _amg_solve(weights, rhs, tol):
    k = rhs.shape[0]
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros_like(rhs), 0.0
    mat = stencil.box_matrix(weights)
    # pyamg draws start vectors for its spectral-radius estimates from the
    # global numpy RNG; pin it so repeated solves are bit-identical
    state = np.random.get_state()
    try:
        np.random.seed(_AMG_SEED)
        ml = pyamg.smoothed_aggregation_solver(mat, symmetry="symmetric", max_coarse=500)
        history = []
        x = ml.solve(b, x0=np.zeros_like(b), tol=tol, accel="cg", maxiter=_AMG_MAXITER, residuals=history)
    finally:
        np.random.set_state(state)
    del ml
    res = float(np.linalg.norm(b - mat @ x) / bnorm)
    log.debug("AMG-CG: %d iterations, relative residual %.2e", len(history) - 1, res)
    # pyamg may stop a hair above tol in its own norm; allow rounding slack
    if res > 10.0 * tol:
        raise SolverFailure(f"AMG-CG did not reach tolerance {tol:g}", res)
    return x.reshape(k, k), res


def gradient(u: DiscreteField) -> tuple[DiscreteField, DiscreteField]:
    """Central differences inside, second-order one-sided at the boundary."""
    h = u.grid.h
    d1, d2 = np.gradient(u.values, h, h, edge_order=2)
    return DiscreteField(u.grid, d1, tag="gradient"), DiscreteField(u.grid, d2, tag="gradient")


# mean-square averages --------------------------------------------------------

_IDENTITY = SymMatrix2(1.0, 0.0, 1.0)


def _check_inside(u: DiscreteField, center, extent: float, r: float):
    g = u.grid
    if r < 4.0 * g.h:
        raise PrecisionError(f"radius {r:.4g} is below 4h = {4 * g.h:.4g}")
    if max(abs(center[0]), abs(center[1])) + extent >= g.half_width:
        raise PrecisionError(f"averaging set around {center} with extent {extent:.4g} leaves the box")


def _polar_rule(r: float, h: float):
    nr = int(min(max(16, math.ceil(r / (2.0 * h))), 384))
    nt = int(min(max(64, math.ceil(2.0 * math.pi * r / h)), 2048))
    g, w = np.polynomial.legendre.leggauss(nr)
    rho = 0.5 * (g + 1.0)
    weight = 0.5 * w * rho  # area element rho d rho on the unit disk
    theta = 2.0 * np.pi * (np.arange(nt) + 0.5) / nt
    return rho, weight, theta


def _disk_mean(u: DiscreteField, center, r: float, shape: SymMatrix2, fn) -> float:
    rho, weight, theta = _polar_rule(r, u.grid.h)
    z1 = rho[:, None] * np.cos(theta)[None, :]
    z2 = rho[:, None] * np.sin(theta)[None, :]
    x1 = center[0] + r * (shape.a11 * z1 + shape.a12 * z2)
    x2 = center[1] + r * (shape.a12 * z1 + shape.a22 * z2)
    vals = fn(u.sample(x1, x2))
    return float((weight @ vals.sum(axis=1)) / (weight.sum() * theta.size))


def _cell_mean(u: DiscreteField, inside, fn) -> float:
    g = u.grid
    xc = 0.5 * (g.x[1:] + g.x[:-1])
    c1, c2 = np.meshgrid(xc, xc, indexing="ij")
    mask = inside(c1, c2)
    if not mask.any():
        raise PrecisionError("no cell centres inside the averaging set")
    v = u.values
    mid = 0.25 * (v[1:, 1:] + v[:-1, 1:] + v[1:, :-1] + v[:-1, :-1])
    return float(fn(mid[mask]).mean())


def _square(v):
    return v * v


def _identity(v):
    return v


def ball_average(u: DiscreteField, center, r: float, method: str = "polar", power: int = 1) -> float:
    """Mean of u**power over the disk B(center, r).

    ``method="polar"`` (default) integrates the cubic-spline interpolant with
    Gauss-Legendre in the radius and the trapezoid rule in the angle;
    ``method="cells"`` is the midpoint rule over cells whose centres lie in
    the disk, divided by the counted area.
    """
    fn = {1: _identity, 2: _square}[power]
    _check_inside(u, center, r, r)
    if method == "polar":
        return _disk_mean(u, center, r, _IDENTITY, fn)
    if method == "cells":
        return _cell_mean(u, lambda a, b: (a - center[0]) ** 2 + (b - center[1]) ** 2 < r * r, fn)
    raise ValueError(f"unknown averaging method {method!r}")


def ball_average_sq(u: DiscreteField, center, r: float, method: str = "polar") -> float:
    """Mean of |u|^2 over the disk B(center, r)."""
    return ball_average(u, center, r, method, power=2)


def ellipsoid_average_sq(u: DiscreteField, ell: Ellipsoid, method: str = "polar") -> float:
    """Mean of |u|^2 over the ellipse E_r(A_hat) centred at ``ell.center``."""
    shape = ell.shape_matrix()
    lo, hi = shape.eigenvalues()
    _check_inside(u, ell.center, ell.r * hi, ell.r * lo)
    if method == "polar":
        return _disk_mean(u, ell.center, ell.r, shape, _square)
    if method == "cells":
        return _cell_mean(u, ell.contains, _square)
    raise ValueError(f"unknown averaging method {method!r}")


def nodes_in_ball(grid: BoxGrid, center, r: float) -> np.ndarray:
    X1, X2 = grid.mesh()
    return (X1 - center[0]) ** 2 + (X2 - center[1]) ** 2 <= r * r


@dataclass(frozen=True)
class InclusionReport:
    n_samples: int
    inner_failures: int
    outer_failures: int

    @property
    def passed(self) -> bool:
        return self.inner_failures == 0 and self.outer_failures == 0


def _uniform_disk(rng, n):
    rho = np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return rho * np.cos(theta), rho * np.sin(theta)


def ellipsoid_inclusion_check(ell: Ellipsoid, n_samples: int = 10_000, seed: int = 0) -> InclusionReport:
    """Sample B(c, r sqrt(lam_min)) against E_r, and E_r against B(c, r).

    Requires the largest eigenvalue of A_hat to be at most 1, as for normalized fields.
    """
    a_hat = ell.a_hat_inverse.inverse()
    rng = np.random.default_rng(seed)
    c1, c2 = ell.center
    z1, z2 = _uniform_disk(rng, n_samples)
    rin = ell.r * math.sqrt(a_hat.eigenvalues()[0])
    inner = int(np.count_nonzero(~ell.contains(c1 + rin * z1, c2 + rin * z2)))
    s = ell.shape_matrix()
    z1, z2 = _uniform_disk(rng, n_samples)
    y1 = c1 + ell.r * (s.a11 * z1 + s.a12 * z2)
    y2 = c2 + ell.r * (s.a12 * z1 + s.a22 * z2)
    members = ell.contains(y1, y2)
    outside = (y1 - c1) ** 2 + (y2 - c2) ** 2 >= ell.r * ell.r
    return InclusionReport(n_samples, inner, int(np.count_nonzero(members & outside)))
