"""Doubling constants, dyadic doubling profiles and the three-spheres profile."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import SymMatrix2
from .errors import DegenerateSolutionError, PrecisionError, PreconditionError
from .solver import DiscreteField, Ellipsoid, ball_average_sq, ellipsoid_average_sq

MIN_RADIUS_CELLS = 8


class Shape(str, enum.Enum):
    BALL = "ball"
    ELLIPSOID = "ellipsoid"


@dataclass(frozen=True)
class DoublingProfile:
    center: tuple[float, float]
    shape: Shape
    radii: tuple[float, ...]
    ratios: tuple[float, ...]
    n_constant: float
    max_ratio: float
    sub_eps: tuple[bool, ...] = ()

    def max_ratio_between(self, r_lo: float, r_hi: float) -> float:
        sel = [q for r, q in zip(self.radii, self.ratios) if r_lo <= r <= r_hi]
        return max(sel) if sel else float("nan")


@dataclass(frozen=True)
class ThreeSpheresProfile:
    r_values: tuple[float, ...]
    psi: tuple[float, ...]
    convexity_defect: float

    def slopes(self) -> np.ndarray:
        return np.diff(self.psi) / np.diff(self.r_values)


def _ratio(num: float, den: float) -> float:
    if den == 0.0:
        raise DegenerateSolutionError("mean square vanishes on the inner set")
    return num / den


def doubling_constant(u: DiscreteField, lam: float, method: str = "polar") -> float:
    """Smallest N with mean_{B_2}|u|^2 <= N mean_{B_sqrt(lam)}|u|^2."""
    if not 0.0 < lam <= 1.0:
        raise PreconditionError(f"ellipticity constant must lie in (0, 1], got {lam}")
    origin = (0.0, 0.0)
    return _ratio(ball_average_sq(u, origin, 2.0, method), ball_average_sq(u, origin, math.sqrt(lam), method))


def _mean_sq(u, center, r, shape, a_hat, method):
    if shape is Shape.BALL:
        return ball_average_sq(u, center, r, method)
    return ellipsoid_average_sq(u, Ellipsoid.from_tensor(a_hat, center, r), method)


def doubling_profile(u: DiscreteField, center=(0.0, 0.0), shape: Shape | str = Shape.BALL,
                     r_max: float = 1.0, depth: int = 3, a_hat: SymMatrix2 | None = None,
                     lam: float | None = None, eps: float | None = None, n_constant: float = float("nan"),
                     method: str = "polar") -> DoublingProfile:
    """Ratios mean_{r}|u|^2 / mean_{r/2}|u|^2 at r = r_max, r_max/2, ..., r_max 2^{1-depth}.

    ``lam`` enables the translated-centre check |center| <= sqrt(lam)/2;
    ``eps`` marks radii r <= eps as sub-period scales in ``sub_eps``.
    """
    shape = Shape(shape)
    if shape is Shape.ELLIPSOID and a_hat is None:
        raise PreconditionError("ellipsoid profiles need the homogenized tensor")
    if depth < 1:
        raise PreconditionError("depth must be at least 1")
    smallest = r_max * 2.0 ** (-depth)
    if smallest < MIN_RADIUS_CELLS * u.grid.h * (1.0 - 1e-12):
        raise PrecisionError(f"smallest radius {smallest:.4g} is below {MIN_RADIUS_CELLS}h")
    if lam is not None and math.hypot(*center) > 0.5 * math.sqrt(lam) + 1e-12:
        raise PreconditionError(f"translated centre {center} lies outside B_(sqrt(lam)/2)")
    center = (float(center[0]), float(center[1]))
    means = [_mean_sq(u, center, r_max * 2.0 ** (-k), shape, a_hat, method) for k in range(depth + 1)]
    radii = tuple(r_max * 2.0 ** (-k) for k in range(depth))
    ratios = tuple(_ratio(means[k], means[k + 1]) for k in range(depth))
    sub = tuple(eps is not None and r <= eps for r in radii)
    return DoublingProfile(center, shape, radii, ratios, n_constant, max(ratios), sub)


def three_spheres_profile(u: DiscreteField, r_lo: float, r_hi: float, steps: int = 9,
                          center=(0.0, 0.0), method: str = "polar") -> ThreeSpheresProfile:
    """psi(r) = log2(mean over B_{2^r} of |u|^2) at equally spaced exponents r."""
    if steps < 5:
        raise PreconditionError("three-spheres profile needs at least 5 steps")
    if 2.0 ** r_lo < MIN_RADIUS_CELLS * u.grid.h * (1.0 - 1e-12):
        raise PrecisionError(f"smallest radius 2^{r_lo} is below {MIN_RADIUS_CELLS}h")
    rs = np.linspace(r_lo, r_hi, steps)
    psi = np.array([math.log2(ball_average_sq(u, center, 2.0 ** r, method)) for r in rs])
    d2 = psi[2:] - 2.0 * psi[1:-1] + psi[:-2]
    return ThreeSpheresProfile(tuple(rs.tolist()), tuple(psi.tolist()), float(d2.min()))


def vanishing_order_estimate(profile: DoublingProfile) -> float:
    """log_4 of the ratio at the smallest radius (ratio ~ 4^l for vanishing order l)."""
    if len(profile.ratios) < 2:
        raise PreconditionError("need at least two ratios")
    return math.log(profile.ratios[-1], 4.0)


def ball_ellipsoid_constant(lam: float) -> float:
    """Admissible factor C = 4^(ceil(log2(1/sqrt(lam))) + 1) between ball and ellipsoid ratios."""
    return 4.0 ** (math.ceil(math.log2(1.0 / math.sqrt(lam))) + 1)


def center_grid(radius: float, k: int = 5):
    """k x k grid filling the square inscribed in the closed disk B_radius."""
    t = np.linspace(-radius, radius, k) / math.sqrt(2.0)
    return [(float(a), float(b)) for a in t for b in t]
