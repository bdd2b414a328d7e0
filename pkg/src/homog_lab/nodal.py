"""Nodal sets: marching-squares extraction, length in balls, densities, singular points."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import PrecisionError
from .solver import DiscreteField

ZERO_TIE_BREAK = 1e-12
MIN_RADIUS_CELLS = 8


@dataclass(frozen=True)
class NodalCurve:
    """Zero-set polyline as independent segments, shape (K, 2, 2): [segment, endpoint, xy]."""

    segments: np.ndarray
    h: float

    def __len__(self) -> int:
        return len(self.segments)

    def total_length(self) -> float:
        d = self.segments[:, 1] - self.segments[:, 0]
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


@dataclass(frozen=True)
class NodalReport:
    eps: float
    densities: tuple  # of (center, r, F)
    f_main: float


@dataclass(frozen=True)
class SingularCandidates:
    points: tuple
    delta_u: float
    delta_g: float


def _window(u: DiscreteField, window):
    x = u.grid.x
    if window is None:
        return x, x, u.values
    sel = np.nonzero(np.abs(x) <= window + 1e-12 * u.grid.h)[0]
    lo, hi = sel[0], sel[-1] + 1
    return x[lo:hi], x[lo:hi], u.values[lo:hi, lo:hi]


def _crossings(va, vb, pa, pb):
    t = va / (va - vb)
    return pa + t * (pb - pa)


def extract_nodal(u: DiscreteField, window: float | None = None) -> NodalCurve:
    """Marching squares at level 0 over the whole grid or the square |x|_inf <= window.

    Exact zeros are lifted to +1e-12 * sup|u| before sign classification.
    Saddle cells are split according to the sign of the corner average.
    """
    xs, ys, v = _window(u, window)
    h = u.grid.h
    if not np.all(np.isfinite(v)):
        raise ValueError("field contains non-finite values")
    sup = float(np.abs(v).max())
    if sup == 0.0:
        return NodalCurve(np.zeros((0, 2, 2)), h)
    v = np.where(v == 0.0, ZERO_TIE_BREAK * sup, v)
    pos = v > 0.0

    X, Y = np.meshgrid(xs, ys, indexing="ij")
    # edges along x between (i, j) and (i+1, j); along y between (i, j) and (i, j+1)
    with np.errstate(divide="ignore", invalid="ignore"):
        hx = _crossings(v[:-1, :], v[1:, :], X[:-1, :], X[1:, :])
        hy = Y[:-1, :]
        vy = _crossings(v[:, :-1], v[:, 1:], Y[:, :-1], Y[:, 1:])
        vx = X[:, :-1]
    # per cell edge points: e0 bottom, e1 right, e2 top, e3 left
    ex = (hx[:, :-1], vx[1:, :], hx[:, 1:], vx[:-1, :])
    ey = (hy[:, :-1], vy[1:, :], hy[:, 1:], vy[:-1, :])

    p00, p10, p11, p01 = pos[:-1, :-1], pos[1:, :-1], pos[1:, 1:], pos[:-1, 1:]
    code = p00.astype(np.uint8) | (p10 << 1) | (p11 << 2) | (p01 << 3)
    center_pos = (v[:-1, :-1] + v[1:, :-1] + v[1:, 1:] + v[:-1, 1:]) >= 0.0

    # edge pairs for the non-ambiguous cases; key = code
    pairs = {}
    for c in range(16):
        if c in (0, 15, 5, 10):
            continue
        bits = [(c >> k) & 1 for k in range(4)]  # corners 00, 10, 11, 01
        crossed = [e for e in range(4) if bits[e] != bits[(e + 1) % 4]]
        pairs[c] = [tuple(crossed)]

    segs = []

    def emit(mask, ea, eb):
        if not mask.any():
            return
        a = np.stack([ex[ea][mask], ey[ea][mask]], axis=-1)
        b = np.stack([ex[eb][mask], ey[eb][mask]], axis=-1)
        segs.append(np.stack([a, b], axis=1))

    for c, plist in pairs.items():
        mask = code == c
        for ea, eb in plist:
            emit(mask, ea, eb)

    # saddles: code 5 has 00 and 11 positive, code 10 has 10 and 01 positive
    s5 = code == 5
    s10 = code == 10
    iso_10_01 = (s5 & center_pos) | (s10 & ~center_pos)  # cut off corners 10 and 01
    iso_00_11 = (s5 & ~center_pos) | (s10 & center_pos)  # cut off corners 00 and 11
    emit(iso_10_01, 0, 1)
    emit(iso_10_01, 2, 3)
    emit(iso_00_11, 3, 0)
    emit(iso_00_11, 1, 2)

    if not segs:
        return NodalCurve(np.zeros((0, 2, 2)), h)
    return NodalCurve(np.concatenate(segs, axis=0), h)


def nodal_length_in_ball(curve: NodalCurve, center, r: float) -> float:
    """Total length of the segments after exact clipping to the open disk B(center, r)."""
    if r < MIN_RADIUS_CELLS * curve.h * (1.0 - 1e-12):
        raise PrecisionError(f"radius {r:.4g} is below {MIN_RADIUS_CELLS}h")
    if len(curve) == 0:
        return 0.0
    p0 = curve.segments[:, 0] - np.asarray(center, dtype=float)
    d = curve.segments[:, 1] - curve.segments[:, 0]
    a = np.einsum("ij,ij->i", d, d)
    b = 2.0 * np.einsum("ij,ij->i", d, p0)
    c = np.einsum("ij,ij->i", p0, p0) - r * r
    disc = b * b - 4.0 * a * c
    ok = (a > 0.0) & (disc > 0.0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    a_safe = np.where(ok, a, 1.0)
    t_lo = np.clip((-b - sq) / (2.0 * a_safe), 0.0, 1.0)
    t_hi = np.clip((-b + sq) / (2.0 * a_safe), 0.0, 1.0)
    frac = np.where(ok, np.maximum(t_hi - t_lo, 0.0), 0.0)
    return float((frac * np.sqrt(a)).sum())


def nodal_density(curve: NodalCurve, y, r: float) -> float:
    """Nodal length in B(y, r) divided by r (the d - 1 = 1 power in two dimensions)."""
    return nodal_length_in_ball(curve, y, r) / r


def singular_candidates(u: DiscreteField, grad, delta_u: float = 0.05, delta_g: float = 0.05,
                        radius: float = 1.0) -> SingularCandidates:
    """Clusters of nodes in B_radius where |u| and |grad u| are both relatively small.

    Thresholds are fractions of the sup of |u| and |grad u| over B_radius;
    passing nodes are grouped by 8-connectivity and cluster centroids returned.
    """
    if not (0.0 < delta_u < 1.0 and 0.0 < delta_g < 1.0):
        raise ValueError("thresholds must lie in (0, 1)")
    X1, X2 = u.grid.mesh()
    inside = X1 * X1 + X2 * X2 <= radius * radius
    gmag = np.hypot(grad[0].values, grad[1].values)
    au = np.abs(u.values)
    su = float(au[inside].max())
    sg = float(gmag[inside].max())
    hit = inside & (au < delta_u * su) & (gmag < delta_g * sg)
    labels, count = ndimage.label(hit, structure=np.ones((3, 3), dtype=int))
    points = []
    for k in range(1, count + 1):
        sel = labels == k
        points.append((float(X1[sel].mean()), float(X2[sel].mean())))
    return SingularCandidates(tuple(points), delta_u, delta_g)


def nodal_report(curve: NodalCurve, eps: float, lam: float, centers=(), radii=()) -> NodalReport:
    """F at (0, sqrt(lam)/4) plus every requested (center, r) pair."""
    r_main = 0.25 * math.sqrt(lam)
    f_main = nodal_density(curve, (0.0, 0.0), r_main)
    dens = [((0.0, 0.0), r_main, f_main)]
    for c in centers:
        for r in radii:
            dens.append((tuple(c), r, nodal_density(curve, c, r)))
    return NodalReport(eps, tuple(dens), f_main)
