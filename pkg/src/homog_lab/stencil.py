"""Conservative nine-point discretization of -div(A grad u).

The discrete energy is

    sum_xfaces a11 (D1 u)^2 + sum_yfaces a22 (D2 u)^2 + 2 sum_cells a12 G1 u G2 u

with a11, a22 averaged onto cell faces and a12 averaged onto cell centres,
D the two-point face differences and G the four-corner cell gradient. The
operator is the (symmetric) Hessian of that energy. Weights are returned
multiplied by h**2, so entries are O(1) and ``sum W u = h**2 * source``.

Diagonal coefficient fields reduce to the usual five-point stencil.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def torus_coefficients(a11, a12, a22):
    """Face/cell averages of nodal coefficients with periodic wrap.

    Returns (a11x, a22y, a12c) where a11x[i, j] lives on the face between
    nodes i and i+1, a22y[i, j] between j and j+1, a12c[i, j] at the centre
    of the cell with lower-left node (i, j).
    """
    a11x = 0.5 * (a11 + np.roll(a11, -1, 0))
    a22y = 0.5 * (a22 + np.roll(a22, -1, 1))
    r = np.roll(a12, -1, 0)
    a12c = 0.25 * (a12 + r + np.roll(a12, -1, 1) + np.roll(r, -1, 1))
    return a11x, a22y, a12c


def box_coefficients(a11, a12, a22):
    """Face/cell averages of nodal coefficients on a bounded grid."""
    a11x = 0.5 * (a11[1:, :] + a11[:-1, :])
    a22y = 0.5 * (a22[:, 1:] + a22[:, :-1])
    a12c = 0.25 * (a12[1:, 1:] + a12[:-1, 1:] + a12[1:, :-1] + a12[:-1, :-1])
    return a11x, a22y, a12c


def torus_weights(a11x, a22y, a12c) -> dict:
    """Stencil weights at every node of a periodic grid."""

    def sh(a, di, dj):
        # value at (i + di, j + dj)
        return np.roll(np.roll(a, -di, 0), -dj, 1)

    c_ne = a12c
    c_sw = sh(a12c, -1, -1)
    c_se = sh(a12c, 0, -1)
    c_nw = sh(a12c, -1, 0)
    w = {
        (0, 0): a11x + sh(a11x, -1, 0) + a22y + sh(a22y, 0, -1) + 0.5 * (c_sw + c_ne - c_se - c_nw),
        (1, 0): -a11x,
        (-1, 0): -sh(a11x, -1, 0),
        (0, 1): -a22y,
        (0, -1): -sh(a22y, 0, -1),
        (1, 1): -0.5 * c_ne,
        (-1, -1): -0.5 * c_sw,
        (1, -1): 0.5 * c_se,
        (-1, 1): 0.5 * c_nw,
    }
    return w


def box_weights(a11x, a22y, a12c) -> dict:
    """Stencil weights at the interior nodes of a bounded (m x m) grid.

    Arrays in the result have shape (m - 2, m - 2).
    """
    east = a11x[1:, 1:-1]
    west = a11x[:-1, 1:-1]
    north = a22y[1:-1, 1:]
    south = a22y[1:-1, :-1]
    w = {
        (0, 0): east + west + north + south,
        (1, 0): -east,
        (-1, 0): -west,
        (0, 1): -north,
        (0, -1): -south,
    }
    if np.any(a12c):
        c_ne = a12c[1:, 1:]
        c_sw = a12c[:-1, :-1]
        c_se = a12c[1:, :-1]
        c_nw = a12c[:-1, 1:]
        w[(0, 0)] = w[(0, 0)] + 0.5 * (c_sw + c_ne - c_se - c_nw)
        w[(1, 1)] = -0.5 * c_ne
        w[(-1, -1)] = -0.5 * c_sw
        w[(1, -1)] = 0.5 * c_se
        w[(-1, 1)] = 0.5 * c_nw
    return w


def torus_matrix(weights: dict) -> sp.csr_matrix:
    n = weights[(0, 0)].shape[0]
    idx = np.arange(n * n).reshape(n, n)
    rows, cols, vals = [], [], []
    for (di, dj), w in weights.items():
        if not np.any(w):
            continue
        rows.append(idx.ravel())
        cols.append(np.roll(np.roll(idx, -di, 0), -dj, 1).ravel())
        vals.append(w.ravel())
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n)
    )


def box_matrix(weights: dict) -> sp.csr_matrix:
    """Interior-node matrix; couplings to boundary nodes are dropped."""
    k = weights[(0, 0)].shape[0]
    diagonals, offsets = [], []
    for (di, dj), w in weights.items():
        if not np.any(w):
            continue
        w = w.copy()
        # zero couplings whose neighbour falls on the boundary
        if di == 1:
            w[-1, :] = 0.0
        elif di == -1:
            w[0, :] = 0.0
        if dj == 1:
            w[:, -1] = 0.0
        elif dj == -1:
            w[:, 0] = 0.0
        off = di * k + dj
        flat = w.ravel()
        diagonals.append(flat[max(0, -off) : flat.size - max(0, off)] if off >= 0 else flat[-off:])
        offsets.append(off)
    mat = sp.diags(diagonals, offsets, shape=(k * k, k * k), format="csr")
    mat.eliminate_zeros()
    return mat


def box_boundary_rhs(weights: dict, boundary_values: np.ndarray) -> np.ndarray:
    """-(sum over boundary neighbours of W * g) at interior nodes.

    ``boundary_values`` is the full (m x m) array; only its boundary ring is read.
    """
    g = np.zeros_like(boundary_values)
    g[0, :] = boundary_values[0, :]
    g[-1, :] = boundary_values[-1, :]
    g[:, 0] = boundary_values[:, 0]
    g[:, -1] = boundary_values[:, -1]
    m = g.shape[0]
    rhs = np.zeros((m - 2, m - 2))
    for (di, dj), w in weights.items():
        if (di, dj) == (0, 0):
            continue
        rhs -= w * g[1 + di : m - 1 + di, 1 + dj : m - 1 + dj]
    return rhs
