"""Unit-cell problems on the torus: correctors, effective tensor, flux correctors.

Grid node (i, j) sits at y = (i/n, j/n). The corrector equation

    -div(A (e_j + grad chi_j)) = 0,   mean(chi_j) = 0

is discretized with the conservative stencil of :mod:`homog_lab.stencil`
and solved by preconditioned conjugate gradients on the mean-zero subspace.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import stencil
from .coefficients import CoefficientField, SymMatrix2
from .errors import PreconditionError, SolverFailure

log = logging.getLogger(__name__)

MEAN_ZERO_TOL = 1e-10


@dataclass(frozen=True)
class TorusField:
    n: int
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.n, self.n):
            raise ValueError(f"expected a {self.n}x{self.n} array, got {v.shape}")
        object.__setattr__(self, "values", v)
        if self.mean_zero and abs(v.mean()) > MEAN_ZERO_TOL:
            raise ValueError(f"field flagged mean-zero has average {v.mean():.3e}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def mean(self) -> float:
        return float(self.values.mean())

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def __neg__(self) -> TorusField:
        return TorusField(self.n, -self.values, self.mean_zero)

    def interpolate(self, y1, y2):
        """Periodic bilinear interpolation at arbitrary points."""
        n = self.n
        t1 = np.mod(np.asarray(y1, dtype=float), 1.0) * n
        t2 = np.mod(np.asarray(y2, dtype=float), 1.0) * n
        i0 = np.floor(t1).astype(np.int64)
        j0 = np.floor(t2).astype(np.int64)
        f1 = t1 - i0
        f2 = t2 - j0
        i0 %= n
        j0 %= n
        i1 = (i0 + 1) % n
        j1 = (j0 + 1) % n
        v = self.values
        return ((1 - f1) * (1 - f2) * v[i0, j0] + f1 * (1 - f2) * v[i1, j0]
                + (1 - f1) * f2 * v[i0, j1] + f1 * f2 * v[i1, j1])


@dataclass(frozen=True)
class CorrectorSet:
    chi1: TorusField
    chi2: TorusField
    residual_norm: float
    grid_n: int
    iterations: tuple[int, int] = (0, 0)

    def __getitem__(self, j: int) -> TorusField:
        """chi_j for j in {1, 2}."""
        return (self.chi1, self.chi2)[j - 1]


@dataclass(frozen=True)
class HomogenizedTensor:
    a_hat: SymMatrix2
    lambda_hat_min: float
    lambda_hat_max: float
    asymmetry: float = 0.0

    @classmethod
    def from_matrix(cls, m: SymMatrix2, asymmetry: float = 0.0) -> HomogenizedTensor:
        lo, hi = m.eigenvalues()
        return cls(m, lo, hi, asymmetry)

    def as_array(self) -> np.ndarray:
        return self.a_hat.as_array()


@dataclass(frozen=True)
class FluxCorrector:
    """Flux corrector phi_kij with phi_kij = -phi_ikj.

    In two dimensions only phi_12j (j = 1, 2) is stored; phi_21j is its
    negation and phi_11j = phi_22j = 0.
    """

    stored: dict
    divergence_residual: float

    def phi(self, k: int, i: int, j: int) -> TorusField:
        if k == i:
            n = self.stored[1].n
            return TorusField(n, np.zeros((n, n)))
        if (k, i) == (1, 2):
            return self.stored[j]
        if (k, i) == (2, 1):
            return -self.stored[j]
        raise IndexError(f"indices must lie in {{1, 2}}, got {(k, i, j)}")


def _check_n(n: int):
    if n < 8 or n & (n - 1):
        raise ValueError(f"cell grid size must be a power of two, got {n}")


def node_coefficients(field: CoefficientField, n: int):
    t = np.arange(n) / n
    y1, y2 = np.meshgrid(t, t, indexing="ij")
    return field.components(y1, y2)


def _laplacian_symbol(n: int, c11: float, c22: float):
    """h**2-scaled symbol of c11 D1'D1 + c22 D2'D2 (two-point face differences)."""
    k1 = 4.0 * np.sin(np.pi * np.arange(n) / n) ** 2
    k2 = 4.0 * np.sin(np.pi * np.arange(n // 2 + 1) / n) ** 2
    sym = c11 * k1[:, None] + c22 * k2[None, :]
    sym[0, 0] = np.inf
    return sym


def pcg_torus(matrix, rhs, tol, max_iter, precondition):
    """Conjugate gradients on the mean-zero subspace of a periodic grid.

    ``precondition`` maps a residual array to a correction array. The
    constant mode is projected out of every residual and update.
    """
    n = rhs.shape[0]
    b = rhs.ravel() - rhs.mean()
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x.reshape(n, n), 0.0, 0
    r = b.copy()
    z = precondition(r.reshape(n, n)).ravel()
    z -= z.mean()
    p = z.copy()
    rz = r @ z
    res = 1.0
    for it in range(1, max_iter + 1):
        q = matrix @ p
        alpha = rz / (p @ q)
        x += alpha * p
        r -= alpha * q
        r -= r.mean()
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            x -= x.mean()
            return x.reshape(n, n), res, it
        z = precondition(r.reshape(n, n)).ravel()
        z -= z.mean()
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverFailure(f"cell PCG did not converge in {max_iter} iterations", res)


def solve_cell(field: CoefficientField, n: int = 256, tol: float = 1e-10,
               preconditioner: str = "spectral") -> CorrectorSet:
    """Solve both corrector problems on an n x n periodic grid.

    ``preconditioner`` is ``"spectral"`` (FFT inverse of the mean-coefficient
    Laplacian; default) or ``"jacobi"`` (diagonal).
    """
    _check_n(n)
    if not 0.0 < tol <= 1e-6:
        raise ValueError(f"tol must lie in (0, 1e-6], got {tol}")
    a11, a12, a22 = node_coefficients(field, n)
    a11x, a22y, a12c = stencil.torus_coefficients(a11, a12, a22)
    weights = stencil.torus_weights(a11x, a22y, a12c)
    mat = stencil.torus_matrix(weights)

    if preconditioner == "spectral":
        sym = _laplacian_symbol(n, float(a11x.mean()), float(a22y.mean()))

        def precondition(r):
            return np.fft.irfft2(np.fft.rfft2(r) / sym, s=r.shape)
    elif preconditioner == "jacobi":
        diag = weights[(0, 0)]

        def precondition(r):
            return r / diag
    else:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")

    # -K y_j in flux form: the face/cell fluxes of the constant gradient e_j
    h = 1.0 / n
    rhs = (
        -_div_t(a11x, a12c, h, 0),
        -_div_t(a22y, a12c, h, 1),
    )
    chis, residuals, iters = [], [], []
    for j in (0, 1):
        # stencil weights carry a factor h**2
        chi, res, it = pcg_torus(mat, rhs[j] * (h * h), tol, 20 * n, precondition)
        chi = chi - chi.mean()
        chis.append(TorusField(n, chi, mean_zero=True))
        residuals.append(res)
        iters.append(it)
        log.debug("corrector %d: %d iterations, residual %.2e", j + 1, it, res)
    return CorrectorSet(chis[0], chis[1], max(residuals), n, tuple(iters))


def _div_t(face_coef, cell_coef, h, direction):
    """Transpose-difference (discrete -div) of the flux of grad(y_{direction+1}).

    For e_1 the flux has a11 on x-faces and a12 on cells (feeding the
    y-component through G2'); for e_2, a22 on y-faces and a12 through G1'.
    """
    if direction == 0:
        out = (np.roll(face_coef, 1, 0) - face_coef) / h
        out += _g_transpose(cell_coef, h, 1)
    else:
        out = (np.roll(face_coef, 1, 1) - face_coef) / h
        out += _g_transpose(cell_coef, h, 0)
    return out


def _g_transpose(g, h, axis):
    """Transpose of the four-corner cell gradient along ``axis`` (periodic)."""
    gim = np.roll(g, 1, 0)
    gjm = np.roll(g, 1, 1)
    gimjm = np.roll(gim, 1, 1)
    if axis == 0:
        return (gim + gimjm - g - gjm) / (2.0 * h)
    return (gjm + gimjm - g - gim) / (2.0 * h)


def _g_apply(u, h, axis):
    """Four-corner cell gradient along ``axis``; value at cell (i+1/2, j+1/2)."""
    ui = np.roll(u, -1, 0)
    uj = np.roll(u, -1, 1)
    uij = np.roll(ui, -1, 1)
    if axis == 0:
        return (ui + uij - u - uj) / (2.0 * h)
    return (uj + uij - u - ui) / (2.0 * h)


def _face_fluxes(field: CoefficientField, chi: CorrectorSet):
    """Staggered fluxes of A(e_j + grad chi_j).

    Returns, for each column j, the pair (flux1, flux2) with each component
    split into its face part and cell part.
    """
    n = chi.grid_n
    h = 1.0 / n
    a11, a12, a22 = node_coefficients(field, n)
    a11x, a22y, a12c = stencil.torus_coefficients(a11, a12, a22)
    out = []
    for j in (1, 2):
        c = chi[j].values
        d1 = (np.roll(c, -1, 0) - c) / h + (1.0 if j == 1 else 0.0)
        d2 = (np.roll(c, -1, 1) - c) / h + (1.0 if j == 2 else 0.0)
        g1 = _g_apply(c, h, 0) + (1.0 if j == 1 else 0.0)
        g2 = _g_apply(c, h, 1) + (1.0 if j == 2 else 0.0)
        out.append(((a11x * d1, a12c * g2), (a22y * d2, a12c * g1)))
    return out


def homogenized(field: CoefficientField, chi: CorrectorSet) -> HomogenizedTensor:
    """Cell average of A(e_j + grad chi_j), taken over the staggered grid.

    Row i of the average is the i-th flux component. For symmetric A the
    discrete weak form makes the result symmetric up to solver tolerance;
    the two off-diagonal entries are averaged and their gap is kept in
    ``asymmetry``.
    """
    fluxes = _face_fluxes(field, chi)
    raw = np.empty((2, 2))
    for j in (0, 1):
        for i in (0, 1):
            face, cell = fluxes[j][i]
            raw[i, j] = face.mean() + cell.mean()
    return HomogenizedTensor.from_matrix(SymMatrix2.from_array(raw), abs(raw[0, 1] - raw[1, 0]))


def flux_field(field: CoefficientField, chi: CorrectorSet, a_hat: HomogenizedTensor) -> np.ndarray:
    """B = A + A grad chi - A_hat sampled at nodes, shape (2, 2, n, n).

    Face fluxes are averaged onto nodes (two faces, four cells), so the grid
    mean of b_ij equals the staggered average minus the symmetrized tensor.
    """
    fluxes = _face_fluxes(field, chi)
    ahat = a_hat.as_array()
    n = chi.grid_n
    b = np.empty((2, 2, n, n))
    for j in (0, 1):
        for i in (0, 1):
            face, cell = fluxes[j][i]
            face_node = 0.5 * (face + np.roll(face, 1, i))
            cim = np.roll(cell, 1, 0)
            cell_node = 0.25 * (cell + cim + np.roll(cell, 1, 1) + np.roll(cim, 1, 1))
            b[i, j] = face_node + cell_node - ahat[i, j]
    return b


def central_diff(u: np.ndarray, axis: int) -> np.ndarray:
    """Periodic central difference on the unit torus."""
    n = u.shape[axis]
    return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) * (n / 2.0)


def row_divergence(b: np.ndarray) -> np.ndarray:
    """d_i b_ij for each j, central differences; shape (2, n, n)."""
    return np.stack([central_diff(b[0, j], 0) + central_diff(b[1, j], 1) for j in (0, 1)])


def _central_poisson(rhs: np.ndarray) -> np.ndarray:
    """Solve (D1c^2 + D2c^2) f = rhs exactly in Fourier space, mean zero.

    Modes annihilated by the central-difference Laplacian (zero and Nyquist
    lines) are dropped.
    """
    n = rhs.shape[0]
    s1 = np.sin(2.0 * np.pi * np.arange(n) / n) * n
    s2 = np.sin(2.0 * np.pi * np.arange(n // 2 + 1) / n) * n
    sym = -(s1[:, None] ** 2 + s2[None, :] ** 2)
    zero = np.abs(sym) < 1e-9 * n * n
    sym[zero] = 1.0
    f_hat = np.fft.rfft2(rhs) / sym
    f_hat[zero] = 0.0
    return np.fft.irfft2(f_hat, s=rhs.shape)


def flux_corrector(b: np.ndarray, tol: float = 1e-10) -> FluxCorrector:
    """Antisymmetric potentials with b_ij = d_k phi_kij.

    Solves the periodic Poisson problem Lap f_ij = b_ij and sets
    phi_kij = d_k f_ij - d_i f_kj, all derivatives central differences.
    """
    b = np.asarray(b, dtype=float)
    if b.ndim != 4 or b.shape[:2] != (2, 2) or b.shape[2] != b.shape[3]:
        raise ValueError(f"expected b with shape (2, 2, n, n), got {b.shape}")
    n = b.shape[2]
    scale = max(1.0, float(np.abs(b).max()))
    means = b.mean(axis=(2, 3))
    if np.abs(means).max() > max(tol, 1e-8) * scale:
        raise PreconditionError(f"flux field must be mean-zero; got means {means.tolist()}")
    f = np.empty_like(b)
    for i in (0, 1):
        for j in (0, 1):
            f[i, j] = _central_poisson(b[i, j] - means[i, j])
    stored = {}
    for j in (0, 1):
        # phi_12j = d_1 f_2j - d_2 f_1j
        stored[j + 1] = TorusField(n, central_diff(f[1, j], 0) - central_diff(f[0, j], 1))
    residual = 0.0
    for j in (0, 1):
        phi = stored[j + 1].values
        # b_1j = d_2 phi_21j = -d_2 phi_12j ;  b_2j = d_1 phi_12j
        residual = max(
            residual,
            float(np.abs(-central_diff(phi, 1) - b[0, j]).max()),
            float(np.abs(central_diff(phi, 0) - b[1, j]).max()),
        )
    return FluxCorrector(stored, residual)
