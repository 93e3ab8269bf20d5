"""Discrete Mercer decompositions and coefficient-decay smoothness estimates.

The integral operator ``(T f)(x) = int k(x, z) f(z) dz`` is discretised with
the midpoint rule on a cell-centred grid, i.e. ``T ~ w A`` with ``w`` the
cell volume. Eigenvectors ``v_j`` of ``w A`` give eigenfunctions
``phi_j = v_j / sqrt(w)``, normalised in the discrete L2 inner product.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from shapelab._io import format_float, write_csv
from shapelab.kernels import Family, KernelSpec, TabulatedKernel, kernel_matrix
from shapelab.points import PointSet

EIG_RTOL = 1e-14
COEF_RTOL = 1e-14
MIN_WINDOW = 5


@dataclass(frozen=True, eq=False)
class DiscreteMercer:
    spec: KernelSpec
    grid: PointSet
    axes: tuple
    weight: float
    eigvals: np.ndarray
    eigfuns: np.ndarray

    @property
    def size(self) -> int:
        return len(self.eigvals)

    def reconstruct(self, sigma: float = 1.0) -> np.ndarray:
        """``sum_j lambda_j^sigma phi_j(x_a) phi_j(x_b)`` on the grid."""
        Phi = self.eigfuns
        return (Phi * self.eigvals**sigma) @ Phi.T

    def to_csv(self, prefix) -> None:
        """Write ``<prefix>_eigvals.csv`` (j, lambda) and ``<prefix>_eigfuns.csv``."""
        write_csv(f"{prefix}_eigvals.csv", ["j", "lambda"],
                  [(j + 1, lam) for j, lam in enumerate(self.eigvals)])
        d = self.grid.dim
        header = [f"x{i + 1}" for i in range(d)] + [f"phi_{j + 1}" for j in range(self.size)]
        with open(f"{prefix}_eigfuns.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for p, row in zip(self.grid.points, self.eigfuns):
                w.writerow([format_float(v) for v in p] + [format_float(v) for v in row])


@dataclass(frozen=True)
class CoefficientDecay:
    """Power-law fit ``|c_j| ~ C j^(-slope)`` and the implied smoothness.

    ``theta0`` is the power-space smoothness and ``beta0 = tau * min(theta0, 2)``
    the predicted L2 rate of interpolation. ``theta0`` is ``inf`` for a
    numerically finite expansion.
    """

    coeffs: np.ndarray
    fitted_slope: float
    theta0: float
    beta0: float
    window: tuple
    r_squared: float


def grid_axes(grid: PointSet, atol: float = 1e-12) -> tuple:
    """Per-axis nodes of a uniform cell-centred tensor grid (C order), or raise."""
    pts = grid.points
    axes = tuple(np.unique(pts[:, k]) for k in range(grid.dim))
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != len(grid):
        raise ValueError("grid is not a full tensor product")
    mesh = np.meshgrid(*axes, indexing="ij")
    if not np.allclose(np.column_stack([m.ravel() for m in mesh]), pts, rtol=0, atol=atol):
        raise ValueError("grid points are not in C order over their axes")
    for k, ax in enumerate(axes):
        h = (grid.upper[k] - grid.lower[k]) / len(ax)
        expected = grid.lower[k] + h * (np.arange(len(ax)) + 0.5)
        if not np.allclose(ax, expected, rtol=0, atol=atol * max(1.0, h)):
            raise ValueError("grid must be uniform and cell-centred")
    return axes


def discrete_mercer(spec: KernelSpec, grid: PointSet, k_top: int | None = None) -> DiscreteMercer:
    """Leading ``k_top`` Nystrom eigenpairs of the kernel integral operator.

    Eigenvalues below ``1e-14 * lambda_1`` are discarded, so fewer than
    ``k_top`` pairs may be returned. Each eigenfunction is signed so that its
    grid mean is positive (first significant entry positive if the mean
    vanishes).
    """
    N = len(grid)
    k_top = N if k_top is None else int(k_top)
    if not 1 <= k_top <= N:
        raise ValueError(f"k_top must lie in [1, {N}], got {k_top}")
    axes = grid_axes(grid)
    weight = grid.volume / N
    A = weight * kernel_matrix(spec, grid)
    if k_top == N:
        lam, V = np.linalg.eigh(A)
    else:
        lam, V = scipy.linalg.eigh(A, subset_by_index=[N - k_top, N - 1])
    lam, V = lam[::-1], V[:, ::-1]
    keep = lam > EIG_RTOL * lam[0]
    lam, V = lam[keep], V[:, keep]
    Phi = V / math.sqrt(weight)
    Phi *= _signs(Phi)
    lam.setflags(write=False)
    Phi.setflags(write=False)
    return DiscreteMercer(spec, grid, axes, weight, lam, Phi)


def _signs(Phi: np.ndarray) -> np.ndarray:
    s = Phi.sum(axis=0)
    scale = np.abs(Phi).max(axis=0)
    out = np.sign(s)
    weak = np.abs(s) <= 1e-8 * scale * len(Phi)
    for j in np.flatnonzero(weak):
        col = Phi[:, j]
        first = np.flatnonzero(np.abs(col) > 1e-8 * scale[j])[0]
        out[j] = np.sign(col[first])
    out[out == 0] = 1.0
    return out


def _loglog_fit(j: np.ndarray, v: np.ndarray) -> tuple[float, float]:
    x, y = np.log(j), np.log(v)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


def eigen_decay_exponent(M, j_lo: int, j_hi: int) -> float:
    """Least-squares slope of ``log lambda_j`` against ``log j`` for ``j_lo <= j <= j_hi``.

    ``M`` is a :class:`DiscreteMercer` or a plain descending eigenvalue
    sequence. Indices are 1-based. Keep ``j_hi`` well below the grid size
    (about ``N / 10``) so quadrature error does not bend the tail.
    """
    lam = np.asarray(M.eigvals if isinstance(M, DiscreteMercer) else M, dtype=float)
    if j_hi - j_lo + 1 < MIN_WINDOW:
        raise ValueError(f"window [{j_lo}, {j_hi}] has fewer than {MIN_WINDOW} indices")
    if j_lo < 1 or j_hi > len(lam):
        raise ValueError(f"window [{j_lo}, {j_hi}] outside the available 1..{len(lam)}")
    j = np.arange(j_lo, j_hi + 1)
    return _loglog_fit(j, lam[j - 1])[0]


def mercer_coefficients(f, M: DiscreteMercer) -> np.ndarray:
    """``c_j = w sum_i f(x_i) phi_j(x_i)``; ``f`` is a callable or grid values."""
    if callable(f):
        arg = M.grid.points[:, 0] if M.grid.dim == 1 else M.grid.points
        vals = np.asarray(f(arg), dtype=float).ravel()
    else:
        vals = np.asarray(f, dtype=float).ravel()
    if len(vals) != len(M.grid):
        raise ValueError(f"target has {len(vals)} values, grid has {len(M.grid)} points")
    return M.weight * (M.eigfuns.T @ vals)


def default_window(n_grid: int) -> tuple[int, int]:
    return 5, max(9, min(50, n_grid // 10))


def smoothness_estimate(c, tau: float, dim: int, window=None) -> CoefficientDecay:
    """Fit the coefficient decay on ``window`` and convert it to smoothness.

    With ``|c_j| ~ j^(-s)`` the series ``sum j^(2 theta tau / d) c_j^2``
    converges exactly for ``theta < d (2 s - 1) / (2 tau)``, which is the
    reported ``theta0``. Coefficients below ``1e-14 * max |c|`` are ignored;
    if none survive past the leading ones the expansion is treated as finite.
    """
    c = np.abs(np.asarray(c, dtype=float))
    lo, hi = window if window is not None else default_window(len(c))
    hi = min(hi, len(c))
    if hi - lo + 1 < MIN_WINDOW:
        raise ValueError(f"window [{lo}, {hi}] has fewer than {MIN_WINDOW} indices")
    floor = COEF_RTOL * c.max() if c.size and c.max() > 0 else 0.0
    if c.size == 0 or c.max() == 0.0:
        raise ValueError("all coefficients vanish")
    j = np.arange(lo, hi + 1)
    sel = c[j - 1] > floor
    if np.count_nonzero(sel) < MIN_WINDOW:
        if not np.any(c[lo - 1:] > floor):
            return CoefficientDecay(c, math.inf, math.inf, 2.0 * tau, (lo, hi), 1.0)
        raise ValueError(f"fewer than {MIN_WINDOW} usable coefficients in window [{lo}, {hi}]")
    slope, r2 = _loglog_fit(j[sel], c[j[sel] - 1])
    s = -slope
    theta0 = dim * (2.0 * s - 1.0) / (2.0 * tau)
    return CoefficientDecay(c, s, theta0, tau * min(theta0, 2.0), (lo, hi), r2)


def power_kernel(M: DiscreteMercer, sigma: float) -> KernelSpec:
    """Tabulated kernel ``sum_j lambda_j^sigma phi_j(x) phi_j(z)``.

    Its eigenfunctions are those of ``M`` and its Sobolev order is
    ``sigma * tau`` of the source kernel.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    table = TabulatedKernel(M.axes, M.reconstruct(sigma))
    return KernelSpec(Family.TABULATED_MERCER, M.spec.eps, M.grid.dim, sigma * M.spec.tau, table)


def eigenfunction_target(M: DiscreteMercer, j: int = 1, gamma: float = 0.0, cusp: bool = True) -> np.ndarray:
    """``phi_j`` on the grid, optionally plus ``gamma |x1 - 0.5|``."""
    if not 1 <= j <= M.size:
        raise ValueError(f"eigenfunction index {j} outside 1..{M.size}")
    f = np.array(M.eigfuns[:, j - 1])
    if cusp and gamma != 0.0:
        f = f + gamma * np.abs(M.grid.points[:, 0] - 0.5)
    return f
