"""Minimum-norm kernel interpolation: fit, evaluate, error and native norm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from shapelab._io import read_csv, write_csv
from shapelab.kernels import KernelSpec, cross_matrix, kernel_matrix
from shapelab.points import PointSet, as_points, grid_2d, midpoint_grid_1d

# eigenvalues below RCOND * lambda_max are dropped (flat-limit rank deficiency)
RCOND = 1e-12


@dataclass(frozen=True)
class SolveReport:
    cond_estimate: float
    dropped_rank: int
    method: str = "eigh-pinv"


@dataclass(frozen=True, eq=False)
class Interpolant:
    """``s = sum_j coeffs[j] k(., nodes[j])`` together with the data it fits."""

    spec: KernelSpec
    nodes: PointSet
    coeffs: np.ndarray
    data: np.ndarray
    report: SolveReport

    def __call__(self, Xeval) -> np.ndarray:
        return evaluate(self, Xeval)

    def to_csv(self, path) -> None:
        """Nodes and coefficients, one node per row."""
        d = self.nodes.dim
        header = [f"x{i + 1}" for i in range(d)] + ["coeff", "value"]
        rows = [list(p) + [a, y] for p, a, y in zip(self.nodes.points, self.coeffs, self.data)]
        write_csv(path, header, rows)

    @classmethod
    def from_csv(cls, path, spec: KernelSpec) -> Interpolant:
        rows = read_csv(path)
        d = sum(1 for k in rows[0] if k.startswith("x"))
        pts = np.array([[float(r[f"x{i + 1}"]) for i in range(d)] for r in rows])
        coeffs = np.array([float(r["coeff"]) for r in rows])
        data = np.array([float(r["value"]) for r in rows])
        return cls(spec, as_points(pts), coeffs, data, SolveReport(float("nan"), 0, "loaded"))


def solve_spd(A: np.ndarray, y: np.ndarray, rcond: float = RCOND) -> tuple[np.ndarray, SolveReport]:
    """Truncated spectral pseudo-inverse solve of a symmetric system."""
    w, V = np.linalg.eigh(A)
    lam_max = w[-1]
    keep = w > rcond * lam_max
    Vk = V[:, keep]
    alpha = Vk @ ((Vk.T @ y) / w[keep])
    report = SolveReport(
        cond_estimate=float(lam_max / w[keep][0]),
        dropped_rank=int(np.count_nonzero(~keep)),
    )
    return alpha, report


def fit(spec: KernelSpec, X: PointSet, y, rcond: float = RCOND) -> Interpolant:
    """Interpolate ``y`` at the nodes ``X``.

    The kernel matrix is diagonalised and eigenvalues below
    ``rcond * lambda_max`` are discarded, so near-flat kernels yield the
    minimum-norm solution on the numerically resolved subspace instead of
    failing.
    """
    X = as_points(X)
    y = np.asarray(y, dtype=float).ravel()
    if len(y) != len(X):
        raise ValueError(f"got {len(y)} data values for {len(X)} nodes")
    A = kernel_matrix(spec, X)
    alpha, report = solve_spd(A, y, rcond)
    return Interpolant(spec, X, alpha, y, report)


def evaluate(s: Interpolant, Xeval) -> np.ndarray:
    Xeval = as_points(Xeval)
    if Xeval.dim != s.nodes.dim:
        raise ValueError(f"evaluation points have dimension {Xeval.dim}, nodes have {s.nodes.dim}")
    out = np.empty(len(Xeval))
    step = 1024
    for i in range(0, len(Xeval), step):
        out[i:i + step] = cross_matrix(s.spec, Xeval.points[i:i + step], s.nodes.points) @ s.coeffs
    return out


def sample(f, X: PointSet) -> np.ndarray:
    """Values of ``f`` on ``X``; 1D callables get a flat coordinate array."""
    if callable(f):
        arg = X.points[:, 0] if X.dim == 1 else X.points
        return np.asarray(f(arg), dtype=float).ravel()
    vals = np.asarray(f, dtype=float).ravel()
    if len(vals) != len(X):
        raise ValueError(f"sampled target has {len(vals)} values, grid has {len(X)} points")
    return vals


def evaluation_grid(dim: int, m_eval: int) -> PointSet:
    if dim == 1:
        return midpoint_grid_1d(m_eval)
    if dim == 2:
        return grid_2d(m_eval)
    raise ValueError(f"no default evaluation grid in dimension {dim}")


def rmse_error(s: Interpolant, f, m_eval: int | None = None, grid: PointSet | None = None) -> float:
    """Root mean squared error of ``f - s`` on a midpoint grid.

    On the unit interval/square this is the L2 error. ``f`` is a callable or
    an array of values on ``grid``; ``m_eval`` is the number of points per
    axis of the default grid.
    """
    if grid is None:
        if m_eval is None or m_eval < 2:
            raise ValueError("m_eval must be at least 2")
        grid = evaluation_grid(s.nodes.dim, m_eval)
    r = sample(f, grid) - evaluate(s, grid)
    return float(np.sqrt(np.mean(r * r)))


def native_norm(s: Interpolant) -> float:
    """RKHS norm ``sqrt(alpha^T A alpha)`` of the interpolant."""
    return float(np.sqrt(max(float(s.coeffs @ s.data), 0.0)))

