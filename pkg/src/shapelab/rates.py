"""Convergence-rate tables and the boundary-condition test for optimal shapes.

Each 1D Green kernel reproduces functions in the range of its integral
operator, i.e. solutions of ``-u'' + eps^2 u = g`` with the kernel's
boundary conditions. A smooth target converges at the doubled rate exactly
for those ``eps`` whose boundary conditions it satisfies, so the residuals
below predict the optimal shape parameters without fitting anything.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from shapelab._io import write_csv
from shapelab.kernels import Family, TAGS

FD_STEP = 1e-4
BC_TOL = 1e-6


def pairwise_rates(errors, h) -> np.ndarray:
    """``log(e_i / e_{i+1}) / log(h_i / h_{i+1})`` for consecutive entries."""
    e = np.asarray(errors, dtype=float)
    h = np.asarray(h, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or len(e) < 2:
        raise ValueError("errors and h must be 1d sequences of equal length >= 2")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and h must be positive")
    if np.any(np.diff(h) >= 0):
        raise ValueError("h must be strictly decreasing")
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


@dataclass(frozen=True, eq=False)
class RateTable:
    """Errors over an (eps, n) grid and the pairwise rates along each row.

    ``slopes[i, k]`` is the rate between ``n_ladder[k]`` and ``n_ladder[k + 1]``
    at ``eps_grid[i]``; it is NaN where either error is at or below 1e-14.
    """

    eps_grid: np.ndarray
    n_ladder: np.ndarray
    h: np.ndarray
    errors: np.ndarray
    slopes: np.ndarray

    @classmethod
    def from_errors(cls, eps_grid, n_ladder, h, errors) -> RateTable:
        eps_grid = np.asarray(eps_grid, dtype=float)
        n_ladder = np.asarray(n_ladder, dtype=int)
        h = np.asarray(h, dtype=float)
        errors = np.asarray(errors, dtype=float).reshape(len(eps_grid), len(n_ladder))
        if np.any(errors <= 0):
            raise ValueError("errors must be positive")
        slopes = np.full((len(eps_grid), len(n_ladder) - 1), np.nan)
        for i, row in enumerate(errors):
            r = pairwise_rates(row, h)
            ok = (row[:-1] > 1e-14) & (row[1:] > 1e-14)
            slopes[i, ok] = r[ok]
        return cls(eps_grid, n_ladder, h, errors, slopes)

    def final_rates(self) -> np.ndarray:
        """Rate between the two largest ``n`` for every ``eps``."""
        return self.slopes[:, -1]

    def nearest(self, eps: float) -> int:
        return int(np.argmin(np.abs(np.log(self.eps_grid) - math.log(eps))))

    def to_csv(self, path) -> None:
        rows = []
        for i, e in enumerate(self.eps_grid):
            for k, n in enumerate(self.n_ladder):
                rate = self.slopes[i, k - 1] if k > 0 else None
                rows.append([e, n, self.h[k], self.errors[i, k], rate])
        write_csv(path, ["eps", "n", "h", "error", "pairwise_rate"], rows)


@dataclass(frozen=True)
class BCResidual:
    family: Family
    eps: float
    r0: float
    r1: float

    @property
    def size(self) -> float:
        return max(abs(self.r0), abs(self.r1))


@dataclass(frozen=True)
class BoundaryData:
    """Values and one-sided derivatives of a 1D target at x = 0 and x = 1."""

    f0: float
    f1: float
    df0: float
    df1: float
    sup_norm: float

    @classmethod
    def from_function(cls, f, df=None, step: float = FD_STEP, n_sup: int = 10001) -> BoundaryData:
        """Sample ``f`` at the endpoints; differentiate analytically if ``df`` is given.

        Otherwise fourth-order one-sided differences with ``step`` are used.
        These are only accurate when ``f''`` is bounded near the endpoint.
        """
        if df is not None:
            d0, d1 = float(df(0.0)), float(df(1.0))
        else:
            d0, d1 = one_sided_derivatives(f, step)
        x = np.linspace(0.0, 1.0, n_sup)
        sup = float(np.max(np.abs(np.asarray(f(x), dtype=float))))
        return cls(float(f(0.0)), float(f(1.0)), d0, d1, sup)


_FD4 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0


def one_sided_derivatives(f, step: float = FD_STEP) -> tuple[float, float]:
    """Fourth-order one-sided first derivatives at 0 (forward) and 1 (backward)."""
    k = np.arange(5)
    d0 = float(_FD4 @ np.asarray(f(k * step), dtype=float)) / step
    d1 = -float(_FD4 @ np.asarray(f(1.0 - k * step), dtype=float)) / step
    return d0, d1


def robin_coefficient(family: Family, eps: float) -> float:
    """Coefficient ``a`` in ``u'(0) - a u(0) = 0 = u'(1) + a u(1)``."""
    family = _family(family)
    if family is Family.COSH_GREEN:
        return 0.0
    if family is Family.PERIODIC_GREEN:
        return 1.0 + math.cos(eps)
    if family is Family.BASIC_MATERN_1D:
        return float(eps)
    raise ValueError(f"no boundary conditions known for {family.value}")


def _family(family) -> Family:
    if isinstance(family, str) and family in TAGS:
        return TAGS[family]
    try:
        return Family(family)
    except ValueError:
        raise ValueError(f"unknown kernel family {family!r}") from None


def bc_residual(f_val0, f_val1, f_der0, f_der1, family, eps: float) -> BCResidual:
    """Residuals of the kernel's boundary conditions for the given endpoint data."""
    family = _family(family)
    a = robin_coefficient(family, eps)
    return BCResidual(family, float(eps), f_der0 - a * f_val0, f_der1 + a * f_val1)


def _residual_size(bd: BoundaryData, family: Family, eps: float) -> float:
    return bc_residual(bd.f0, bd.f1, bd.df0, bd.df1, family, eps).size


def predict_optimal_eps(bd: BoundaryData, family, eps_grid, tol: float = BC_TOL) -> np.ndarray:
    """Grid values of ``eps`` nearest to where the boundary conditions hold.

    The residual is minimised over the continuous range spanned by the grid;
    each minimiser whose residual is at most ``tol * (1 + sup|f|)`` is
    snapped to the nearest grid value (distance measured in ``log eps``).
    Returns the sorted, de-duplicated grid values.
    """
    family = _family(family)
    grid = np.sort(np.asarray(eps_grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty shape-parameter grid")
    thresh = tol * (1.0 + bd.sup_norm)
    lo, hi = grid[0], grid[-1]

    def R(e):
        return _residual_size(bd, family, e)

    if family is Family.COSH_GREEN:
        return grid.copy() if R(lo) <= thresh else np.empty(0)

    roots = [e for e in (lo, hi) if R(e) <= thresh]
    if hi > lo:
        # dense probe: resolves every oscillation of 1 + cos(eps) and the linear Robin term
        probe = np.union1d(np.geomspace(lo, hi, 200 * len(grid)), np.arange(lo, hi, 0.05))
        vals = np.array([R(e) for e in probe])
        roots.extend(probe[vals <= thresh])
        for i in range(1, len(probe) - 1):
            if vals[i] <= thresh or not (vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]):
                continue
            res = minimize_scalar(R, bounds=(probe[i - 1], probe[i + 1]), method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, probe[i])})
            if res.fun <= thresh:
                roots.append(float(res.x))
    if not roots:
        return np.empty(0)
    logs = np.log(grid)
    picked = {int(np.argmin(np.abs(logs - math.log(r)))) for r in roots}
    return grid[sorted(picked)]
