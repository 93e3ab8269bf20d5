"""Parametrized Sobolev kernels and kernel matrix assembly.

Families
--------
``CoshGreen``      Green kernel of ``-u'' + eps^2 u`` with Neumann conditions on [0, 1].
``PeriodicGreen``  Same operator, Robin conditions with coefficient ``1 + cos(eps)``.
``BasicMatern1D``  ``exp(-eps |x - z|) / (2 eps)``.
``RadialMatern``   ``(1 + r) exp(-r)`` with ``r = eps ||x - z||`` in any dimension.
``TabulatedMercer`` a kernel given by a table on a tensor grid (see
                   :func:`shapelab.spectral.power_kernel`).

The two Green kernels with hyperbolic factors are evaluated in log space so
that shape parameters in the hundreds do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.spatial.distance import cdist

from shapelab.points import PointSet, as_points

_LOG2 = math.log(2.0)
_CHUNK = 2048


class Family(str, Enum):
    COSH_GREEN = "CoshGreen"
    PERIODIC_GREEN = "PeriodicGreen"
    BASIC_MATERN_1D = "BasicMatern1D"
    RADIAL_MATERN = "RadialMatern"
    TABULATED_MERCER = "TabulatedMercer"


GREEN_1D = (Family.COSH_GREEN, Family.PERIODIC_GREEN, Family.BASIC_MATERN_1D)

# short tags used on the command line and in CSV output
TAGS = {
    "k1": Family.COSH_GREEN,
    "k2": Family.PERIODIC_GREEN,
    "k3": Family.BASIC_MATERN_1D,
    "matern": Family.RADIAL_MATERN,
}
TAG_OF = {fam: tag for tag, fam in TAGS.items()}


@dataclass(frozen=True, eq=False)
class TabulatedKernel:
    """Kernel values on a cell-centred tensor grid, multilinear in between.

    ``axes`` holds the per-dimension node coordinates; ``values`` is the
    ``N x N`` table with grid points enumerated in C order over ``axes``.
    Points within half a cell of the box boundary are linearly extrapolated.
    """

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        shape = tuple(len(a) for a in self.axes)
        n = int(np.prod(shape))
        if self.values.shape != (n, n):
            raise ValueError(f"table shape {self.values.shape} does not match grid size {n}")
        interp = RegularGridInterpolator(
            tuple(self.axes) * 2,
            self.values.reshape(shape * 2),
            method="linear",
            bounds_error=False,
            fill_value=None,
        )
        object.__setattr__(self, "_interp", interp)

    @property
    def dim(self) -> int:
        return len(self.axes)

    def __call__(self, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
        idx_p, idx_q = self._grid_index(P), self._grid_index(Q)
        if idx_p is not None and idx_q is not None:
            return self.values[np.ix_(idx_p, idx_q)]
        d = self.dim
        pairs = np.empty((len(P), len(Q), 2 * d))
        pairs[:, :, :d] = P[:, None, :]
        pairs[:, :, d:] = Q[None, :, :]
        return self._interp(pairs.reshape(-1, 2 * d)).reshape(len(P), len(Q))

    def _grid_index(self, P: np.ndarray):
        # exact lookup when every point sits on a grid node
        flat = np.zeros(len(P), dtype=int)
        for k, ax in enumerate(self.axes):
            pos = np.searchsorted(ax, P[:, k])
            pos = np.clip(pos, 0, len(ax) - 1)
            if not np.array_equal(ax[pos], P[:, k]):
                return None
            flat = flat * len(ax) + pos
        return flat


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A kernel family with its shape parameter, dimension and Sobolev order.

    ``tau`` is fixed by the family for the closed forms (1 for the 1D Green
    kernels, ``(d + 3) / 2`` for RadialMatern) and is filled in when omitted.
    """

    family: Family
    eps: float = 1.0
    dim: int = 1
    tau: float | None = None
    table: TabulatedKernel | None = field(default=None, repr=False)

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam is Family.TABULATED_MERCER:
            if self.table is None:
                raise ValueError("TabulatedMercer kernels need a table")
            if self.tau is None:
                raise ValueError("TabulatedMercer kernels need an explicit tau")
            if self.table.dim != self.dim:
                raise ValueError("table dimension does not match dim")
        else:
            if not (self.eps > 0 and math.isfinite(self.eps)):
                raise ValueError(f"shape parameter must be positive, got {self.eps!r}")
            natural = 1.0 if fam in GREEN_1D else (self.dim + 3) / 2
            if fam in GREEN_1D and self.dim != 1:
                raise ValueError(f"{fam.value} is only defined for dim = 1")
            if self.tau is None:
                object.__setattr__(self, "tau", natural)
            elif not math.isclose(self.tau, natural):
                raise ValueError(f"{fam.value} in dim {self.dim} has tau = {natural}, got {self.tau}")
        if not self.tau > self.dim / 2:
            raise ValueError(f"Sobolev order tau = {self.tau} must exceed dim/2 = {self.dim / 2}")

    @property
    def tag(self) -> str:
        return TAG_OF.get(self.family, self.family.value)

    def with_eps(self, eps: float) -> KernelSpec:
        return KernelSpec(self.family, eps, self.dim, self.tau, self.table)


def cosh_green(eps: float) -> KernelSpec:
    return KernelSpec(Family.COSH_GREEN, eps)


def periodic_green(eps: float) -> KernelSpec:
    return KernelSpec(Family.PERIODIC_GREEN, eps)


def basic_matern(eps: float) -> KernelSpec:
    return KernelSpec(Family.BASIC_MATERN_1D, eps)


def radial_matern(eps: float, dim: int = 1) -> KernelSpec:
    return KernelSpec(Family.RADIAL_MATERN, eps, dim)


def from_tag(tag: str, eps: float, dim: int = 1) -> KernelSpec:
    try:
        fam = TAGS[tag]
    except KeyError:
        raise ValueError(f"unknown kernel tag {tag!r}; expected one of {sorted(TAGS)}") from None
    return KernelSpec(fam, eps, dim if fam is Family.RADIAL_MATERN else 1)


def _log_cosh_plus(a, c):
    """log(cosh a + c sinh a) for a >= 0, c >= 0, without overflow."""
    return a - _LOG2 + np.log((1.0 + np.exp(-2.0 * a)) - c * np.expm1(-2.0 * a))


def _green(family: Family, eps: float, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    if family is Family.BASIC_MATERN_1D:
        return np.exp(-eps * np.abs(x - z)) / (2.0 * eps)
    m = np.minimum(x, z)
    M = np.maximum(x, z)
    if family is Family.COSH_GREEN:
        c = 0.0
        log_den = math.log(eps) + eps - _LOG2 + math.log(-math.expm1(-2.0 * eps))
    else:
        alpha = 1.0 + math.cos(eps)
        c = alpha / eps
        e2 = math.exp(-2.0 * eps)
        log_den = eps - _LOG2 + math.log(
            2.0 * alpha * (1.0 + e2) - (eps + alpha * alpha / eps) * math.expm1(-2.0 * eps)
        )
    return np.exp(_log_cosh_plus(eps * m, c) + _log_cosh_plus(eps * (1.0 - M), c) - log_den)


def _block(spec: KernelSpec, P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    fam = spec.family
    if fam is Family.TABULATED_MERCER:
        return spec.table(P, Q)
    if fam is Family.RADIAL_MATERN:
        r = spec.eps * cdist(P, Q)
        return (1.0 + r) * np.exp(-r)
    return _green(fam, spec.eps, P[:, 0][:, None], Q[:, 0][None, :])


def _coords(spec: KernelSpec, X) -> np.ndarray:
    pts = as_points(X).points
    if pts.shape[1] != spec.dim:
        raise ValueError(f"points have dimension {pts.shape[1]}, kernel expects {spec.dim}")
    if spec.family in GREEN_1D and pts.size and (pts.min() < 0.0 or pts.max() > 1.0):
        raise ValueError(f"{spec.family.value} is defined on [0, 1] only")
    return pts


def gram(spec: KernelSpec, P, Q) -> np.ndarray:
    """Kernel values ``k(p_i, q_j)`` for raw coordinate arrays or PointSets."""
    P, Q = _coords(spec, P), _coords(spec, Q)
    if len(P) <= _CHUNK:
        return _block(spec, P, Q)
    out = np.empty((len(P), len(Q)))
    for i in range(0, len(P), _CHUNK):
        out[i:i + _CHUNK] = _block(spec, P[i:i + _CHUNK], Q)
    return out


def eval_kernel(spec: KernelSpec, x, z) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    z = np.atleast_1d(np.asarray(z, dtype=float)).reshape(1, -1)
    return float(gram(spec, x, z)[0, 0])


def kernel_matrix(spec: KernelSpec, X: PointSet) -> np.ndarray:
    """Symmetric kernel matrix on pairwise distinct nodes."""
    X = as_points(X)
    if X.has_duplicates():
        raise ValueError("kernel matrix requires pairwise distinct points")
    A = gram(spec, X.points, X.points)
    return 0.5 * (A + A.T)


def cross_matrix(spec: KernelSpec, Xeval, X) -> np.ndarray:
    """``B[i, j] = k(e_i, x_j)``."""
    return gram(spec, Xeval, X)


def diagonal(spec: KernelSpec, X) -> np.ndarray:
    """``k(x, x)`` for every point."""
    P = _coords(spec, X)
    fam = spec.family
    if fam is Family.RADIAL_MATERN:
        return np.ones(len(P))
    if fam is Family.BASIC_MATERN_1D:
        return np.full(len(P), 1.0 / (2.0 * spec.eps))
    if fam in GREEN_1D:
        return _green(fam, spec.eps, P[:, 0], P[:, 0])
    return np.array([_block(spec, p[None], p[None])[0, 0] for p in P])
