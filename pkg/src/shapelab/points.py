"""Point sets on axis-aligned boxes and their fill/separation geometry."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from shapelab._io import format_float


@dataclass(frozen=True, eq=False)
class PointSet:
    """An ordered set of points inside a closed box ``[lower, upper]``.

    ``points`` is stored as an ``(n, d)`` float array. The box defaults to
    the unit cube of matching dimension.
    """

    points: np.ndarray
    lower: np.ndarray = field(default=None)
    upper: np.ndarray = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be a 1d or 2d array, got shape {pts.shape}")
        d = pts.shape[1]
        lo = np.zeros(d) if self.lower is None else np.broadcast_to(np.asarray(self.lower, float), (d,)).copy()
        hi = np.ones(d) if self.upper is None else np.broadcast_to(np.asarray(self.upper, float), (d,)).copy()
        if np.any(hi <= lo):
            raise ValueError("domain upper bound must exceed lower bound")
        if pts.size and (np.any(pts < lo) or np.any(pts > hi)):
            raise ValueError("points must lie inside the closed domain")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, indices) -> PointSet:
        return PointSet(self.points[np.asarray(indices, dtype=int)], self.lower, self.upper)

    def has_duplicates(self) -> bool:
        if len(self) < 2:
            return False
        return len(np.unique(self.points, axis=0)) < len(self)

    def to_csv(self, path) -> None:
        """Write one point per row, ``d`` columns, 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i + 1}" for i in range(self.dim)])
            for p in self.points:
                w.writerow([format_float(v) for v in p])

    @classmethod
    def from_csv(cls, path, lower=None, upper=None) -> PointSet:
        with open(Path(path), newline="") as fh:
            rows = list(csv.reader(fh))
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        return cls(data.reshape(len(rows) - 1, len(rows[0])), lower, upper)


def as_points(X) -> PointSet:
    """Wrap raw coordinates in a PointSet bounded by their own bounding box."""
    if isinstance(X, PointSet):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    lo = arr.min(axis=0) if arr.size else np.zeros(arr.shape[1])
    hi = arr.max(axis=0) if arr.size else np.ones(arr.shape[1])
    return PointSet(arr, lo, np.where(hi > lo, hi, lo + 1.0))


def midpoint_grid_1d(n: int) -> PointSet:
    """Equally spaced cell midpoints ``(2i - 1) / (2n)``, ``i = 1..n``, on [0, 1]."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    return PointSet((2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n))


def grid_2d(m: int) -> PointSet:
    """Cell-centred ``m x m`` grid on the unit square, first coordinate outermost."""
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    t = midpoint_grid_1d(int(m)).points[:, 0]
    a, b = np.meshgrid(t, t, indexing="ij")
    return PointSet(np.column_stack([a.ravel(), b.ravel()]))


def fill_distance(X: PointSet, resolution: int = 1000) -> float:
    """Largest distance from a domain point to its nearest point of ``X``.

    Exact in 1D. In higher dimensions the supremum is taken over a uniform
    candidate grid with ``resolution`` nodes per axis (box corners included).
    """
    if len(X) == 0:
        raise ValueError("fill distance of an empty point set is undefined")
    if X.dim == 1:
        p = np.sort(X.points[:, 0])
        gaps = [p[0] - X.lower[0], X.upper[0] - p[-1]]
        if len(p) > 1:
            gaps.append(0.5 * np.max(np.diff(p)))
        return float(max(gaps))
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(X.lower, X.upper)]
    tree = cKDTree(X.points)
    best = 0.0
    # chunk over the first axis to bound memory
    rest = np.meshgrid(*axes[1:], indexing="ij")
    rest = np.column_stack([r.ravel() for r in rest])
    for a in axes[0]:
        cand = np.column_stack([np.full(len(rest), a), rest])
        dist, _ = tree.query(cand)
        best = max(best, float(dist.max()))
    return best


def separation_distance(X: PointSet) -> float:
    """Half the smallest pairwise distance."""
    if len(X) < 2:
        raise ValueError("separation distance needs at least two points")
    dist, _ = cKDTree(X.points).query(X.points, k=2)
    q = 0.5 * float(dist[:, 1].min())
    if q == 0.0:
        raise ValueError("point set contains duplicate points")
    return q


def uniformity(X: PointSet, resolution: int = 1000) -> float:
    return fill_distance(X, resolution) / separation_distance(X)
