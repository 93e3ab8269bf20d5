"""P-greedy point selection with an incrementally built Newton basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from shapelab._io import write_csv
from shapelab.kernels import KernelSpec, cross_matrix, diagonal, kernel_matrix
from shapelab.points import PointSet, as_points

REORTH_EVERY = 200
STOP_RTOL = 1e-14


def power_function_sq(spec: KernelSpec, X: PointSet, x, full_output: bool = False):
    """Squared power function ``k(x, x) - b(x)^T A_X^{-1} b(x)``, clipped at 0.

    ``x`` is a single point (scalar or length-``d`` vector), or a PointSet /
    ``(n, d)`` array for many points at once. Uses a Cholesky factor of
    ``A_X``; if that fails the truncated eigen pseudo-inverse is used instead
    and, with ``full_output``, the second return value is True.
    """
    single = not isinstance(x, PointSet) and np.ndim(x) <= 1
    pts = np.asarray(x, dtype=float).reshape(1, -1) if single else as_points(x).points
    kxx = diagonal(spec, pts)
    pinv = False
    if X is None or len(X) == 0:
        p2 = kxx
    else:
        A = kernel_matrix(spec, X)
        B = cross_matrix(spec, X, pts)
        try:
            L = np.linalg.cholesky(A)
            W = scipy.linalg.solve_triangular(L, B, lower=True)
            p2 = kxx - np.sum(W * W, axis=0)
        except np.linalg.LinAlgError:
            pinv = True
            w, V = np.linalg.eigh(A)
            keep = w > 1e-12 * w[-1]
            W = (V[:, keep].T @ B) / np.sqrt(w[keep])[:, None]
            p2 = kxx - np.sum(W * W, axis=0)
    p2 = np.maximum(p2, 0.0)
    out = float(p2[0]) if single else p2
    return (out, pinv) if full_output else out


@dataclass(frozen=True, eq=False)
class GreedyRun:
    """Result of a P-greedy run.

    ``power_max_trace[k]`` is the largest squared power function over the
    candidates once ``k + 1`` points are selected. ``snapshots`` maps a
    selection count to the full squared power function at that moment.
    """

    selected: PointSet
    indices: np.ndarray
    power_max_trace: np.ndarray
    stopped_early: bool
    snapshots: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        d = self.selected.dim
        header = ["order", "index"] + [f"x{i + 1}" for i in range(d)] + ["power_max_sq"]
        rows = [[k + 1, int(i)] + list(p) + [t] for k, (i, p, t) in
                enumerate(zip(self.indices, self.selected.points, self.power_max_trace))]
        write_csv(path, header, rows)


def _newton_basis(spec: KernelSpec, cand: np.ndarray, chosen: list) -> np.ndarray | None:
    A = kernel_matrix(spec, cand[chosen])
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    B = cross_matrix(spec, cand, cand[chosen])
    return scipy.linalg.solve_triangular(L, B.T, lower=True).T


def p_greedy(spec: KernelSpec, candidates: PointSet, m: int, record_every: int | None = None) -> GreedyRun:
    """Select ``m`` candidates, each maximising the current power function.

    Ties go to the lowest candidate index, so the first point is the
    lowest-index maximiser of ``k(x, x)``. The Newton basis is rebuilt from a
    fresh Cholesky factor every 200 selections. Selection stops early, with
    ``stopped_early`` set, once the power function is numerically zero.
    """
    candidates = as_points(candidates)
    N = len(candidates)
    if m > N:
        raise ValueError(f"cannot select {m} points from {N} candidates")
    cand = candidates.points
    diag = diagonal(spec, candidates)
    V = np.zeros((N, m))
    p2 = diag.copy()
    chosen: list[int] = []
    trace = []
    snaps = {}
    stop_level = STOP_RTOL * diag.max()
    stopped = False
    for k in range(m):
        i = int(np.argmax(p2))
        if p2[i] <= stop_level:
            stopped = True
            break
        col = cross_matrix(spec, cand, cand[i:i + 1])[:, 0] - V[:, :k] @ V[i, :k]
        col /= np.sqrt(p2[i])
        V[:, k] = col
        chosen.append(i)
        if (k + 1) % REORTH_EVERY == 0:
            fresh = _newton_basis(spec, cand, chosen)
            if fresh is not None:
                V[:, :k + 1] = fresh
                p2 = diag - np.sum(V[:, :k + 1] ** 2, axis=1)
            else:
                p2 = p2 - col * col
        else:
            p2 = p2 - col * col
        p2[chosen] = 0.0
        np.maximum(p2, 0.0, out=p2)
        trace.append(float(p2.max()))
        if record_every and (k + 1) % record_every == 0:
            snaps[k + 1] = p2.copy()
    idx = np.array(chosen, dtype=int)
    return GreedyRun(candidates.subset(idx), idx, np.array(trace), stopped, snaps)
