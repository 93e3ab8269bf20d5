import functools

import numpy as np

from shapelab.interpolation import fit, rmse_error
from shapelab.kernels import from_tag
from shapelab.points import midpoint_grid_1d
from shapelab.targets import get_target

M_EVAL = 10_000
LADDER = (100, 196, 387, 762, 1500)

_ACCEPTANCE_LINES = []


def record_criterion(label: str, ok: bool, detail: str) -> None:
    _ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def _eval_grid():
    return midpoint_grid_1d(M_EVAL)


@functools.lru_cache(maxsize=None)
def ladder_fit(tag: str, eps: float, n: int, target: str):
    """Fit ``target`` with kernel ``tag`` on the n-point midpoint grid; cached per session."""
    f = get_target(target)
    X = midpoint_grid_1d(n)
    s = fit(from_tag(tag, eps), X, f(X.points[:, 0]))
    return s, rmse_error(s, f, grid=_eval_grid())


def final_rate(tag: str, eps: float, target: str, pair=(762, 1500)) -> float:
    (_, e0), (_, e1) = (ladder_fit(tag, eps, n, target) for n in pair)
    return float(np.log(e0 / e1) / np.log(pair[1] / pair[0]))
