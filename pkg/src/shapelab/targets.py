"""Target functions of the 1D experiments, with exact first derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Target:
    name: str
    func: Callable
    deriv: Callable | None = None

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def neumann_target() -> Target:
    """``1 + x^(3/2) - (3/4) x^2``: zero slope at both ends."""
    return Target(
        "f1",
        lambda x: 1.0 + x**1.5 - 0.75 * x**2,
        lambda x: 1.5 * np.sqrt(x) - 1.5 * x,
    )


def robin_target(eps_bar: float = 1.0) -> Target:
    """``x^(3/2) + (1/(2 eps_bar + 4) - 1) x^2``.

    Vanishes with its slope at 0 and satisfies ``u'(1) + eps_bar u(1) = 0``.
    """
    c = 1.0 / (2.0 * eps_bar + 4.0) - 1.0
    return Target("f2", lambda x: x**1.5 + c * x**2, lambda x: 1.5 * np.sqrt(x) + 2.0 * c * x)


def rough_target(center: float = 0.5, power: float = 0.3) -> Target:
    """``|x - center|^power``; lies in H^s exactly for s < power + 1/2."""
    return Target("rough", lambda x: np.abs(x - center) ** power)


TARGETS = {
    "f1": neumann_target,
    "f2": robin_target,
    "rough": rough_target,
}


def get_target(name: str) -> Target:
    try:
        return TARGETS[name]()
    except KeyError:
        raise ValueError(f"unknown target {name!r}; expected one of {sorted(TARGETS)}") from None
