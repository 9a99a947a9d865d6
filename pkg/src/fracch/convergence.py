"""Self-checks of the time quadrature against analytic fractional
derivatives of monomials t^p (known in closed form via the Gamma
function)."""

from __future__ import annotations

import math

import numpy as np

from .grid import StructuredGrid, constant_field
from .quadrature import HistoryBuffer, caputo_residual, gl_weights


def exact_caputo_power(alpha: float, power: int, t: float) -> float:
    """Caputo derivative of t^power: Gamma(p+1)/Gamma(p+1-alpha) t^(p-alpha)."""
    return math.gamma(power + 1) / math.gamma(power + 1 - alpha) \
        * t ** (power - alpha)


def caputo_power_error(alpha: float, power: int, dt: float,
                       t_end: float = 1.0) -> float:
    """|discrete - exact| Caputo derivative of t^power at t = t_end."""
    n = round(t_end / dt)
    grid = StructuredGrid([1])
    w = gl_weights(alpha, n, dt)
    history = HistoryBuffer(constant_field(grid, 0.0), n)
    for j in range(1, n):
        history.append(constant_field(grid, (j * dt) ** power))
    current = constant_field(grid, t_end ** power)
    approx = caputo_residual(history, current, w).values[0]
    return abs(approx - exact_caputo_power(alpha, power, t_end))
