"""Grunwald-Letnikov convolution quadrature for the Caputo derivative.

The fractional time derivative of order ``alpha`` in (0, 1] is discretized
on a uniform time grid as

    (dt)^(-alpha) * sum_j b_j (phi_{n-j} - phi_0),

where the weights ``b_j`` are the signed generalized binomial coefficients
(-1)^j C(alpha, j), generated by the recursion b_0 = 1,
b_j = -((alpha - j + 1)/j) b_{j-1}.  For alpha = 1 the weights collapse to
[1, -1, 0, ...] and the sum is the backward difference quotient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError
from .grid import ScalarField


@dataclass(frozen=True)
class GLWeights:
    """Immutable quadrature weight sequence for one fractional order.

    ``weights[j]`` is b_j; ``scale`` is (dt)^(-alpha), precomputed because
    it multiplies every history sum.
    """

    alpha: float
    dt: float
    weights: np.ndarray

    @property
    def scale(self) -> float:
        return self.dt ** (-self.alpha)


def gl_weights(alpha: float, n_steps: int, dt: float = 1.0) -> GLWeights:
    """Weights b_0..b_{n_steps} of the first-order convolution quadrature.

    Raises ParameterError unless 0 < alpha <= 1, n_steps >= 1, dt > 0.
    """
    if not (0.0 < alpha <= 1.0):
        raise ParameterError(f"fractional order must be in (0, 1], got {alpha}")
    if n_steps < 1:
        raise ParameterError(f"n_steps must be >= 1, got {n_steps}")
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    b = np.empty(n_steps + 1)
    b[0] = 1.0
    for j in range(1, n_steps + 1):
        b[j] = -(alpha - j + 1.0) / j * b[j - 1]
    b.setflags(write=False)
    return GLWeights(alpha=alpha, dt=dt, weights=b)


class HistoryBuffer:
    """Full solution history phi_0, phi_1, ..., phi_{n-1} on one grid.

    Stores every past step (no truncation); the row buffer is preallocated
    to ``capacity`` steps.  Single writer: the time stepper appends, all
    readers see completed steps only.
    """

    def __init__(self, initial: ScalarField, capacity: int):
        if capacity < 0:
            raise ParameterError("capacity must be nonnegative")
        self.grid = initial.grid
        self.initial = np.array(initial.values, dtype=float)
        self._rows = np.empty((capacity, self.grid.n_nodes))
        self._count = 0

    @property
    def step_count(self) -> int:
        """Number of completed steps (snapshots stored past phi_0)."""
        return self._count

    def append(self, phi: ScalarField) -> None:
        if phi.grid is not self.grid and phi.grid != self.grid:
            raise ShapeError("snapshot grid does not match history grid")
        if self._count >= self._rows.shape[0]:
            self._rows = np.concatenate(
                [self._rows, np.empty_like(self._rows)], axis=0)
        self._rows[self._count] = phi.values
        self._count += 1

    def snapshot(self, j: int) -> np.ndarray:
        """phi_j for j in 0..step_count (j=0 is the initial state)."""
        if j == 0:
            return self.initial
        return self._rows[j - 1]

    def snapshots(self) -> np.ndarray:
        """View of rows phi_1..phi_{step_count}."""
        return self._rows[:self._count]


def _check_grids(history: HistoryBuffer, current: ScalarField) -> None:
    if current.values.shape[0] != history.initial.shape[0]:
        raise ShapeError("field and history live on different grids")


def history_tail(history: HistoryBuffer, w: GLWeights) -> ScalarField:
    """Explicit lag term (dt)^(-alpha) sum_{j=1}^{n-1} b_j (phi_{n-j} - phi_0).

    At step n = step_count + 1; the j=0 implicit term is excluded.  Empty
    for the first step.
    """
    n = history.step_count + 1
    if w.weights.shape[0] < n:
        raise ShapeError(
            f"need {n} weights for step {n}, have {w.weights.shape[0]}")
    tail = np.zeros_like(history.initial)
    if n >= 2:
        # phi_{n-j} for j = 1..n-1 is rows n-2, n-3, ..., 0 of the buffer
        rows = history.snapshots()[n - 2::-1]
        b = w.weights[1:n]
        tail = b @ rows - b.sum() * history.initial
    return ScalarField(history.grid, w.scale * tail)


def caputo_residual(history: HistoryBuffer, current: ScalarField,
                    w: GLWeights) -> ScalarField:
    """Discrete Caputo derivative at step n with phi_n = current.

    Exactly equal to (dt)^(-alpha) b_0 (current - phi_0) + history_tail:
    the same tail code path is reused so the split holds bit-for-bit.
    """
    _check_grids(history, current)
    tail = history_tail(history, w)
    lead = (w.scale * w.weights[0]) * (current.values - history.initial)
    return ScalarField(history.grid, lead + tail.values)
