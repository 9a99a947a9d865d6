"""Scalar diagnostics and power-law fitting for simulation output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ParameterError, ShapeError
from .grid import ScalarField, integrate
from .physics import PotentialLaw


@dataclass
class ObservableSet:
    """Which diagnostics to record during a run."""

    mass: bool = True
    energy: bool = True
    roughness: bool = True
    snapshot_steps: tuple[int, ...] = ()

    def validate(self, n_steps: int) -> None:
        for s in self.snapshot_steps:
            if not 0 <= s <= n_steps:
                raise ParameterError(
                    f"snapshot step {s} outside [0, {n_steps}]")


@dataclass
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.shape != self.values.shape:
            raise ShapeError("times and values must have equal length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ShapeError("times must be strictly increasing")


def mass(phi: ScalarField, M: sp.spmatrix) -> float:
    """Total mass 1^T M phi (exact for Q1 interpolants)."""
    if M.shape[1] != phi.values.shape[0]:
        raise ShapeError("mass matrix does not match field")
    return float((M @ phi.values).sum())


def energy(phi: ScalarField, p: PotentialLaw, epsilon: float,
           M: sp.spmatrix, K: sp.spmatrix) -> float:
    """Ginzburg-Landau energy: quadrature of Psi(phi_h) + eps^2/2 phi'K phi.

    The potential term uses the same 2-point Gauss rule as assembly so the
    discrete dissipation property of the splitting scheme is measured in
    the scheme's own norm.
    """
    if K.shape[1] != phi.values.shape[0]:
        raise ShapeError("stiffness matrix does not match field")
    pot = integrate(phi.grid, phi.values, p.value)
    grad = 0.5 * epsilon ** 2 * float(phi.values @ (K @ phi.values))
    return pot + grad


def roughness(phi: ScalarField, M: sp.spmatrix) -> float:
    """RMS deviation of phi from its spatial mean."""
    if M.shape[1] != phi.values.shape[0]:
        raise ShapeError("mass matrix does not match field")
    vol = phi.grid.volume
    mean = mass(phi, M) / vol
    d = phi.values - mean
    return float(np.sqrt(max(d @ (M @ d), 0.0) / vol))


def fit_power_law(series: TimeSeries, window: slice | None = None
                  ) -> tuple[float, float]:
    """Least-squares exponent of value ~ t^p over the window.

    Returns (exponent, r_squared).  The window defaults to the last half
    of the series.  Values must be strictly positive inside the window.
    """
    if window is None:
        window = slice(series.times.size // 2, None)
    t = series.times[window]
    v = series.values[window]
    if t.size < 3:
        raise ParameterError("power-law window needs at least 3 points")
    if np.any(v <= 0.0) or np.any(t <= 0.0):
        raise ParameterError("power-law fit requires positive times/values")
    logt, logv = np.log(t), np.log(v)
    slope, intercept = np.polyfit(logt, logv, 1)
    pred = slope * logt + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), r2
