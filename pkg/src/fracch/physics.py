"""Potential and mobility laws with their convex-concave splitting.

Naming convention used throughout the package: the *explicit* part of a
potential is the concave (expansive) contribution evaluated at the previous
time step, the *implicit* part is the convex (contractive) contribution
evaluated at the new step.  For the Landau potential c(1-x^2)^2 the split is
implicit c(x^4+1), explicit -2c x^2.  The logarithmic Flory-Huggins
potential is regularized before use: its convex part has the second
derivative clamped at +-(1-delta) and is extended quadratically outside the
band, which keeps it C^2 on all of R and identical to the original inside
[-1+delta, 1-delta].

Degenerate mobilities m(x) = M |1-x^2|^nu are clamped to zero outside
[-1, 1]; with a positive regularization width delta they are instead held
constant at their value at +-(1-delta), making them strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class Landau:
    """Double-well potential c (1 - x^2)^2 with zeros at +-1."""

    c: float = 0.25

    def __post_init__(self):
        if self.c <= 0.0:
            raise ParameterError(f"Landau coefficient must be positive: {self.c}")

    def value(self, x):
        return self.c * (1.0 - np.asarray(x) ** 2) ** 2

    def dvalue(self, x):
        x = np.asarray(x)
        return 4.0 * self.c * (x ** 3 - x)

    def explicit_dvalue(self, x):
        return -4.0 * self.c * np.asarray(x)

    def implicit_dvalue(self, x):
        return 4.0 * self.c * np.asarray(x) ** 3

    def implicit_d2value(self, x):
        return 12.0 * self.c * np.asarray(x) ** 2

    @property
    def semiconvexity_bound(self) -> float:
        """lambda with Psi'' >= -lambda everywhere."""
        return 4.0 * self.c


@dataclass(frozen=True)
class FloryHuggins:
    """Regularized logarithmic potential.

    Psi(x) = theta/2 [(1+x)ln(1+x) + (1-x)ln(1-x)] + theta0/2 (1-x^2),
    with the convex logarithmic part extended quadratically outside
    [-1+delta_reg, 1-delta_reg] so the law is total on R.
    """

    theta: float
    theta0: float
    delta_reg: float = 0.1

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ParameterError(f"theta must be positive: {self.theta}")
        if self.theta0 <= self.theta:
            raise ParameterError("theta0 must exceed theta")
        if not (0.0 < self.delta_reg < 1.0):
            raise ParameterError(
                f"delta_reg must be in (0, 1): {self.delta_reg}")

    # -- convex (logarithmic) part and its quadratic extension -------------

    def _edge(self) -> float:
        return 1.0 - self.delta_reg

    def _convex(self, x):
        th = self.theta
        return 0.5 * th * ((1.0 + x) * np.log1p(x) + (1.0 - x) * np.log1p(-x))

    def _dconvex(self, x):
        return self.theta * np.arctanh(x)

    def _d2convex_edge(self) -> float:
        e = self._edge()
        return self.theta / (1.0 - e * e)

    def _convex_ext(self, x):
        """Convex part with C^2 quadratic extension beyond the clamp band."""
        x = np.asarray(x, dtype=float)
        e = self._edge()
        xc = np.clip(x, -e, e)
        excess = x - xc
        v0 = self._convex(xc)
        v1 = self._dconvex(xc)
        v2 = self._d2convex_edge()
        return v0 + v1 * excess + 0.5 * v2 * excess ** 2

    def _dconvex_ext(self, x):
        x = np.asarray(x, dtype=float)
        e = self._edge()
        xc = np.clip(x, -e, e)
        return self._dconvex(xc) + self._d2convex_edge() * (x - xc)

    def _d2convex_ext(self, x):
        x = np.asarray(x, dtype=float)
        e = self._edge()
        xc = np.clip(x, -e, e)
        return self.theta / (1.0 - xc * xc)

    # -- public law --------------------------------------------------------

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self._convex_ext(x) + 0.5 * self.theta0 * (1.0 - x * x)

    def dvalue(self, x):
        x = np.asarray(x, dtype=float)
        return self._dconvex_ext(x) - self.theta0 * x

    def explicit_dvalue(self, x):
        return -self.theta0 * np.asarray(x, dtype=float)

    def implicit_dvalue(self, x):
        return self._dconvex_ext(x)

    def implicit_d2value(self, x):
        return self._d2convex_ext(x)

    @property
    def semiconvexity_bound(self) -> float:
        return self.theta0


PotentialLaw = Landau | FloryHuggins


def psi(p: PotentialLaw, x):
    """Potential value Psi(x)."""
    return p.value(x)


def psi_split(p: PotentialLaw, x_prev, x_curr):
    """(explicit part Psi_1'(x_prev), implicit part Psi_2'(x_curr))."""
    return p.explicit_dvalue(x_prev), p.implicit_dvalue(x_curr)


def psi2_second(p: PotentialLaw, x):
    """Second derivative of the implicit (convex) part; >= 0 everywhere."""
    return p.implicit_d2value(x)


@dataclass(frozen=True)
class ConstantMobility:
    M: float = 1.0

    def __post_init__(self):
        if self.M <= 0.0:
            raise ParameterError(f"mobility constant must be positive: {self.M}")

    def value(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.M)

    def dvalue(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    @property
    def is_constant(self) -> bool:
        return True


@dataclass(frozen=True)
class DegenerateMobility:
    """m(x) = M |1-x^2|^nu on [-1, 1], zero outside; optional clamping.

    With delta_reg > 0 the argument is clamped to [-1+delta_reg,
    1-delta_reg], holding the mobility at its band-edge value outside, so
    the minimum over R is strictly positive.
    """

    M: float = 1.0
    nu: float = 2.0
    delta_reg: float = 0.0

    def __post_init__(self):
        if self.M <= 0.0:
            raise ParameterError(f"mobility constant must be positive: {self.M}")
        if self.nu < 1.0:
            raise ParameterError(f"mobility exponent must be >= 1: {self.nu}")
        if not (0.0 <= self.delta_reg < 1.0):
            raise ParameterError(
                f"delta_reg must be in [0, 1): {self.delta_reg}")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.delta_reg > 0.0:
            e = 1.0 - self.delta_reg
            xc = np.clip(x, -e, e)
            return self.M * (1.0 - xc * xc) ** self.nu
        inside = np.abs(x) <= 1.0
        xc = np.clip(x, -1.0, 1.0)
        return np.where(inside, self.M * (1.0 - xc * xc) ** self.nu, 0.0)

    def dvalue(self, x):
        x = np.asarray(x, dtype=float)
        e = 1.0 - self.delta_reg
        inside = np.abs(x) < e if self.delta_reg > 0.0 else np.abs(x) <= 1.0
        xc = np.clip(x, -1.0, 1.0)
        deriv = -2.0 * self.M * self.nu * xc * (1.0 - xc * xc) ** (self.nu - 1.0)
        return np.where(inside, deriv, 0.0)

    @property
    def is_constant(self) -> bool:
        return False


MobilityLaw = ConstantMobility | DegenerateMobility


def mobility(m: MobilityLaw, x):
    """Mobility value m(x) (scalar in, scalar out for scalar input)."""
    out = m.value(np.asarray(x, dtype=float))
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def mobility_deriv(m: MobilityLaw, x):
    out = m.dvalue(np.asarray(x, dtype=float))
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out
