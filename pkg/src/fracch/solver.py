"""Time stepping for the fractional Cahn-Hilliard family of models.

Each step solves the coupled block system in the stacked unknown
u = (phi_n, mu_n):

    b_0 dt^-a M (phi_n - phi_0) + K_m(phi_n) mu_n  = M f - M tail + sources
    M mu_n - eps^2 K phi_n - L(Psi_2'(phi_n))      = L(Psi_1'(phi_{n-1})) + ...

where M and K are the consistent Q1 mass and stiffness matrices,
K_m the mobility-weighted stiffness, L(g) the load vector of g evaluated
on the interpolant, and tail the explicit part of the convolution
quadrature.  Newton treats the mobility inside K_m as frozen per
iteration (quasi-Newton); the converged state satisfies the fully coupled
system.  Variants add terms:

  * Ohta-Kawasaki: implicit reaction M_c kappa (phi - mean) in the phi row
    (constant mobility only).
  * Tumor: explicit chemotaxis -chi sigma_{n-1} in the mu row, lagged
    proliferation and implicit apoptosis in the phi row, then one linear
    backward-Euler solve for the nutrient sigma_n.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import ModelError, ParameterError, SolverError
from .grid import (ScalarField, StructuredGrid, assemble_gradient_coupling,
                   assemble_mass, interpolate_at_gauss,
                   assemble_stiffness, assemble_weighted_mass,
                   assemble_weighted_stiffness, nonlinear_load)
from .linalg import NewtonResult, bicgstab_solve, lu_solve_factory, newton_solve
from .observables import ObservableSet, TimeSeries, energy, mass, roughness
from .physics import ConstantMobility, MobilityLaw, PotentialLaw
from .quadrature import GLWeights, HistoryBuffer, gl_weights, history_tail


@dataclass(frozen=True)
class CahnHilliard:
    """Plain time-fractional Cahn-Hilliard variant."""


@dataclass(frozen=True)
class OhtaKawasaki:
    """Long-range variant with reaction -M kappa (phi - mean)."""

    kappa: float

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ParameterError(f"kappa must be positive: {self.kappa}")


@dataclass(frozen=True)
class Tumor:
    """Coupled tumor/nutrient variant with subdiffusive phi."""

    proliferation: float       # lambda
    apoptosis: float           # delta
    chemotaxis: float          # chi
    diffusivity: float         # D
    clip_proliferation: bool = False

    def __post_init__(self):
        if self.proliferation < 0.0 or self.apoptosis < 0.0 \
                or self.chemotaxis < 0.0:
            raise ParameterError("tumor rate parameters must be nonnegative")
        if self.diffusivity <= 0.0:
            raise ParameterError(
                f"nutrient diffusivity must be positive: {self.diffusivity}")


ModelVariant = CahnHilliard | OhtaKawasaki | Tumor


@dataclass
class ModelSpec:
    """Full problem description for one simulation."""

    variant: ModelVariant
    alpha: float
    epsilon: float
    potential: PotentialLaw
    mobility: MobilityLaw
    grid: StructuredGrid
    dt: float
    n_steps: int
    initial_phi: ScalarField
    initial_sigma: ScalarField | None = None
    source: ScalarField | None = None
    newton_tol: float = 1e-8
    newton_max_iter: int = 50
    linear_solver: str = "bicgstab"   # or "direct"

    def validate(self) -> None:
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(
                f"fractional order must be in (0, 1], got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ParameterError(f"epsilon must be positive: {self.epsilon}")
        if self.dt <= 0.0:
            raise ParameterError(f"dt must be positive: {self.dt}")
        if self.n_steps < 0:
            raise ParameterError(f"n_steps must be >= 0: {self.n_steps}")
        if self.initial_phi.grid != self.grid:
            raise ParameterError("initial_phi lives on a different grid")
        if isinstance(self.variant, Tumor):
            if self.initial_sigma is None:
                raise ParameterError("tumor variant requires initial_sigma")
            if self.initial_sigma.grid != self.grid:
                raise ParameterError("initial_sigma lives on a different grid")
        elif self.initial_sigma is not None:
            raise ParameterError(
                "initial_sigma is only meaningful for the tumor variant")
        if isinstance(self.variant, OhtaKawasaki) \
                and not isinstance(self.mobility, ConstantMobility):
            raise ParameterError(
                "the Ohta-Kawasaki variant requires a constant mobility")
        if self.linear_solver not in ("bicgstab", "direct"):
            raise ParameterError(
                f"unknown linear solver {self.linear_solver!r}")
        if self.source is not None and self.source.grid != self.grid:
            raise ParameterError("source field lives on a different grid")


@dataclass
class StepResult:
    phi: ScalarField
    mu: ScalarField
    sigma: ScalarField | None
    newton_iters: int
    residual_norm: float
    warnings: list[str] = field(default_factory=list)


@dataclass
class SimulationOutput:
    spec: ModelSpec
    series: dict[str, TimeSeries]
    snapshots: dict[int, dict[str, ScalarField]]
    newton_iters: list[int]
    residual_norms: list[float]
    warnings: list[str]
    wall_time: float


class Stepper:
    """Holds per-run assembled state and advances one step at a time."""

    def __init__(self, spec: ModelSpec, weights: GLWeights | None = None):
        spec.validate()
        self.spec = spec
        g = spec.grid
        self.M = assemble_mass(g)
        self.K = assemble_stiffness(g)
        self.weights = weights if weights is not None else gl_weights(
            spec.alpha, max(spec.n_steps, 1), spec.dt)
        self.history = HistoryBuffer(spec.initial_phi, spec.n_steps)
        self.phi = spec.initial_phi.copy()
        self.mu = self._initial_mu()
        self.sigma = (spec.initial_sigma.copy()
                      if spec.initial_sigma is not None else None)
        self.source_vec = (self.M @ spec.source.values
                           if spec.source is not None
                           else np.zeros(g.n_nodes))
        if isinstance(spec.variant, OhtaKawasaki):
            self.mean_mass = mass(spec.initial_phi, self.M) / g.volume
        self._direct = spec.linear_solver == "direct"
        # cached sparse-LU factorization, reused across Newton iterations
        # and across steps while it keeps Newton fast (the Jacobian drifts
        # slowly during coarsening); invalidated on slow or failed solves
        self._lu = None
        self._Km_const = (spec.mobility.M * self.K
                          if spec.mobility.is_constant else None)

    def _initial_mu(self) -> ScalarField:
        # consistent mu_0: M mu = eps^2 K phi + L(Psi'(phi))
        s = self.spec
        rhs = s.epsilon ** 2 * (self.K @ s.initial_phi.values) \
            + nonlinear_load(s.grid, s.initial_phi.values, s.potential.dvalue)
        from .linalg import cg_solve
        return ScalarField(s.grid, cg_solve(self.M, rhs, tol=1e-12))

    # -- residual / Jacobian of the coupled (phi, mu) system ---------------

    def _phase_system(self, rhs_phi_extra, rhs_mu_extra, diag_phi_extra,
                      mobility=None):
        """Closures for the block residual and quasi-Newton Jacobian.

        rhs_phi_extra / rhs_mu_extra are fixed vectors added to the
        respective residual rows; diag_phi_extra is a scalar multiple of
        M added to the (phi, phi) Jacobian block (and the residual).
        """
        s = self.spec
        mob = s.mobility if mobility is None else mobility
        Km_const = self._Km_const if mobility is None else None
        n = s.grid.n_nodes
        a = self.weights.scale * self.weights.weights[0]
        phi0 = self.history.initial
        tail = history_tail(self.history, self.weights).values
        M, K = self.M, self.K
        Mtail = M @ tail
        expl = nonlinear_load(s.grid, self.phi.values,
                              s.potential.explicit_dvalue)

        def weighted_K(phi):
            if Km_const is not None:
                return Km_const
            return assemble_weighted_stiffness(
                s.grid, ScalarField(s.grid, phi), mob)

        def res(u):
            phi, mu = u[:n], u[n:]
            r1 = a * (M @ (phi - phi0)) + weighted_K(phi) @ mu + Mtail \
                - self.source_vec + diag_phi_extra * (M @ phi) \
                + rhs_phi_extra
            r2 = M @ mu - s.epsilon ** 2 * (K @ phi) \
                - nonlinear_load(s.grid, phi, s.potential.implicit_dvalue) \
                - expl + rhs_mu_extra
            return np.concatenate([r1, r2])

        def jac(u):
            phi, mu = u[:n], u[n:]
            W = assemble_weighted_mass(s.grid, phi,
                                       s.potential.implicit_d2value)
            A11 = (a + diag_phi_extra) * M
            if Km_const is None:
                # exact linearization of phi -> K_m(phi) mu; without it the
                # line search can stall near degenerate mobility values
                dm_gp = mob.dvalue(interpolate_at_gauss(s.grid, phi))
                A11 = A11 + assemble_gradient_coupling(s.grid, dm_gp, mu)
            return sp.bmat([[A11, weighted_K(phi)],
                            [-s.epsilon ** 2 * K - W, M]], format="csr")

        return res, jac

    def _solve_phase(self, rhs_phi_extra, rhs_mu_extra, diag_phi_extra):
        s = self.spec
        res, jac = self._phase_system(rhs_phi_extra, rhs_mu_extra,
                                      diag_phi_extra)
        u0 = np.concatenate([self.phi.values, self.mu.values])
        if self._direct:
            try:
                result = self._newton_direct(res, jac, u0)
            except SolverError:
                if s.mobility.is_constant:
                    raise
                result = self._solve_phase_continuation(
                    rhs_phi_extra, rhs_mu_extra, diag_phi_extra, res, jac, u0)
        else:
            def linsolve(A, b):
                # Krylov breakdown near machine-zero right-hand sides is
                # benign late in a Newton solve; fall back to sparse LU.
                try:
                    return bicgstab_solve(A, b, tol=1e-10)
                except SolverError:
                    return lu_solve_factory(A)(b)
            result = newton_solve(res, jac, u0, tol=s.newton_tol,
                                  max_iter=s.newton_max_iter,
                                  linear_solver=linsolve)
        n = s.grid.n_nodes
        return (ScalarField(s.grid, result.x[:n]),
                ScalarField(s.grid, result.x[n:]), result)

    # clamp widths for the mobility-continuation fallback, widest first
    _CLAMP_LADDER = (0.5, 0.2, 0.1, 0.05, 0.02, 0.01,
                     3e-3, 1e-3, 3e-4, 1e-4, 1e-5)

    def _solve_phase_continuation(self, rhs_phi_extra, rhs_mu_extra,
                                  diag_phi_extra, res, jac, u0):
        """Globalized retry for steps with a near-degenerate mobility.

        Where the mobility vanishes the Jacobian loses rank and a plain
        damped Newton iteration can stall in a residual basin far from
        the actual solution.  Clamping the mobility argument away from
        its zeros restores a well-conditioned problem whose solution is
        easy to reach; releasing the clamp in stages and warm-starting
        each solve tracks that solution back to the original system.
        """
        s = self.spec
        base = getattr(s.mobility, "delta_reg", 0.0)
        x = np.array(u0, dtype=float)
        for width in self._CLAMP_LADDER:
            if width <= base:
                break
            mob = replace(s.mobility, delta_reg=width)
            res_w, jac_w = self._phase_system(
                rhs_phi_extra, rhs_mu_extra, diag_phi_extra, mobility=mob)
            self._lu = None
            x = self._newton_direct(res_w, jac_w, x).x
        self._lu = None
        return self._newton_direct(res, jac, x)

    def _newton_direct(self, res, jac, u0):
        """Modified Newton with a cached, lazily refreshed LU factorization.

        The Jacobian changes slowly from step to step, so the previous
        factorization usually still contracts the residual; it is only
        reassembled and refactored when the line search rejects a step or
        the iteration drags.  Same convergence test and backtracking rule
        as :func:`fracch.linalg.newton_solve`.
        """
        s = self.spec
        x = np.array(u0, dtype=float)
        F = res(x)
        norm0 = float(np.linalg.norm(F))
        target = s.newton_tol * max(1.0, norm0)
        history = [norm0]
        if norm0 <= target:
            return NewtonResult(x, 0, norm0, history)

        last_fact = -1   # iteration whose iterate the cached LU belongs to
        slow = False     # poor contraction in the last accepted update
        # state-dependent mobility makes stale factorizations unreliable
        # (the (phi, phi) coupling block changes with every iterate), so
        # refresh eagerly there; constant mobility tolerates a long reuse
        refresh = 8 if self._Km_const is not None else 1
        it = 0
        while it < s.newton_max_iter:
            it += 1
            if self._lu is None or slow or it - last_fact >= refresh:
                self._lu = lu_solve_factory(jac(x))
                last_fact = it
                slow = False
            dx = self._lu(-F)
            norm_prev = history[-1]
            step_len = 1.0
            accepted = False
            for _ in range(31):
                x_try = x + step_len * dx
                F_try = res(x_try)
                norm_try = float(np.linalg.norm(F_try))
                if norm_try < norm_prev or norm_try <= target:
                    accepted = True
                    break
                step_len *= 0.5
            if not accepted:
                if last_fact == it:
                    raise SolverError(
                        f"Newton line search stalled at iteration {it} "
                        f"(residual {norm_prev:.3e})", iterations=it,
                        residual=norm_prev, residual_history=history)
                self._lu = None   # stale factorization; redo this iteration
                it -= 1
                continue
            x, F = x_try, F_try
            history.append(norm_try)
            slow = norm_try > 0.2 * norm_prev and last_fact != it
            if norm_try <= target:
                if it > 12:
                    self._lu = None
                return NewtonResult(x, it, norm_try, history)

        raise SolverError(
            f"Newton did not converge in {s.newton_max_iter} iterations "
            f"(residual {history[-1]:.3e})", iterations=s.newton_max_iter,
            residual=history[-1], residual_history=history)

    # -- variant steps ------------------------------------------------------

    def step(self) -> StepResult:
        v = self.spec.variant
        if isinstance(v, Tumor):
            out = self._step_tumor()
        elif isinstance(v, OhtaKawasaki):
            out = self._step_ok()
        else:
            out = self._step_ch()
        self.history.append(out.phi)
        self.phi, self.mu = out.phi, out.mu
        if out.sigma is not None:
            self.sigma = out.sigma
        return out

    def _step_ch(self) -> StepResult:
        zero = np.zeros(self.spec.grid.n_nodes)
        phi, mu, r = self._solve_phase(zero, zero, 0.0)
        return StepResult(phi, mu, None, r.iterations, r.residual_norm)

    def _step_ok(self) -> StepResult:
        s = self.spec
        v: OhtaKawasaki = s.variant
        Mc = s.mobility.M
        ones = np.ones(s.grid.n_nodes)
        # implicit reaction: + Mc kappa M phi on the left,
        # Mc kappa mean on the right (moved into the fixed part here)
        rhs_phi = -Mc * v.kappa * self.mean_mass * (self.M @ ones)
        zero = np.zeros(s.grid.n_nodes)
        phi, mu, r = self._solve_phase(rhs_phi, zero, Mc * v.kappa)
        return StepResult(phi, mu, None, r.iterations, r.residual_norm)

    def _step_tumor(self) -> StepResult:
        s = self.spec
        v: Tumor = s.variant
        phi_prev = self.phi.values
        sigma_prev = self.sigma.values
        p = np.clip(phi_prev, 0.0, 1.0) if v.clip_proliferation else phi_prev
        prolif = v.proliferation * p * (1.0 - p) * sigma_prev
        rhs_phi = -(self.M @ prolif)
        rhs_mu = v.chemotaxis * (self.M @ sigma_prev)
        phi, mu, r = self._solve_phase(rhs_phi, rhs_mu, v.apoptosis)

        # nutrient stage: backward Euler, one linear solve
        phi_n = phi.values
        pn = np.clip(phi_n, 0.0, 1.0) if v.clip_proliferation else phi_n
        react = assemble_weighted_mass(s.grid, pn * (1.0 - pn))
        A = (self.M / s.dt + v.diffusivity * self.K
             + v.proliferation * react).tocsr()
        b = self.M @ (sigma_prev / s.dt) \
            + v.diffusivity * v.chemotaxis * (self.K @ phi_n) \
            + v.apoptosis * (self.M @ phi_n)
        if self._direct:
            sigma_n = lu_solve_factory(A)(b)
        else:
            sigma_n = bicgstab_solve(A, b, tol=1e-10, x0=sigma_prev)
        warnings = []
        if np.any(sigma_n < 0.0):
            warnings.append(
                f"nutrient concentration negative (min {sigma_n.min():.3e})")
        return StepResult(phi, mu, ScalarField(s.grid, sigma_n),
                          r.iterations, r.residual_norm, warnings)


def step_ch(spec: ModelSpec, history: HistoryBuffer,
            w: GLWeights) -> StepResult:
    """One plain Cahn-Hilliard step from an externally managed history."""
    return _external_step(spec, history, w)


def step_ok(spec: ModelSpec, history: HistoryBuffer,
            w: GLWeights) -> StepResult:
    return _external_step(spec, history, w)


def step_tumor(spec: ModelSpec, history: HistoryBuffer, w: GLWeights,
               sigma_prev: ScalarField) -> StepResult:
    return _external_step(spec, history, w, sigma_prev)


def _external_step(spec, history, w, sigma_prev=None):
    stepper = Stepper(replace(spec, initial_phi=ScalarField(
        spec.grid, history.initial.copy())), weights=w)
    stepper.history = history
    stepper.phi = ScalarField(spec.grid,
                              history.snapshot(history.step_count).copy())
    if sigma_prev is not None:
        stepper.sigma = sigma_prev
    out = (stepper._step_tumor() if isinstance(spec.variant, Tumor)
           else stepper._step_ok() if isinstance(spec.variant, OhtaKawasaki)
           else stepper._step_ch())
    return out


def run(spec: ModelSpec, probes: ObservableSet | None = None
        ) -> SimulationOutput:
    """Run a full simulation, recording observables at every step."""
    if probes is None:
        probes = ObservableSet()
    probes.validate(spec.n_steps)
    t_start = time.perf_counter()
    stepper = Stepper(spec)
    M, K = stepper.M, stepper.K

    times = [0.0]
    rec: dict[str, list[float]] = {}
    if probes.mass:
        rec["mass"] = []
    if probes.energy:
        rec["energy"] = []
    if probes.roughness:
        rec["roughness"] = []
    if spec.initial_sigma is not None and probes.mass:
        rec["sigma_mass"] = []

    snapshots: dict[int, dict[str, ScalarField]] = {}
    warnings: list[str] = []
    newton_iters: list[int] = []
    residual_norms: list[float] = []

    def record(phi, sigma):
        if probes.mass:
            rec["mass"].append(mass(phi, M))
        if probes.energy:
            rec["energy"].append(
                energy(phi, spec.potential, spec.epsilon, M, K))
        if probes.roughness:
            rec["roughness"].append(roughness(phi, M))
        if sigma is not None and "sigma_mass" in rec:
            rec["sigma_mass"].append(mass(sigma, M))

    def snap(step, phi, mu, sigma):
        if step in probes.snapshot_steps:
            entry = {"phi": phi.copy(), "mu": mu.copy()}
            if sigma is not None:
                entry["sigma"] = sigma.copy()
            snapshots[step] = entry

    record(stepper.phi, stepper.sigma)
    snap(0, stepper.phi, stepper.mu, stepper.sigma)

    for n in range(1, spec.n_steps + 1):
        try:
            out = stepper.step()
        except SolverError as err:
            raise SolverError(
                f"step {n} failed: {err}", iterations=err.iterations,
                residual=err.residual,
                residual_history=err.residual_history) from err
        times.append(n * spec.dt)
        newton_iters.append(out.newton_iters)
        residual_norms.append(out.residual_norm)
        for wmsg in out.warnings:
            warnings.append(f"step {n}: {wmsg}")
        record(out.phi, out.sigma)
        snap(n, out.phi, out.mu, out.sigma)

    t_arr = np.asarray(times)
    series = {name: TimeSeries(t_arr, np.asarray(vals), name)
              for name, vals in rec.items()}
    return SimulationOutput(spec=spec, series=series, snapshots=snapshots,
                            newton_iters=newton_iters,
                            residual_norms=residual_norms,
                            warnings=warnings,
                            wall_time=time.perf_counter() - t_start)
