"""Tests for the time stepper: fixed points, conservation, variants."""

import numpy as np
import pytest

from fracch.errors import ParameterError, SolverError
from fracch.grid import (ScalarField, StructuredGrid, assemble_mass,
                         constant_field, field_from_function)
from fracch.observables import ObservableSet
from fracch.physics import ConstantMobility, DegenerateMobility, Landau
from fracch.quadrature import HistoryBuffer, gl_weights
from fracch.solver import (CahnHilliard, ModelSpec, OhtaKawasaki, Stepper,
                           Tumor, run, step_ch, step_tumor)


def wavy_phi(grid, mean=0.0, amp=0.1):
    if grid.dim == 1:
        return field_from_function(
            grid, lambda x: mean + amp * np.cos(np.pi * x))
    return field_from_function(
        grid, lambda x, y: mean + amp * np.cos(np.pi * x) * np.cos(np.pi * y))


def ch_spec(grid, alpha=0.6, dt=1e-3, n_steps=5, **kw):
    defaults = dict(variant=CahnHilliard(), alpha=alpha, epsilon=0.1,
                    potential=Landau(0.25), mobility=ConstantMobility(1.0),
                    grid=grid, dt=dt, n_steps=n_steps,
                    initial_phi=wavy_phi(grid), linear_solver="direct")
    defaults.update(kw)
    return ModelSpec(**defaults)


class TestFixedPoints:
    def test_uniform_state_is_stationary(self):
        g = StructuredGrid([6, 6])
        spec = ch_spec(g, initial_phi=constant_field(g, 0.4), n_steps=4)
        out = run(spec)
        assert np.allclose(out.series["roughness"].values, 0.0, atol=1e-9)
        assert out.newton_iters[0] == 0

    def test_mass_conservation_ch(self):
        g = StructuredGrid([10, 10])
        spec = ch_spec(g, alpha=0.5, n_steps=8,
                       initial_phi=wavy_phi(g, 0.1, 0.2))
        out = run(spec)
        m = out.series["mass"].values
        assert np.allclose(m, m[0], rtol=1e-9)

    def test_mass_conservation_degenerate_mobility(self):
        g = StructuredGrid([24])
        spec = ch_spec(g, alpha=0.7, n_steps=6,
                       mobility=DegenerateMobility(1.0, 2.0, 0.05),
                       initial_phi=wavy_phi(g, 0.0, 0.5))
        out = run(spec)
        m = out.series["mass"].values
        assert np.allclose(m, m[0], rtol=1e-9, atol=1e-12)

    def test_mass_conservation_ok(self):
        g = StructuredGrid([12, 12])
        spec = ch_spec(g, variant=OhtaKawasaki(kappa=50.0), alpha=0.8,
                       epsilon=0.05, n_steps=6,
                       initial_phi=wavy_phi(g, 0.3, 0.05))
        out = run(spec)
        m = out.series["mass"].values
        assert np.allclose(m, m[0], rtol=1e-8)


class TestEnergyDecay:
    def test_classical_limit_monotone(self):
        g = StructuredGrid([16, 16])
        spec = ch_spec(g, alpha=1.0, epsilon=0.05, dt=2e-3, n_steps=12,
                       initial_phi=wavy_phi(g, 0.0, 0.3))
        out = run(spec)
        e = out.series["energy"].values
        assert np.all(np.diff(e) <= 1e-10)

    def test_fractional_energy_below_start(self):
        g = StructuredGrid([16, 16])
        for alpha in (0.3, 0.7):
            spec = ch_spec(g, alpha=alpha, epsilon=0.05, dt=2e-3, n_steps=10,
                           initial_phi=wavy_phi(g, 0.0, 0.3))
            e = run(spec).series["energy"].values
            assert e[-1] <= e[0] + 1e-8


class TestSourceTerm:
    def test_constant_source_grows_mass_linearly_classical(self):
        # d/dt mass = integral of f when alpha = 1
        g = StructuredGrid([8, 8])
        spec = ch_spec(g, alpha=1.0, dt=1e-2, n_steps=5,
                       initial_phi=constant_field(g, 0.0),
                       source=constant_field(g, 0.2))
        out = run(spec)
        m = out.series["mass"].values
        t = out.series["mass"].times
        assert np.allclose(m, 0.2 * t, rtol=1e-8, atol=1e-10)


class TestTumor:
    def tumor_spec(self, **kw):
        g = StructuredGrid([30])
        bump = field_from_function(
            g, lambda x: np.where(np.abs(x - 0.5) < 0.2,
                                  np.exp(1.0 - 1.0 / np.maximum(
                                      1.0 - (np.abs(x - 0.5) / 0.2) ** 2,
                                      1e-12)), 0.0))
        defaults = dict(
            variant=Tumor(proliferation=0.5, apoptosis=0.005,
                          chemotaxis=0.25, diffusivity=0.5),
            alpha=0.8, epsilon=0.05, potential=Landau(1.0),
            mobility=DegenerateMobility(0.5, 2.0, 0.05), grid=g, dt=2e-3,
            n_steps=6, initial_phi=bump, initial_sigma=constant_field(g, 1.0),
            linear_solver="direct")
        defaults.update(kw)
        return ModelSpec(**defaults)

    def test_runs_and_tracks_nutrient(self):
        out = run(self.tumor_spec())
        assert "sigma_mass" in out.series
        assert out.series["sigma_mass"].values[0] == pytest.approx(1.0)
        assert np.all(np.isfinite(out.series["sigma_mass"].values))

    def test_nutrient_consumed_by_growth(self):
        # with apoptosis off and the growth rate clipped to [0, 1] the only
        # volumetric nutrient term is consumption, so its mass cannot rise
        spec = self.tumor_spec(
            variant=Tumor(proliferation=0.5, apoptosis=0.0, chemotaxis=0.25,
                          diffusivity=0.5, clip_proliferation=True),
            n_steps=8)
        sm = run(spec).series["sigma_mass"].values
        assert np.all(np.diff(sm) <= 1e-10)
        assert sm[-1] < sm[0]

    def test_proliferation_grows_tumor(self):
        # same run with and without the growth term: proliferation must
        # leave more tumor mass behind (clipped, so interface undershoot
        # cannot turn growth into decay)
        grown = run(self.tumor_spec(
            n_steps=10,
            variant=Tumor(proliferation=0.5, apoptosis=0.005,
                          chemotaxis=0.25, diffusivity=0.5,
                          clip_proliferation=True))).series["mass"].values
        base = run(self.tumor_spec(
            n_steps=10,
            variant=Tumor(proliferation=0.0, apoptosis=0.005,
                          chemotaxis=0.25,
                          diffusivity=0.5))).series["mass"].values
        assert grown[-1] > base[-1]

    def test_no_growth_without_proliferation(self):
        spec = self.tumor_spec(
            variant=Tumor(proliferation=0.0, apoptosis=0.0,
                          chemotaxis=0.0, diffusivity=0.5))
        out = run(spec)
        m = out.series["mass"].values
        assert np.allclose(m, m[0], rtol=1e-8)

    def test_requires_initial_sigma(self):
        with pytest.raises(ParameterError):
            run(self.tumor_spec(initial_sigma=None))

    def test_clip_switch_accepted(self):
        spec = self.tumor_spec(
            variant=Tumor(proliferation=0.5, apoptosis=0.005,
                          chemotaxis=0.25, diffusivity=0.5,
                          clip_proliferation=True))
        out = run(spec)
        assert len(out.series["mass"].values) == spec.n_steps + 1


class TestExternalStepFunctions:
    def test_step_ch_matches_stepper(self):
        g = StructuredGrid([12])
        spec = ch_spec(g, n_steps=3)
        stepper = Stepper(spec)
        r1 = stepper.step()

        w = gl_weights(spec.alpha, spec.n_steps, spec.dt)
        hist = HistoryBuffer(spec.initial_phi, spec.n_steps)
        r2 = step_ch(spec, hist, w)
        assert np.allclose(r1.phi.values, r2.phi.values, rtol=1e-12,
                           atol=1e-13)

    def test_step_tumor_signature(self):
        g = StructuredGrid([12])
        spec = ch_spec(
            g, n_steps=2,
            variant=Tumor(proliferation=0.3, apoptosis=0.005,
                          chemotaxis=0.2, diffusivity=0.5),
            initial_phi=wavy_phi(g, 0.3, 0.1),
            initial_sigma=constant_field(g, 1.0))
        w = gl_weights(spec.alpha, spec.n_steps, spec.dt)
        hist = HistoryBuffer(spec.initial_phi, spec.n_steps)
        out = step_tumor(spec, hist, w, constant_field(g, 1.0))
        assert out.sigma is not None
        assert out.phi.values.shape == (g.n_nodes,)


class TestRunBookkeeping:
    def test_series_lengths_and_snapshots(self):
        g = StructuredGrid([8, 8])
        spec = ch_spec(g, n_steps=4)
        out = run(spec, ObservableSet(snapshot_steps=(0, 2, 4)))
        assert out.series["mass"].times.shape == (5,)
        assert set(out.snapshots) == {0, 2, 4}
        assert set(out.snapshots[2]) == {"phi", "mu"}
        assert len(out.newton_iters) == 4
        assert out.wall_time > 0.0

    def test_determinism(self):
        g = StructuredGrid([8, 8])
        out1 = run(ch_spec(g, n_steps=3))
        out2 = run(ch_spec(g, n_steps=3))
        assert np.array_equal(out1.series["energy"].values,
                              out2.series["energy"].values)

    def test_solver_error_carries_step_index(self):
        g = StructuredGrid([8])
        # absurd time step with strong nonlinearity makes Newton fail fast
        spec = ch_spec(g, alpha=0.9, dt=1e12, n_steps=2, epsilon=1e-4,
                       potential=Landau(50.0), newton_max_iter=3,
                       initial_phi=wavy_phi(g, 0.0, 0.9))
        with pytest.raises(SolverError, match="step"):
            run(spec)


class TestValidation:
    def test_bad_alpha(self):
        g = StructuredGrid([4])
        with pytest.raises(ParameterError):
            run(ch_spec(g, alpha=1.5))

    def test_bad_linear_solver_name(self):
        g = StructuredGrid([4])
        with pytest.raises(ParameterError):
            run(ch_spec(g, linear_solver="magic"))

    def test_ok_requires_constant_mobility(self):
        g = StructuredGrid([4])
        with pytest.raises(ParameterError):
            run(ch_spec(g, variant=OhtaKawasaki(kappa=10.0),
                        mobility=DegenerateMobility(1.0, 2.0, 0.05)))

    def test_initial_phi_grid_mismatch(self):
        g = StructuredGrid([4])
        other = StructuredGrid([5])
        with pytest.raises(ParameterError):
            run(ch_spec(g, initial_phi=constant_field(other, 0.0)))
