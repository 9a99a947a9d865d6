"""Tests for the Sobol first-order index machinery."""

import numpy as np
import pytest

from fracch.errors import ParameterError
from fracch.grid import StructuredGrid, constant_field, field_from_function
from fracch.physics import DegenerateMobility, Landau
from fracch.sensitivity import (PARAM_NAMES, PriorSet, qoi_tumor_mass,
                                sample_matrices, sobol_indices,
                                spec_from_theta, tumor_sensitivity)
from fracch.solver import ModelSpec, Tumor


class TestPriorSet:
    def test_default_bounds_shape(self):
        b = PriorSet().bounds()
        assert b.shape == (8, 2)
        assert np.all(b[:, 0] < b[:, 1])

    def test_default_alpha_interval(self):
        b = PriorSet().intervals["alpha"]
        assert b == (0.001, 1.0)

    def test_wrong_keys_rejected(self):
        with pytest.raises(ParameterError):
            PriorSet({"alpha": (0.0, 1.0)})

    def test_empty_interval_rejected(self):
        bad = dict(PriorSet().intervals)
        bad["epsilon"] = (0.1, 0.1)
        with pytest.raises(ParameterError):
            PriorSet(bad)


class TestSampling:
    def test_shapes_and_bounds(self):
        A, B, Cs = sample_matrices(PriorSet(), 50, seed=1)
        assert A.shape == B.shape == (50, 8)
        assert len(Cs) == 8
        lo, hi = PriorSet().bounds().T
        for m in [A, B] + Cs:
            assert np.all(m >= lo) and np.all(m <= hi)

    def test_pick_one_structure(self):
        A, B, Cs = sample_matrices(PriorSet(), 20, seed=3)
        for i, C in enumerate(Cs):
            assert np.array_equal(C[:, i], B[:, i])
            mask = np.ones(8, dtype=bool)
            mask[i] = False
            assert np.array_equal(C[:, mask], A[:, mask])

    def test_reproducible_and_independent(self):
        A1, B1, _ = sample_matrices(PriorSet(), 30, seed=9)
        A2, B2, _ = sample_matrices(PriorSet(), 30, seed=9)
        assert np.array_equal(A1, A2)
        assert not np.array_equal(A1, B1)
        A3, _, _ = sample_matrices(PriorSet(), 30, seed=10)
        assert not np.array_equal(A1, A3)

    def test_needs_two_rows(self):
        with pytest.raises(ParameterError):
            sample_matrices(PriorSet(), 1, seed=0)


class TestEstimator:
    def test_additive_linear_model(self):
        # Q = theta_1 + 2 theta_2 on U(0,1)^8: S_1 = 1/5, S_2 = 4/5
        unit = PriorSet({n: (0.0, 1.0) for n in PARAM_NAMES})
        A, B, Cs = sample_matrices(unit, 200000, seed=4)

        def q(m):
            return m[:, 0] + 2.0 * m[:, 1]

        out = sobol_indices(q(A), q(B), [q(C) for C in Cs])
        assert out.indices[0] == pytest.approx(0.2, abs=0.01)
        assert out.indices[1] == pytest.approx(0.8, abs=0.01)
        assert np.all(np.abs(out.indices[2:]) < 0.02)

    def test_single_active_parameter(self):
        A, B, Cs = sample_matrices(PriorSet(), 100000, seed=7)

        def q(m):
            return np.sin(m[:, 4])

        out = sobol_indices(q(A), q(B), [q(C) for C in Cs])
        assert out.indices[4] == pytest.approx(1.0, abs=0.02)
        assert out.ranked()[0][0] == "potential_coeff"

    def test_vector_qoi_average(self):
        A, B, Cs = sample_matrices(PriorSet(), 50000, seed=2)

        def q(m):
            # component 0 driven by param 0, component 1 by param 2
            return np.stack([m[:, 0], m[:, 2] ** 2], axis=1)

        out = sobol_indices(q(A), q(B), [q(C) for C in Cs])
        assert out.per_time_indices.shape == (8, 2)
        assert out.per_time_indices[0, 0] == pytest.approx(1.0, abs=0.03)
        assert out.per_time_indices[2, 1] == pytest.approx(1.0, abs=0.03)
        assert out.indices[0] == pytest.approx(0.5, abs=0.03)

    def test_affine_rescaling_invariance(self):
        # S_i(a*Q + b) == S_i(Q) exactly: a^2 cancels between numerator
        # and denominator, and the shift b drops out of both.
        A, B, Cs = sample_matrices(PriorSet(), 500, seed=11)

        def q(m):
            return m[:, 0] + m[:, 2] ** 2 + 0.3 * m[:, 5]

        base = sobol_indices(q(A), q(B), [q(C) for C in Cs])
        scaled = sobol_indices(7.5 * q(A) - 1000.0, 7.5 * q(B) - 1000.0,
                               [7.5 * q(C) - 1000.0 for C in Cs])
        assert np.all(np.abs(base.indices - scaled.indices) < 1e-10)

    def test_degenerate_variance_rejected(self):
        c = np.full(100, 3.0)
        with pytest.raises(ParameterError):
            sobol_indices(c, c, [c] * 8)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ParameterError):
            sobol_indices(np.ones(10), np.ones(9), [np.ones(10)] * 8)


def small_template():
    g = StructuredGrid([20])
    bump = field_from_function(
        g, lambda x: np.where(np.abs(x - 0.5) < 0.25,
                              np.exp(1.0 - 1.0 / np.maximum(
                                  1.0 - (np.abs(x - 0.5) / 0.25) ** 2,
                                  1e-12)), 0.0))
    return ModelSpec(
        variant=Tumor(proliferation=0.5, apoptosis=0.005, chemotaxis=0.25,
                      diffusivity=0.5),
        alpha=0.5, epsilon=0.05, potential=Landau(1.0),
        mobility=DegenerateMobility(0.5, 2.0, 0.05), grid=g, dt=5e-3,
        n_steps=8, initial_phi=bump,
        initial_sigma=constant_field(g, 1.0), linear_solver="direct")


class TestSpecFromTheta:
    def test_substitution(self):
        theta = np.array([0.3, 0.7, 0.4, 0.002, 1.5, 0.08, 0.1, 0.9])
        spec = spec_from_theta(theta, small_template())
        assert spec.alpha == 0.3
        assert spec.mobility.M == 0.7
        assert spec.variant.proliferation == 0.4
        assert spec.variant.apoptosis == 0.002
        assert spec.potential.c == 1.5
        assert spec.epsilon == 0.08
        assert spec.variant.chemotaxis == 0.1
        assert spec.variant.diffusivity == 0.9
        # untouched template fields survive
        assert spec.n_steps == 8
        assert spec.mobility.delta_reg == 0.05

    def test_rejects_nonpositive(self):
        theta = np.array([0.3, 0.7, 0.4, 0.0, 1.5, 0.08, 0.1, 0.9])
        with pytest.raises(ParameterError):
            spec_from_theta(theta, small_template())


class TestQoi:
    def test_times_map_to_steps(self):
        t = small_template()
        theta = np.array([0.5, 0.5, 0.5, 0.005, 1.0, 0.05, 0.2, 0.5])
        q = qoi_tumor_mass(theta, t, times=np.array([t.dt, t.dt * t.n_steps]))
        assert q.shape == (2,)
        assert np.all(np.isfinite(q))

    def test_default_times(self):
        t = small_template()
        theta = np.array([0.5, 0.5, 0.5, 0.005, 1.0, 0.05, 0.2, 0.5])
        assert qoi_tumor_mass(theta, t).shape == (10,)

    def test_failure_reports_theta(self):
        t = small_template()
        theta = np.array([0.5, 0.5, 0.5, -1.0, 1.0, 0.05, 0.2, 0.5])
        with pytest.raises(ParameterError, match="theta"):
            qoi_tumor_mass(theta, t)


class TestEndToEnd:
    def test_small_study_runs(self):
        out = tumor_sensitivity(small_template(), n_samples=4, seed=11,
                                times=np.array([0.02, 0.04]))
        assert out.indices.shape == (8,)
        assert out.per_time_indices.shape == (8, 2)
        assert out.n_samples == 4
        assert np.all(np.isfinite(out.indices))

    def test_seed_reproducibility(self):
        kw = dict(n_samples=3, seed=5, times=np.array([0.04]))
        o1 = tumor_sensitivity(small_template(), **kw)
        o2 = tumor_sensitivity(small_template(), **kw)
        assert np.array_equal(o1.indices, o2.indices)
