"""Variance-based first-order Sobol indices for the tumor model.

The Monte Carlo matrix method: draw two independent sample matrices A and
B from the parameter priors, build C_i as A with column i replaced by B's
column i, evaluate the quantity of interest on every row, and estimate

    S_i = (1/N) sum_k Q(B)_k (Q(C_i)_k - Q(A)_k) / Var(Q(A)).

B and C_i share only column i, so the covariance in the numerator picks
out exactly the first-order variance contribution of parameter i; pairing
C_i with Q(A) instead would estimate the complement 1 - ST_i.  The
denominator is the plain sample variance of Q(A).

Sampling uses the counter-based Philox generator keyed per matrix, so the
drawn parameter sets never depend on evaluation order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ParameterError
from .observables import ObservableSet
from .solver import ModelSpec, Tumor, run

PARAM_NAMES = ("alpha", "mobility", "proliferation", "apoptosis",
               "potential_coeff", "epsilon", "chemotaxis", "diffusivity")

_DEFAULT_PRIORS = {
    "alpha": (0.001, 1.0),
    "mobility": (0.1, 1.0),
    "proliferation": (0.1, 1.0),
    "apoptosis": (0.001, 0.01),
    "potential_coeff": (0.025, 2.5),
    "epsilon": (0.01, 0.1),
    "chemotaxis": (0.01, 0.5),
    "diffusivity": (0.1, 1.0),
}


@dataclass(frozen=True)
class PriorSet:
    """Uniform prior intervals for the 8 tumor-model parameters."""

    intervals: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(_DEFAULT_PRIORS))

    def __post_init__(self):
        if set(self.intervals) != set(PARAM_NAMES):
            raise ParameterError(
                f"priors must cover exactly {PARAM_NAMES}")
        for name, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ParameterError(f"empty prior interval for {name}")

    def bounds(self) -> np.ndarray:
        """(8, 2) array of (lo, hi) in canonical parameter order."""
        return np.array([self.intervals[n] for n in PARAM_NAMES])


@dataclass
class SobolResult:
    indices: np.ndarray                 # averaged over QoI components
    per_time_indices: np.ndarray        # (n_params, n_qoi_components)
    n_samples: int
    qoi_description: str
    seed: int

    def ranked(self) -> list[tuple[str, float]]:
        order = np.argsort(self.indices)[::-1]
        return [(PARAM_NAMES[i], float(self.indices[i])) for i in order]


def sample_matrices(priors: PriorSet, n: int, seed: int):
    """Sample matrices A, B and the pick-one matrices C_1..C_8.

    Rows are i.i.d. uniform draws from the priors via Philox streams
    keyed (seed, matrix), so results are reproducible and independent of
    any downstream parallelism.
    """
    if n < 2:
        raise ParameterError(f"need at least 2 samples, got {n}")
    b = priors.bounds()
    lo, width = b[:, 0], b[:, 1] - b[:, 0]

    def draw(matrix_id):
        rng = np.random.Generator(np.random.Philox(key=[seed, matrix_id]))
        return lo + width * rng.random((n, len(PARAM_NAMES)))

    A, B = draw(0), draw(1)
    Cs = []
    for i in range(len(PARAM_NAMES)):
        C = A.copy()
        C[:, i] = B[:, i]
        Cs.append(C)
    return A, B, Cs


def spec_from_theta(theta: np.ndarray, template: ModelSpec) -> ModelSpec:
    """Substitute the 8-vector theta into a tumor model template."""
    from .physics import DegenerateMobility, Landau
    th = dict(zip(PARAM_NAMES, np.asarray(theta, dtype=float)))
    if np.any(np.asarray(theta) <= 0.0):
        raise ParameterError(f"theta must be strictly positive: {theta}")
    base: Tumor = template.variant
    variant = replace(base, proliferation=th["proliferation"],
                      apoptosis=th["apoptosis"],
                      chemotaxis=th["chemotaxis"],
                      diffusivity=th["diffusivity"])
    mobility = DegenerateMobility(
        M=th["mobility"], nu=2.0,
        delta_reg=getattr(template.mobility, "delta_reg", 0.0))
    return replace(template, variant=variant, alpha=th["alpha"],
                   epsilon=th["epsilon"], potential=Landau(
                       c=th["potential_coeff"]), mobility=mobility)


def qoi_tumor_mass(theta: np.ndarray, template: ModelSpec,
                   times: np.ndarray | None = None) -> np.ndarray:
    """Tumor mass integral at the requested times for one parameter set.

    ``times`` defaults to 10 logarithmically spaced points from the first
    step to the end of the simulated span; each time is rounded to the
    nearest step.  Log spacing reflects the power-law time scales of the
    subdiffusive dynamics: the memory effect acts early and uniform
    sampling would oversample the saturated late regime.  Failures
    propagate with the offending theta attached to the message.
    """
    spec = spec_from_theta(theta, template)
    if times is None:
        times = np.geomspace(spec.dt, spec.dt * spec.n_steps, 10)
    try:
        out = run(spec, ObservableSet(mass=True, energy=False,
                                      roughness=False))
    except Exception as err:
        raise type(err)(f"QoI evaluation failed for theta={theta}: {err}") \
            from err
    series = out.series["mass"]
    idx = np.clip(np.rint(np.asarray(times) / spec.dt).astype(int),
                  0, spec.n_steps)
    return series.values[idx]


def sobol_indices(QA: np.ndarray, QB: np.ndarray, QC: list[np.ndarray],
                  n_samples: int | None = None, qoi_description: str = "",
                  seed: int = 0) -> SobolResult:
    """First-order indices from evaluated sample matrices.

    Inputs may be vectors (scalar QoI) or (N, n_times) arrays; for vector
    QoIs the indices are computed per component and averaged uniformly.
    Raises ParameterError when the total-variance denominator degenerates.
    """
    QA = np.atleast_2d(np.asarray(QA, dtype=float).T).T
    QB = np.atleast_2d(np.asarray(QB, dtype=float).T).T
    QC = [np.atleast_2d(np.asarray(q, dtype=float).T).T for q in QC]
    N = QA.shape[0]
    if N < 2 or QB.shape != QA.shape or any(q.shape != QA.shape for q in QC):
        raise ParameterError("QoI arrays must share one shape with N >= 2")

    QAc = QA - QA.mean(axis=0)
    denom = np.einsum("nt,nt->t", QAc, QAc)
    scale = np.maximum(np.einsum("nt->t", QA) ** 2 / N ** 2, 1.0)
    if np.any(np.abs(denom) <= 1e-12 * N * scale):
        raise ParameterError(
            "quantity of interest has (near) zero variance; "
            "Sobol indices are undefined")

    # Centering QB leaves the estimator's expectation unchanged (the
    # difference QC_i - QA has zero mean) but makes it exactly invariant
    # under shifts of Q and removes the mean-squared noise amplification
    # that otherwise swamps the indices when |mean(Q)| >> std(Q).
    QBc = QB - QB.mean(axis=0)
    per_time = np.stack([
        np.einsum("nt,nt->t", QBc, q - QA) / denom for q in QC])
    return SobolResult(indices=per_time.mean(axis=1),
                       per_time_indices=per_time,
                       n_samples=N if n_samples is None else n_samples,
                       qoi_description=qoi_description, seed=seed)


def _eval_row(args):
    theta, template, times = args
    return qoi_tumor_mass(theta, template, times)


def tumor_sensitivity(template: ModelSpec, priors: PriorSet | None = None,
                      n_samples: int = 100, seed: int = 0,
                      times: np.ndarray | None = None,
                      workers: int = 1) -> SobolResult:
    """End-to-end study: sample, evaluate the tumor QoI, estimate indices."""
    if priors is None:
        priors = PriorSet()
    A, B, Cs = sample_matrices(priors, n_samples, seed)
    rows = np.concatenate([A, B] + Cs, axis=0)
    args = [(row, template, times) for row in rows]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            evals = list(pool.map(_eval_row, args, chunksize=4))
    else:
        evals = [_eval_row(a) for a in args]
    evals = np.asarray(evals)
    n = n_samples
    QA, QB = evals[:n], evals[n:2 * n]
    QC = [evals[(2 + i) * n:(3 + i) * n] for i in range(len(PARAM_NAMES))]
    return sobol_indices(QA, QB, QC, n_samples=n,
                         qoi_description="tumor mass over time", seed=seed)
