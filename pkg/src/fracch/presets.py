"""Named experiment presets, expressed as config fragments.

Presets expand into the documented JSON schema before validation, so any
explicitly configured key overrides the preset value.  ``scale: paper``
marks runs at full publication resolution; batch acceptance checks only
exercise ``scale: desk`` entries.
"""

from __future__ import annotations

import copy

from .errors import ConfigError

PRESETS: dict[str, dict] = {
    # 2D spinodal decomposition: near-uniform random mixture, Landau well,
    # constant mobility.  The canonical energy-decay scenario.
    "spinodal2d": {
        "mode": "simulate",
        "scale": "desk",
        "seed": 7,
        "model": {
            "variant": "cahn_hilliard",
            "alpha": 0.7,
            "epsilon": 0.03,
            "potential": {"type": "landau", "c": 0.25},
            "mobility": {"type": "constant", "M": 1.0},
        },
        "grid": {"cells": [64, 64]},
        "time": {"dt": 2e-3, "n_steps": 250},
        "initial": {"kind": "random_uniform", "mean": 0.0,
                    "amplitude": 0.05},
        "solver": {"linear_solver": "direct"},
    },
    # Block-copolymer microphase separation, desk-scaled to 2D 64^2.
    "copolymer2d-desk": {
        "mode": "simulate",
        "scale": "desk",
        "seed": 0,
        "model": {
            "variant": "ohta_kawasaki",
            "alpha": 0.7,
            "epsilon": 5e-4,
            "kappa": 100.0,
            "potential": {"type": "landau", "c": 0.5},
            "mobility": {"type": "constant", "M": 1.0},
        },
        "grid": {"cells": [64, 64]},
        "time": {"dt": 1e-3, "n_steps": 50},
        "initial": {"kind": "cosine_product", "mean": 0.4,
                    "amplitude": 0.01},
        "solver": {"linear_solver": "direct"},
    },
    # Full-resolution 3D copolymer run (mesh size 2^-7).  Ships for
    # completeness; expect hours of runtime and several GB of memory.
    "copolymer3d": {
        "mode": "simulate",
        "scale": "paper",
        "seed": 0,
        "model": {
            "variant": "ohta_kawasaki",
            "alpha": 0.75,
            "epsilon": 5e-4,
            "kappa": 100.0,
            "potential": {"type": "landau", "c": 0.5},
            "mobility": {"type": "constant", "M": 1.0},
        },
        "grid": {"cells": [128, 128, 128]},
        "time": {"dt": 1e-4, "n_steps": 2000},
        "initial": {"kind": "cosine_product", "mean": 0.4,
                    "amplitude": 0.01},
        "solver": {"linear_solver": "direct"},
    },
    # 1D subdiffusive tumor growth with nutrient coupling; parameters sit
    # at the midpoints of the sensitivity priors.  Proliferation clipping
    # is on: with the raw phi*(1-phi) source the healthy phase (phi=-1)
    # acts as a strong mass sink, the tumor shrinks instead of growing,
    # and undershoots below -1 destabilize the nonlinear solves.
    "tumor1d": {
        "mode": "simulate",
        "scale": "desk",
        "seed": 0,
        "model": {
            "variant": "tumor",
            "alpha": 0.5,
            "epsilon": 0.055,
            "proliferation": 0.55,
            "apoptosis": 0.0055,
            "chemotaxis": 0.255,
            "diffusivity": 0.55,
            "clip_proliferation": True,
            "potential": {"type": "landau", "c": 1.2625},
            "mobility": {"type": "degenerate", "M": 0.55, "nu": 2.0,
                         "delta_reg": 0.0},
        },
        "grid": {"cells": [200]},
        "time": {"dt": 1e-3, "n_steps": 2000},
        "initial": {"kind": "tumor_bump"},
        "initial_sigma": {"kind": "constant", "value": 1.0},
        "solver": {"linear_solver": "direct"},
    },
}


def expand_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return copy.deepcopy(PRESETS[name])
