"""Run configuration: JSON schema, validation, and model construction.

The schema is strict: unknown keys are rejected with the offending key
named, and every scalar is range-checked before a solver object is built.
Preset expansion happens first, then explicit keys override preset values
key by key (deep merge).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FracchError
from .grid import ScalarField, StructuredGrid, constant_field, \
    field_from_function
from .observables import ObservableSet
from .physics import ConstantMobility, DegenerateMobility, FloryHuggins, \
    Landau
from .presets import expand_preset
from .sensitivity import PARAM_NAMES, PriorSet
from .solver import CahnHilliard, ModelSpec, OhtaKawasaki, Tumor

_TOP_KEYS = {"mode", "preset", "seed", "scale", "output_dir", "figures",
             "model", "grid", "time", "initial", "initial_sigma",
             "observables", "solver", "sensitivity", "convergence"}
_MODEL_KEYS = {"variant", "alpha", "epsilon", "kappa", "proliferation",
               "apoptosis", "chemotaxis", "diffusivity",
               "clip_proliferation", "potential", "mobility"}
_SENS_KEYS = {"n_samples", "workers", "times", "priors"}
_CONV_KEYS = {"alphas", "dt_values", "powers"}


@dataclass
class RunConfig:
    mode: str
    seed: int
    scale: str
    output_dir: str
    figures: bool
    raw: dict
    spec: ModelSpec | None = None
    observables: ObservableSet = field(default_factory=ObservableSet)
    sensitivity: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)


def _expect(cond: bool, key: str, what: str):
    if not cond:
        raise ConfigError(f"config key {key!r}: expected {what}")


def _number(d: dict, key: str, ctx: str, default=None, lo=None, hi=None,
            lo_open=False):
    if key not in d:
        if default is None:
            raise ConfigError(f"missing required config key {ctx}{key!r}")
        return default
    v = d[key]
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool),
            ctx + key, "a number")
    v = float(v)
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(f"config key {ctx}{key!r}: {v} below range")
    if hi is not None and v > hi:
        raise ConfigError(f"config key {ctx}{key!r}: {v} above range")
    return v


def _reject_unknown(d: dict, allowed: set, ctx: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"unknown config key {ctx}{k!r}")


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def _build_potential(d: dict):
    _expect(isinstance(d, dict) and "type" in d, "model.potential",
            "an object with a 'type'")
    t = d["type"]
    if t == "landau":
        _reject_unknown(d, {"type", "c"}, "model.potential.")
        return Landau(c=_number(d, "c", "model.potential.", default=0.25,
                                lo=0.0, lo_open=True))
    if t == "flory_huggins":
        _reject_unknown(d, {"type", "theta", "theta0", "delta_reg"},
                        "model.potential.")
        return FloryHuggins(
            theta=_number(d, "theta", "model.potential.", lo=0.0,
                          lo_open=True),
            theta0=_number(d, "theta0", "model.potential.", lo=0.0,
                           lo_open=True),
            delta_reg=_number(d, "delta_reg", "model.potential.",
                              default=0.1, lo=0.0, hi=1.0, lo_open=True))
    raise ConfigError(f"config key 'model.potential.type': unknown type {t!r}")


def _build_mobility(d: dict):
    _expect(isinstance(d, dict) and "type" in d, "model.mobility",
            "an object with a 'type'")
    t = d["type"]
    if t == "constant":
        _reject_unknown(d, {"type", "M"}, "model.mobility.")
        return ConstantMobility(M=_number(d, "M", "model.mobility.",
                                          default=1.0, lo=0.0, lo_open=True))
    if t == "degenerate":
        _reject_unknown(d, {"type", "M", "nu", "delta_reg"},
                        "model.mobility.")
        return DegenerateMobility(
            M=_number(d, "M", "model.mobility.", default=1.0, lo=0.0,
                      lo_open=True),
            nu=_number(d, "nu", "model.mobility.", default=2.0, lo=1.0),
            delta_reg=_number(d, "delta_reg", "model.mobility.",
                              default=0.0, lo=0.0, hi=1.0))
    raise ConfigError(f"config key 'model.mobility.type': unknown type {t!r}")


def build_initial_field(d: dict, grid: StructuredGrid,
                        seed: int) -> ScalarField:
    _expect(isinstance(d, dict) and "kind" in d, "initial",
            "an object with a 'kind'")
    kind = d["kind"]
    if kind == "constant":
        _reject_unknown(d, {"kind", "value"}, "initial.")
        return constant_field(grid, _number(d, "value", "initial."))
    if kind == "random_uniform":
        _reject_unknown(d, {"kind", "mean", "amplitude"}, "initial.")
        mean = _number(d, "mean", "initial.", default=0.0)
        amp = _number(d, "amplitude", "initial.", default=0.05)
        rng = np.random.Generator(np.random.Philox(key=[seed, 0xF1E1D]))
        vals = mean + amp * (2.0 * rng.random(grid.n_nodes) - 1.0)
        return ScalarField(grid, vals)
    if kind == "cosine_product":
        _reject_unknown(d, {"kind", "mean", "amplitude"}, "initial.")
        mean = _number(d, "mean", "initial.", default=0.4)
        amp = _number(d, "amplitude", "initial.", default=0.01)

        def fn(*axes):
            out = np.full_like(axes[0], mean)
            prod = np.ones_like(axes[0])
            for x in axes:
                prod = prod * np.cos(2.0 * np.pi * x)
            return out + amp * prod
        return field_from_function(grid, fn)
    if kind == "tumor_bump":
        # smooth bump: +1 on (2/5, 3/5) via a compactly supported mollifier
        _reject_unknown(d, {"kind"}, "initial.")
        if grid.dim != 1:
            raise ConfigError(
                "config key 'initial.kind': tumor_bump needs a 1D grid")

        def fn(x):
            r2 = 100.0 * (x - 0.5) ** 2
            inside = r2 < 1.0
            r2c = np.minimum(r2, 1.0 - 1e-14)
            bump = np.where(inside, np.exp(1.0 - 1.0 / (1.0 - r2c)), 0.0)
            return -1.0 + 2.0 * bump
        return field_from_function(grid, fn)
    raise ConfigError(f"config key 'initial.kind': unknown kind {kind!r}")


def _build_model(cfg: dict, seed: int) -> ModelSpec:
    for key in ("model", "grid", "time", "initial"):
        if key not in cfg:
            raise ConfigError(f"missing required config key {key!r}")
    m = cfg["model"]
    _reject_unknown(m, _MODEL_KEYS, "model.")
    vname = m.get("variant")
    _expect(vname in ("cahn_hilliard", "ohta_kawasaki", "tumor"),
            "model.variant",
            "one of 'cahn_hilliard', 'ohta_kawasaki', 'tumor'")

    g = cfg["grid"]
    _reject_unknown(g, {"cells", "domain"}, "grid.")
    _expect("cells" in g and isinstance(g["cells"], list), "grid.cells",
            "a list of cell counts")
    grid = StructuredGrid(g["cells"], g.get("domain"))

    t = cfg["time"]
    _reject_unknown(t, {"dt", "n_steps"}, "time.")
    dt = _number(t, "dt", "time.", lo=0.0, lo_open=True)
    n_steps = t.get("n_steps")
    _expect(isinstance(n_steps, int) and n_steps >= 0, "time.n_steps",
            "a nonnegative integer")

    alpha = _number(m, "alpha", "model.", lo=0.0, hi=1.0, lo_open=True)
    epsilon = _number(m, "epsilon", "model.", lo=0.0, lo_open=True)
    potential = _build_potential(m.get("potential", {"type": "landau"}))
    mobility = _build_mobility(m.get("mobility", {"type": "constant"}))

    if vname == "cahn_hilliard":
        for k in ("kappa", "proliferation", "apoptosis", "chemotaxis",
                  "diffusivity", "clip_proliferation"):
            if k in m:
                raise ConfigError(
                    f"config key 'model.{k}' is not valid for variant "
                    f"'cahn_hilliard'")
        variant = CahnHilliard()
    elif vname == "ohta_kawasaki":
        variant = OhtaKawasaki(kappa=_number(m, "kappa", "model.", lo=0.0,
                                             lo_open=True))
    else:
        variant = Tumor(
            proliferation=_number(m, "proliferation", "model.", lo=0.0),
            apoptosis=_number(m, "apoptosis", "model.", lo=0.0),
            chemotaxis=_number(m, "chemotaxis", "model.", lo=0.0),
            diffusivity=_number(m, "diffusivity", "model.", lo=0.0,
                                lo_open=True),
            clip_proliferation=bool(m.get("clip_proliferation", False)))

    initial_phi = build_initial_field(cfg["initial"], grid, seed)
    initial_sigma = None
    if "initial_sigma" in cfg:
        initial_sigma = build_initial_field(cfg["initial_sigma"], grid, seed)

    sol = cfg.get("solver", {})
    _reject_unknown(sol, {"newton_tol", "newton_max_iter", "linear_solver"},
                    "solver.")
    linear_solver = sol.get("linear_solver", "bicgstab")
    _expect(linear_solver in ("bicgstab", "direct"), "solver.linear_solver",
            "'bicgstab' or 'direct'")
    nmax = sol.get("newton_max_iter", 50)
    _expect(isinstance(nmax, int) and nmax >= 1, "solver.newton_max_iter",
            "a positive integer")

    spec = ModelSpec(
        variant=variant, alpha=alpha, epsilon=epsilon, potential=potential,
        mobility=mobility, grid=grid, dt=dt, n_steps=n_steps,
        initial_phi=initial_phi, initial_sigma=initial_sigma,
        newton_tol=_number(sol, "newton_tol", "solver.", default=1e-8,
                           lo=0.0, lo_open=True),
        newton_max_iter=nmax, linear_solver=linear_solver)
    try:
        spec.validate()
    except FracchError as err:
        raise ConfigError(str(err)) from err
    return spec


def _build_observables(cfg: dict, n_steps: int) -> ObservableSet:
    o = cfg.get("observables", {})
    _reject_unknown(o, {"mass", "energy", "roughness", "snapshot_steps"},
                    "observables.")
    steps = o.get("snapshot_steps", [])
    _expect(isinstance(steps, list), "observables.snapshot_steps",
            "a list of step indices")
    obs = ObservableSet(mass=bool(o.get("mass", True)),
                        energy=bool(o.get("energy", True)),
                        roughness=bool(o.get("roughness", True)),
                        snapshot_steps=tuple(int(s) for s in steps))
    try:
        obs.validate(n_steps)
    except FracchError as err:
        raise ConfigError(str(err)) from err
    return obs


def _build_sensitivity(cfg: dict) -> dict:
    s = dict(cfg.get("sensitivity", {}))
    _reject_unknown(s, _SENS_KEYS, "sensitivity.")
    n = s.get("n_samples", 100)
    _expect(isinstance(n, int) and n >= 2, "sensitivity.n_samples",
            "an integer >= 2")
    workers = s.get("workers", 1)
    _expect(isinstance(workers, int) and workers >= 1, "sensitivity.workers",
            "a positive integer")
    priors = PriorSet()
    if "priors" in s:
        _expect(isinstance(s["priors"], dict), "sensitivity.priors",
                "an object mapping parameter names to [lo, hi]")
        merged = dict(priors.intervals)
        for name, pair in s["priors"].items():
            if name not in PARAM_NAMES:
                raise ConfigError(
                    f"unknown config key 'sensitivity.priors.{name}'")
            _expect(isinstance(pair, list) and len(pair) == 2,
                    f"sensitivity.priors.{name}", "a [lo, hi] pair")
            merged[name] = (float(pair[0]), float(pair[1]))
        try:
            priors = PriorSet(merged)
        except FracchError as err:
            raise ConfigError(str(err)) from err
    times = s.get("times")
    if times is not None:
        _expect(isinstance(times, list) and len(times) >= 1,
                "sensitivity.times", "a nonempty list of times")
        times = [float(x) for x in times]
    return {"n_samples": n, "workers": workers, "priors": priors,
            "times": times}


def _build_convergence(cfg: dict) -> dict:
    c = dict(cfg.get("convergence", {}))
    _reject_unknown(c, _CONV_KEYS, "convergence.")
    alphas = c.get("alphas", [0.3, 0.7])
    dts = c.get("dt_values", [1 / 64, 1 / 128, 1 / 256, 1 / 512, 1 / 1024])
    powers = c.get("powers", [1, 2])
    for key, seq in (("alphas", alphas), ("dt_values", dts),
                     ("powers", powers)):
        _expect(isinstance(seq, list) and len(seq) >= 1,
                f"convergence.{key}", "a nonempty list")
    return {"alphas": [float(a) for a in alphas],
            "dt_values": [float(d) for d in dts],
            "powers": [int(p) for p in powers]}


def load_config(data: dict) -> RunConfig:
    """Validate an already-parsed JSON object into a RunConfig."""
    _expect(isinstance(data, dict), "<root>", "a JSON object")
    _reject_unknown(data, _TOP_KEYS, "")
    if "preset" in data:
        name = data["preset"]
        _expect(isinstance(name, str), "preset", "a preset name")
        data = _deep_merge(expand_preset(name), {k: v for k, v in
                                                 data.items()
                                                 if k != "preset"})
    mode = data.get("mode")
    _expect(mode in ("simulate", "sensitivity", "convergence"), "mode",
            "one of 'simulate', 'sensitivity', 'convergence'")
    seed = data.get("seed", 0)
    _expect(isinstance(seed, int), "seed", "an integer")
    scale = data.get("scale", "desk")
    _expect(scale in ("desk", "paper"), "scale", "'desk' or 'paper'")
    out_dir = data.get("output_dir", "out")
    _expect(isinstance(out_dir, str), "output_dir", "a directory path")
    figures = bool(data.get("figures", True))

    cfg = RunConfig(mode=mode, seed=seed, scale=scale, output_dir=out_dir,
                    figures=figures, raw=data)
    if mode in ("simulate", "sensitivity"):
        cfg.spec = _build_model(data, seed)
        cfg.observables = _build_observables(data, cfg.spec.n_steps)
    if mode == "sensitivity":
        if not isinstance(cfg.spec.variant, Tumor):
            raise ConfigError(
                "config key 'mode': sensitivity mode requires the tumor "
                "variant")
        cfg.sensitivity = _build_sensitivity(data)
    if mode == "convergence":
        cfg.convergence = _build_convergence(data)
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    """Read, parse and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from err
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file is not valid JSON: {err}") from err
    return load_config(data)


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply repeatable ``key.path=value`` overrides to a raw config dict.

    Values parse as JSON when possible, else as strings.
    """
    out = json.loads(json.dumps(data))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form "
                              f"key.path=value")
        path, _, raw = item.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        keys = path.split(".")
        node = out
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {path!r} crosses a "
                                  f"non-object value")
        node[keys[-1]] = value
    return out
