"""Command implementations behind the ``dskg`` front-end.

Each runner takes a validated :class:`RunConfig` and returns
``(summary_dict, csv_header, csv_rows)``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid

COMMANDS = ("geometry", "assemble", "spectrum", "resonance-scan", "evolve", "superradiance", "scatter", "selftest")


@dataclass
class RunConfig:
    command: str = "selftest"
    Lambda: float = 0.03
    M: float = 1.0
    a: float = 0.05
    mass: float = 0.0
    n: int = 1
    nx: int = 199
    n_theta: int = 6
    X: float = 50.0
    dt: float = 0.1
    T: float = 20.0
    Q: int = 4
    weight: str = "q"
    weight_eps: float = 1.0
    epsilon: float | None = None
    R: float | None = None
    fixture: str = "gaussian"
    center: float = 0.0
    width: float = 2.0
    omega: float = 0.0
    q: int = 0
    ensemble_size: int = 10
    record_every: int = 1
    side: str = "both"
    comparison: str = "profile"
    T_schedule: list = field(default_factory=lambda: [6.0, 12.0, 24.0])
    carrier: float = 1.0
    cutoff_power: int = 0  # 0 picks 2 for the profile comparison and 1 for the separable one
    lambda_min: float = -3.0
    lambda_max: float = 3.0
    lambda_step: float = 0.1
    lambda_exclude: float = 0.15
    deltas: list = field(default_factory=lambda: [0.4, 0.12, 0.04])
    budget: int = 6000
    seed: int = 0


# command-specific defaults, overridden by the user's config
PRESETS = {
    "superradiance": {"a": 0.2, "n": 1, "nx": 1279, "X": 32.0, "n_theta": 6, "dt": 0.02, "T": 8.0,
                      "fixture": "ergo", "center": -4.0, "width": 2.0},
    "spectrum": {"nx": 96, "n_theta": 12, "X": 30.0},
    "resonance-scan": {"nx": 399, "X": 100.0, "n_theta": 8, "weight": "cosh", "weight_eps": 0.1},
    "scatter": {"nx": 799, "X": 100.0, "n_theta": 4, "Q": 4, "T_schedule": [8.0, 16.0, 32.0]},
    "evolve": {"T": 20.0},
}

_CHOICES = {
    "weight": ("q", "cosh"),
    "fixture": ("gaussian", "ergo", "ensemble"),
    "side": ("left", "right", "both"),
    "comparison": ("profile", "separable"),
}


def build_config(command, doc=None, seed=None) -> RunConfig:
    """Merge preset and user document into a validated RunConfig."""
    if command not in COMMANDS:
        raise ConfigInvalid(f"unknown command {command!r}")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    doc = dict(doc or {})
    doc.pop("command", None)
    unknown = sorted(set(doc) - names)
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {', '.join(unknown)}")
    merged = {**PRESETS.get(command, {}), **doc, "command": command}
    if seed is not None:
        merged["seed"] = seed
    cfg = RunConfig()
    for f in dataclasses.fields(RunConfig):
        if f.name in merged:
            setattr(cfg, f.name, _coerce(f.name, merged[f.name], getattr(cfg, f.name)))
    validate(cfg)
    return cfg


def _coerce(name, value, default):
    try:
        if isinstance(default, bool):
            return bool(value)
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float) or (default is None and value is not None):
            return float(value)
        if isinstance(default, list):
            return [float(v) for v in value]
        if isinstance(default, str):
            if not isinstance(value, str):
                raise ValueError
            return value
    except (TypeError, ValueError):
        raise ConfigInvalid(f"bad value for {name}: {value!r}") from None
    return value


def validate(cfg: RunConfig):
    def need(cond, msg):
        if not cond:
            raise ConfigInvalid(msg)

    for name in ("Lambda", "M", "a", "mass", "X", "dt", "T", "weight_eps", "width", "carrier",
                 "lambda_min", "lambda_max", "lambda_step", "lambda_exclude", "center", "omega"):
        need(math.isfinite(getattr(cfg, name)), f"{name} must be finite")
    need(cfg.Lambda > 0 and cfg.M > 0, "Lambda and M must be positive")
    need(cfg.mass >= 0, "mass must be nonnegative")
    need(cfg.nx >= 5, "nx must be at least 5")
    need(1 <= cfg.n_theta <= 64, "n_theta must lie in [1, 64]")
    need(cfg.X > 0 and cfg.dt > 0 and cfg.T >= 0, "X, dt must be positive and T nonnegative")
    need(1 <= cfg.Q <= cfg.n_theta, "Q must lie in [1, n_theta]")
    need(0 <= cfg.q < cfg.n_theta, "q must lie in [0, n_theta)")
    need(cfg.width > 0 and cfg.weight_eps > 0, "width and weight_eps must be positive")
    need(cfg.ensemble_size >= 1 and cfg.record_every >= 1 and cfg.budget >= 1, "counts must be positive")
    need(cfg.lambda_step > 0 and cfg.lambda_max > cfg.lambda_min, "bad lambda grid")
    need(all(d > 0 for d in cfg.deltas) and len(cfg.deltas) >= 2, "deltas: at least two positive values")
    need(cfg.cutoff_power in (0, 1, 2), "cutoff_power must be 0 (automatic), 1 or 2")
    ts = cfg.T_schedule
    need(len(ts) >= 2 and all(t > 0 for t in ts) and all(b > a for a, b in zip(ts, ts[1:])),
         "T_schedule must be positive and strictly increasing")
    for key, allowed in _CHOICES.items():
        need(getattr(cfg, key) in allowed, f"{key} must be one of {allowed}")
    for key in ("epsilon", "R"):
        v = getattr(cfg, key)
        need(v is None or (math.isfinite(v) and v > 0), f"{key} must be positive")


# shared builders ------------------------------------------------------------
def _params(cfg):
    from .geometry import SpacetimeParams

    return SpacetimeParams(cfg.Lambda, cfg.M, cfg.a, cfg.mass)


def _bundle(cfg, **kw):
    from .operators import ModeGrid, assemble_bundle

    grid = ModeGrid(cfg.n, cfg.nx, cfg.X, cfg.n_theta)
    return assemble_bundle(_params(cfg), grid, epsilon=cfg.epsilon, R=cfg.R, Q=cfg.Q,
                           weight=cfg.weight, weight_eps=cfg.weight_eps, **kw)


def _fixture(cfg, bundle):
    from .evolution import ergo_bump, gaussian_state, random_ensemble

    if cfg.fixture == "ergo":
        return ergo_bump(bundle, cfg.center, cfg.width, cfg.q)
    if cfg.fixture == "ensemble":
        return random_ensemble(bundle, cfg.ensemble_size, cfg.seed)
    return gaussian_state(bundle, cfg.center, cfg.width, cfg.q, cfg.omega)


# runners --------------------------------------------------------------------
def run_geometry(cfg):
    from .errors import NoErgoregion
    from .geometry import ergo_bounds, find_horizons, rw_map

    p = _params(cfg)
    hz = find_horizons(p)
    rw = rw_map(p, hz, x_span=cfg.X)
    out = {
        "r_minus": hz.r_minus, "r_plus": hz.r_plus, "r_max": hz.r_max,
        "Omega_minus": hz.omega_minus, "Omega_plus": hz.omega_plus,
        "kappa_minus": hz.kappa_minus, "kappa_plus": hz.kappa_plus,
        "alpha_minus": hz.alpha_minus, "alpha_plus": hz.alpha_plus,
        "ell": hz.ell(cfg.n),
    }
    try:
        out["ergo_equator"] = list(ergo_bounds(p, hz, np.pi / 2))
    except NoErgoregion:
        out["ergo_equator"] = None
    xs = np.linspace(-cfg.X, cfg.X, 41)
    pts = rw.r_of_x(xs)
    rows = [(float(x), float(r), float(d)) for x, r, d in zip(xs, pts.r, pts.delta_r(hz))]
    return out, ("x", "r", "delta_r"), rows


def run_assemble(cfg):
    b = _bundle(cfg, asymptotics=True)
    s = b.summary()
    rows = [(int(i), float(v)) for i, v in enumerate(b.sphere_eigvals)]
    return s, ("index", "sphere_eigenvalue"), rows


def run_spectrum(cfg):
    from .spectral import eig_hamiltonian

    b = _bundle(cfg)
    rep = eig_hamiltonian(b.full, budget=cfg.budget)
    order = np.lexsort((rep.eigenvalues.imag, rep.eigenvalues.real))
    rows = [(float(rep.eigenvalues[i].real), float(rep.eigenvalues[i].imag), float(rep.residuals[i]),
             float(rep.pencil_residuals[i])) for i in order]
    return rep.summary(), ("re", "im", "residual", "pencil_residual"), rows


def run_resonance_scan(cfg):
    from .spectral import weighted_resolvent_scan

    b = _bundle(cfg)
    w = b.full.w_inv if b.full.w_inv is not None else np.ones(b.full.dim)
    lam = np.round(np.arange(cfg.lambda_min, cfg.lambda_max + cfg.lambda_step / 2, cfg.lambda_step), 12)
    lam = lam[np.abs(lam) >= cfg.lambda_exclude]
    scan = weighted_resolvent_scan(b.full, w, lam, cfg.deltas, seed=cfg.seed)
    return scan.summary(), ("lambda", "delta", "norm"), scan.rows()


def run_evolve(cfg):
    from .evolution import evolve

    b = _bundle(cfg)
    psi = _fixture(cfg, b)
    if psi.u0.ndim > 1:
        psi = psi.column(0)
    run = evolve(b.full, psi, cfg.T, cfg.dt, ells=(b.ell,), record_every=cfg.record_every)
    header = ("t", "charge_re", "charge_im", "ell_form", "hom_energy", "inhom_energy", "weighted", "norm_ratio")
    return run.summary(), header, run.rows()


def run_superradiance(cfg):
    from .evolution import energy_derivative_check, evolve

    b = _bundle(cfg)
    psi = _fixture(cfg, b)
    run = evolve(b.full, psi, cfg.T, cfg.dt, ells=(b.ell,), record_every=cfg.record_every)
    ed = energy_derivative_check(b.full, psi, cfg.T, cfg.dt)
    s = run.summary()
    s.update({"ell": b.ell, "energyDerivativeDefect": ed.defect, "energyDerivativeDefectHalf": ed.defect_half,
              "orderRatio": ed.order_ratio, "witness": bool(run.growth_factor > 1.0)})
    header = ("t", "charge_re", "charge_im", "ell_form", "hom_energy", "inhom_energy", "weighted", "norm_ratio")
    return s, header, run.rows()


def run_scatter(cfg):
    from .scattering import inverse_wave_operator, profile_fixture, scattering_fixture, wave_operator

    b = _bundle(cfg)
    sides = ("left", "right") if cfg.side == "both" else (cfg.side,)
    out, rows = {}, []
    for side in sides:
        left = side == "left"
        center = -25.0 if left else 10.0
        if cfg.comparison == "profile":
            datum = profile_fixture(b, "in" if left else "out", center, 2.5, cfg.q, side, carrier=cfg.carrier)
            power = cfg.cutoff_power or 2
        else:
            datum = scattering_fixture(b, side, center, 30.0, 2.5, cfg.q, cfg.carrier,
                                       radius=30.0 if left else 45.0)
            power = cfg.cutoff_power or 1
        w = wave_operator(b, side, datum, cfg.T_schedule, cfg.dt, cfg.comparison, power=power, Q=cfg.Q)
        full_datum = scattering_fixture(b, side, center, 30.0, 2.5, cfg.q, cfg.carrier,
                                        radius=30.0 if left else 45.0, generator="full")
        inv = inverse_wave_operator(b, side, full_datum, cfg.T_schedule, cfg.dt, cfg.comparison, power=power)
        out[side] = {"wave": w.summary(), "inverse": inv.summary()}
        for kind, rep in (("wave", w), ("inverse", inv)):
            rows += [(side, kind, *r) for r in rep.rows()]
    return out, ("side", "operator", "T", "gap", "norm_ratio"), rows


def run_selftest(cfg):
    from .selftest import run_checks

    checks = run_checks(seed=cfg.seed)
    rows = [(c["name"], c["value"], c["tolerance"], c["passed"]) for c in checks]
    s = {"passed": all(c["passed"] for c in checks), "count": len(checks),
         "failed": [c["name"] for c in checks if not c["passed"]]}
    return s, ("check", "value", "tolerance", "passed"), rows


RUNNERS = {
    "geometry": run_geometry, "assemble": run_assemble, "spectrum": run_spectrum,
    "resonance-scan": run_resonance_scan, "evolve": run_evolve, "superradiance": run_superradiance,
    "scatter": run_scatter, "selftest": run_selftest,
}
