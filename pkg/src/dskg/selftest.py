"""Fast deterministic property suite used by ``dskg selftest``."""

import numpy as np


def _check(name, value, tol, passed=None):
    value = float(value)
    return {"name": name, "value": value, "tolerance": float(tol),
            "passed": bool(value <= tol if passed is None else passed)}


def _algebra(seed):
    from .kg import identity_defects, random_system

    sys = random_system(40, seed)
    d = identity_defects(sys, [2j, 1 + 2j, -1 + 0.5j, 0.3j, 3 - 2j])
    return [_check(f"algebra.{k}", v, 1e-10) for k, v in d.items()]


def _pencil(seed):
    from .kg import random_system
    from .spectral import eig_hamiltonian, match_roots, pencil_roots

    sys = random_system(12, seed + 1)
    rep = eig_hamiltonian(sys)
    z = rep.eigenvalues
    center = complex(np.mean(z.real), 0.0)
    radius = 1.5 * float(np.max(np.abs(z - center)))
    roots = pencil_roots(sys, center, radius, moments=3, seed=seed)
    return [_check("pencil.residual", rep.pencil_cross_check, 1e-8),
            _check("pencil.contour_vs_eig", match_roots(z, roots), 1e-8)]


def _conservation():
    from .evolution import evolve, gaussian_state
    from .geometry import SpacetimeParams
    from .operators import ModeGrid, assemble_bundle

    b = assemble_bundle(SpacetimeParams(0.03, 1.0, 0.1, 0.0), ModeGrid(1, 119, 30.0, 4), Q=4)
    psi = gaussian_state(b, 0.0, 2.0, 0, 0.3)
    run = evolve(b.full, psi, 10.0, 0.1, ells=(b.ell,))
    out = [_check("evolve.charge_drift", run.charge_drift, 1e-9)]
    out += [_check("evolve.ell_form_drift", max(run.ell_drifts().values()), 1e-9)]
    return out


def _geometry():
    from .geometry import SpacetimeParams, find_horizons

    hz = find_horizons(SpacetimeParams(0.03, 1.0, 0.0, 0.0))
    return [_check("geometry.r_minus", abs(hz.r_minus - 2.09), 5e-3),
            _check("geometry.r_plus", abs(hz.r_plus - 8.79), 5e-3)]


def _profile(seed):
    from .operators import uniform_x
    from .scattering import inout_split, profile_evolve, random_L_datum

    x = uniform_x(479, 60.0)
    d = random_L_datum(x, -0.02, seed=seed + 1)
    i, o = inout_split(d)
    s = i + o
    split = max(np.abs(s.u0 - d.u0).max(), np.abs(s.u1 - d.u1).max())
    a = profile_evolve(profile_evolve(d, 3.0), 4.0)
    b = profile_evolve(d, 7.0)
    group = np.abs(a.u0 - b.u0).max() / np.abs(b.u0).max()
    return [_check("profile.split_exactness", split, 1e-12), _check("profile.group_law", group, 1e-10)]


def _riesz(seed):
    from .kg import _dense, hamiltonian_matrix, random_system
    from .spectral import riesz_projector

    sys = random_system(10, seed + 2)
    hm = _dense(hamiltonian_matrix(sys))
    eigs = np.linalg.eigvals(hm)
    z0 = eigs[np.argmax(eigs.real)]
    gap = np.sort(np.abs(eigs - z0))[1]
    p = riesz_projector(sys, z0, gap / 2, eigs=eigs, hm=hm)
    idem = np.linalg.norm(p @ p - p, 2) / max(np.linalg.norm(p, 2), 1.0)
    return [_check("riesz.idempotency", idem, 1e-7)]


def run_checks(seed=0):
    checks = []
    checks += _geometry()
    checks += _algebra(seed)
    checks += _pencil(seed)
    checks += _riesz(seed)
    checks += _profile(seed)
    checks += _conservation()
    return checks
