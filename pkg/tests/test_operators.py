import numpy as np
import pytest
import scipy.sparse as sp
from scipy import special

from dskg.errors import ConfigInvalid, SupportOverflow
from dskg.geometry import SpacetimeParams, find_horizons, rw_map
from dskg.kg import _dense, inner
from dskg.operators import (ModeGrid, assemble_bundle, assemble_full_mode, assemble_profiles,
                            assemble_separable, build_cutoffs, chi_plus_minus, chi_tilde, extract_q_block,
                            smooth_step, sphere_operator, uniform_x)
from dskg.spectral import eig_hamiltonian


def _form_by_quadrature(params, hz, rw, n, fx, fmu, X=15.0, nfine=20001, nmu=60):
    """Continuous quadratic form of h0 for u = fx(x) fmu(mu), integrated on a fine grid."""
    lam, a2 = params.lam, params.a**2
    x = np.linspace(-X, X, nfine)
    pts = rw.r_of_x(x)
    r = pts.r[:, None]
    dr = pts.delta_r(hz)[:, None]
    mu, w = special.roots_legendre(nmu)

    def coeffs(m):
        dth = 1 + params.Lambda * a2 * m**2 / 3
        sig2 = (r**2 + a2) ** 2 * dth - a2 * dr * (1 - m**2)
        return dth, 1 - m**2, sig2, r**2 + a2 * m**2

    dth, s2, sig2, rho2 = coeffs(mu[None, :])
    u = fx(x)[:, None] * fmu(mu)[None, :]
    f = np.sqrt((r**2 + a2) * dth / sig2)
    radial = (r**2 + a2) * np.gradient(f * u, x, axis=0, edge_order=2) ** 2

    def gu(m):
        d, _, sg, _ = coeffs(m)
        return np.sqrt(dr * d / sg) / lam * fx(x)[:, None] * fmu(m)

    h = 1e-6
    ang = dth * s2 * ((gu(mu[None, :] + h) - gu(mu[None, :] - h)) / (2 * h)) ** 2
    pot = (n**2 * rho2**2 * dr * dth / (sig2**2 * s2)
           + rho2 * dr * dth * params.mass**2 / (lam**2 * sig2)) * u**2
    return np.trapezoid((radial + ang + pot) @ w, x)


def test_h0_form_matches_quadrature():
    p = SpacetimeParams(0.03, 1.0, 0.1, 0.2)
    hz = find_horizons(p)

    def fx(x):
        return np.exp(-x**2 / 8) * (1 + 0.2 * x)

    def fmu(m):
        return np.sqrt(1 - m**2) * (1 + 0.3 * m - 0.5 * m**2)

    ref = _form_by_quadrature(p, hz, rw_map(p, hz, x_span=40.0), 1, fx, fmu)
    errs = []
    for nx in (299, 599):
        g = ModeGrid(1, nx, 30.0, 6)
        rw = rw_map(p, hz, n_nodes=256, x_span=g.x_span + g.dx)
        basis = g.basis()
        s = assemble_full_mode(p, hz, rw, g, basis)
        coef = basis.E.T @ (basis.weights * fmu(basis.mu))
        u = np.kron(fx(g.x), coef)
        errs.append(abs(inner(s.mass, u, s.h0 @ u).real - ref) / ref)
    assert errs[1] < 5e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_angular_basis_orthonormal():
    for n in (0, 1, 3):
        b = ModeGrid(n, 8, 10.0, 7).basis()
        assert np.allclose(b.gram(), np.eye(7), atol=1e-13)


def test_sphere_eigenvalues_round_sphere(sdsk_params):
    for n in (0, 1, 2):
        w = np.linalg.eigvalsh(sphere_operator(ModeGrid(n, 8, 10.0, 6), sdsk_params))
        q = np.arange(6) + n
        assert np.allclose(w, q * (q + 1), atol=1e-10)


def test_uniform_grid():
    x = uniform_x(9, 5.0)
    assert x[0] == pytest.approx(-4.0) and x[-1] == pytest.approx(4.0)
    with pytest.raises(ConfigInvalid):
        ModeGrid(1, 2, 5.0, 4)


def test_full_mode_symmetric_and_nonnegative(small_bundle):
    full = small_bundle.full
    assert full.symmetry_defect(full.h0) <= 1e-12
    assert full.symmetry_defect(full.k) <= 1e-12
    assert full.min_eig_h0 > 0
    assert all(small_bundle.checks.values())


def test_k_vanishes_without_rotation(schwarzschild_bundle):
    assert np.max(np.abs(_dense(schwarzschild_bundle.full.k))) == 0.0
    assert schwarzschild_bundle.ell == 0.0


def test_k_tails(kerr_params, kerr_horizons):
    g = ModeGrid(1, 399, 60.0, 4)
    b = assemble_bundle(kerr_params, g, Q=4)
    kd = np.real(np.diag(_dense(b.full.k))).reshape(g.nx, 4)
    # k -> 0 near the outer horizon and -> ell near the inner one
    assert np.max(np.abs(kd[-1])) < 1e-3
    assert np.max(np.abs(kd[0] - b.ell)) < 1e-3 * abs(b.ell) + 1e-8
    assert b.ell == pytest.approx(kerr_horizons.omega_plus - kerr_horizons.omega_minus, rel=1e-14)


def test_separable_equals_full_without_rotation(schwarzschild_bundle):
    b = schwarzschild_bundle
    for q in range(b.Q):
        block = extract_q_block(b, b.full.h0, q).toarray()
        sep = _dense(b.separable[q].h0)
        assert np.max(np.abs(block - sep)) <= 1e-10 * np.max(np.abs(sep))
    assert np.max(np.abs(_dense(b.comparison_plus.h0 - b.full.h0))) <= 1e-10 * b.full.h0_norm


def test_cutoff_identities():
    x = uniform_x(399, 40.0)
    cut = build_cutoffs(x, 4.0, 10.0)
    assert max(cut.identity_defects().values()) <= 1e-14
    assert np.all(cut.i_tilde[np.abs(x) <= 10.0] == 1.0)
    assert np.all(cut.i_tilde[np.abs(x) >= 20.0] == 0.0)
    assert smooth_step(0.0) == 0.0 and smooth_step(1.0) == 1.0
    cp, cm = chi_plus_minus(np.array([-1.0, 1.0]))
    assert np.allclose(cp, [0, 1]) and np.allclose(cm, [1, 0])
    assert chi_tilde(0.5) == 1.0


def test_cutoff_support_overflow():
    x = uniform_x(99, 10.0)
    with pytest.raises(SupportOverflow):
        build_cutoffs(x, 3.0)
    with pytest.raises(SupportOverflow):
        build_cutoffs(x, 0.1)


def test_profile_plane_wave_dispersion(kerr_params, kerr_horizons):
    g = ModeGrid(1, 63, 8.0, 1)
    right, left = assemble_profiles(kerr_params, kerr_horizons, g, two_d=False)
    ell = kerr_horizons.ell(1)
    j = np.arange(1, g.nx + 1)
    xi = 2.0 / g.dx * np.sin(j * np.pi / (2 * (g.nx + 1)))
    # left profile roots sit at ell +- xi, the right ones at +-xi
    for sys, shift in ((right, 0.0), (left, ell)):
        w = np.sort(eig_hamiltonian(sys, vectors=False).eigenvalues.real)
        assert np.allclose(w, np.sort(np.concatenate([shift + xi, shift - xi])), atol=1e-11)


def test_plane_wave_is_an_eigenvector(kerr_params, kerr_horizons):
    g = ModeGrid(1, 63, 8.0, 1)
    right, _ = assemble_profiles(kerr_params, kerr_horizons, g, two_d=False)
    j = 5
    v = np.sin(j * np.pi * (g.x + g.x_span) / (2 * g.x_span))
    lam = (2.0 / g.dx * np.sin(j * np.pi / (2 * (g.nx + 1)))) ** 2
    assert np.allclose(right.h0 @ v, lam * v, atol=1e-10)


def test_asymptotic_hamiltonians(small_bundle):
    b = small_bundle
    assert b.checks["h_plus_min_eig"] >= 0
    assert b.checks["h_tilde_minus_min_eig"] >= 0
    jm2 = b.expand(b.cutoffs.j_minus**2)
    jp2 = b.expand(b.cutoffs.j_plus**2)
    assert np.allclose(_dense(b.asymptotic_plus.k), _dense(b.full.k) - b.ell * np.diag(jm2), atol=1e-15)
    # the gauged minus system is the l-shift of the minus one
    gk = _dense(b.asymptotic_minus_gauged.k)
    assert np.allclose(gk, _dense(b.full.k) + b.ell * np.diag(jp2) - b.ell * np.eye(b.full.dim), atol=1e-15)
    km = _dense(b.asymptotic_minus.k) - b.ell * np.eye(b.full.dim)
    assert np.allclose(_dense(b.asymptotic_minus_gauged.h), _dense(b.full.h0) - km @ km, atol=1e-12)


def test_asymptotics_without_rotation(sdsk_params):
    b = assemble_bundle(sdsk_params, ModeGrid(1, 39, 20.0, 3), Q=3, asymptotics=True)
    assert b.ell == 0.0
    for s in (b.asymptotic_plus, b.asymptotic_minus, b.asymptotic_minus_gauged):
        assert np.max(np.abs(_dense(s.k))) == 0.0


def test_assembly_locality(small_bundle):
    # block-tridiagonal in x: nothing couples nodes two apart
    h = sp.csr_matrix(small_bundle.full.h0).tocoo()
    nt = small_bundle.grid.n_theta
    assert np.max(np.abs(h.row // nt - h.col // nt)) == 1


def test_rotation_continuity():
    grid = ModeGrid(1, 59, 20.0, 4)
    base = assemble_bundle(SpacetimeParams(0.03, 1.0, 0.0), grid, Q=4).full
    diffs = []
    for a in (0.02, 0.01):
        s = assemble_bundle(SpacetimeParams(0.03, 1.0, a), grid, Q=4).full
        diffs.append(np.max(np.abs(_dense(s.k))))
    # k is linear in a to leading order
    assert diffs[0] / diffs[1] == pytest.approx(2.0, rel=0.02)
    assert np.isfinite(base.h0_norm)


def test_invalid_q():
    p = SpacetimeParams(0.03, 1.0, 0.05)
    with pytest.raises(ConfigInvalid):
        hz = find_horizons(p)
        assemble_separable(p, hz, rw_map(p, hz), ModeGrid(1, 9, 10.0, 3), Q=5)
