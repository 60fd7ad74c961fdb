import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dskg.errors import CausalWindowExceeded, ConfigInvalid
from dskg.evolution import (Stepper, boundedness_probe, decay_probe, energy_derivative_check, evolve,
                            exact_evolve, gaussian_state, propagate, random_ensemble, step)
from dskg.geometry import SpacetimeParams
from dskg.kg import (KGSystem, State, charge, energy_norms, energy_rate, gauge_transform, phi_map,
                     random_system)
from dskg.operators import ModeGrid, assemble_bundle


def _state(rng, n):
    return State(rng.standard_normal(n) + 1j * rng.standard_normal(n),
                 rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_nilpotent_generator_is_exact(rng):
    sys = KGSystem(np.zeros((3, 3)), np.zeros((3, 3)), check=False)
    psi = _state(rng, 3)
    out = step(sys, psi, 0.3)
    # e^{itH} = [[1, it], [0, 1]] when h and k vanish
    assert np.allclose(out.u0, psi.u0 + 0.3j * psi.u1, atol=1e-15)
    assert np.allclose(out.u1, psi.u1, atol=1e-15)


def test_oscillator_local_error_is_third_order():
    sys = KGSystem(np.array([[2.0]]), np.zeros((1, 1)))
    psi = State(np.array([1.0 + 0j]), np.array([0.5j]))
    errs = []
    for dt in (0.1, 0.05):
        exact = exact_evolve(sys, psi, dt)
        errs.append(np.abs(step(sys, psi, dt).vector() - exact.vector()).max())
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.05)


def test_global_error_is_second_order():
    sys = random_system(6, 3)
    psi = _state(np.random.default_rng(0), 6)
    exact = exact_evolve(sys, psi, 2.0).vector()
    errs = [np.abs(propagate(sys, psi, 2.0, dt).vector() - exact).max() for dt in (0.02, 0.01)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 0.5))
def test_charge_conserved_per_step(seed, dt):
    sys = random_system(8, seed, k_scale=1.0)
    rng = np.random.default_rng(seed)
    psi = _state(rng, 8)
    nxt = Stepper(sys, dt).step(psi)
    q0 = charge(sys, psi, psi)
    assert abs(charge(sys, nxt, nxt) - q0) <= 1e-11 * max(1.0, abs(q0), energy_norms(sys, psi).inhom)


def test_backward_step_inverts_forward(rng):
    sys = random_system(5, 1)
    psi = _state(rng, 5)
    back = Stepper(sys, -0.1).step(Stepper(sys, 0.1).step(psi))
    assert np.allclose(back.vector(), psi.vector(), atol=1e-13)


def test_energy_conserved_without_rotation(schwarzschild_bundle):
    b = schwarzschild_bundle
    psi = gaussian_state(b, width=1.5, omega=0.4)
    run = evolve(b.full, psi, 10.0, 0.1)
    assert run.energy_drift <= 1e-11
    assert run.charge_drift <= 1e-11


def test_ell_form_conserved_for_asymptotic_system(small_bundle):
    b = small_bundle
    psi = gaussian_state(b, width=1.5, omega=0.3)
    run = evolve(b.asymptotic_minus, psi, 5.0, 0.1, ells=(b.ell, 0.0))
    assert max(run.ell_drifts().values()) <= 1e-11


def test_energy_rate_vanishes_for_scalar_k(rng):
    sys = random_system(6, 2)
    sys = KGSystem(sys.h0, 0.4 * np.eye(6))
    psi = _state(rng, 6)
    assert abs(energy_rate(sys, psi)) <= 1e-13
    run = evolve(sys, psi, 3.0, 0.05)
    assert run.energy_drift <= 1e-12


def test_energy_derivative_tracks_commutator(small_bundle):
    psi = gaussian_state(small_bundle, center=-2.0, width=1.5, omega=0.3)
    rep = energy_derivative_check(small_bundle.full, psi, 2.0, 0.05)
    assert rep.max_rate > 0
    assert rep.defect < 1e-2
    assert rep.order_ratio == pytest.approx(4.0, rel=0.15)


def test_boundedness_without_rotation(schwarzschild_bundle):
    ens = random_ensemble(schwarzschild_bundle, count=3, seed=1, width=1.5)
    rep = boundedness_probe(schwarzschild_bundle.full, ens, 8.0, 0.1)
    assert rep.sup == pytest.approx(1.0, abs=1e-10)
    assert rep.plateau
    assert rep.charge_drift <= 1e-11


def test_weighted_energy_decays(sdsk_params):
    b = assemble_bundle(sdsk_params, ModeGrid(1, 239, 60.0, 3), Q=3)
    psi = gaussian_state(b, width=2.0, omega=0.5)
    rep = decay_probe(b.full, psi, b.full.w_inv, 40.0, 0.1, record_every=10)
    assert rep.decay_factor < 0.05
    assert np.all(np.isfinite(rep.weighted_energy))


def test_causal_window_and_bad_steps(schwarzschild_bundle):
    psi = gaussian_state(schwarzschild_bundle, width=1.0)
    with pytest.raises(CausalWindowExceeded):
        evolve(schwarzschild_bundle.full, psi, 40.0, 0.1)
    with pytest.raises(ConfigInvalid):
        evolve(schwarzschild_bundle.full, psi, 1.05, 0.1)
    with pytest.raises(ConfigInvalid):
        Stepper(schwarzschild_bundle.full, 0.0)


def test_negative_time_runs_backward(schwarzschild_bundle):
    b = schwarzschild_bundle
    psi = gaussian_state(b, width=1.5)
    run = evolve(b.full, psi, -2.0, 0.1)
    assert run.times[-1] == pytest.approx(-2.0)
    fwd = propagate(b.full, run.final, 2.0, 0.1)
    assert np.allclose(fwd.vector(), psi.vector(), atol=1e-12)


def test_rotation_changes_energy():
    b = assemble_bundle(SpacetimeParams(0.03, 1.0, 0.2), ModeGrid(1, 119, 30.0, 4), Q=4)
    psi = gaussian_state(b, center=-4.0, width=2.0, omega=-0.3 * np.sign(b.ell))
    run = evolve(b.full, psi, 4.0, 0.05)
    assert run.energy_drift > 1e-6
    assert run.charge_drift <= 1e-11


def test_gauge_covariance(rng):
    sys = random_system(6, 21)
    ell = 0.6
    psi = _state(rng, 6)
    t = 2.0
    lhs = phi_map(ell, exact_evolve(gauge_transform(sys, ell), phi_map(-ell, psi), t))
    rhs = exact_evolve(sys, psi, t).scale(np.exp(-1j * ell * t))
    assert np.allclose(lhs.vector(), rhs.vector(), atol=1e-10)
    # the stepper obeys the same identity up to its phase error
    lhs = phi_map(ell, propagate(gauge_transform(sys, ell), phi_map(-ell, psi), t, 0.01))
    assert np.max(np.abs(lhs.vector() - rhs.vector())) < 1e-3
