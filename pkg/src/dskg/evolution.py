"""Time evolution of Psi' = iH Psi by Cayley (implicit midpoint) steps.

The step Psi+ = (1 - i tau H)^{-1}(1 + i tau H) Psi, tau = dt/2, is reduced
to one N x N solve per step: with r = (1 + i tau H) Psi,
    (1 + tau^2 h - 2 i tau k) b+ = r_b + i tau h r_a,   a+ = r_a + i tau b+.
The matrix is factored once per (system, dt).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CausalWindowExceeded, ConfigInvalid, SolverFailure
from .kg import (KGSystem, State, _dense, _eye_like, _is_sparse, charge, ell_form, energy_norms,
                 energy_rate, hamiltonian_matrix, inner)


class Stepper:
    """Cayley propagator for a fixed system and signed step dt."""

    def __init__(self, sys: KGSystem, dt: float):
        if dt == 0 or not np.isfinite(dt):
            raise ConfigInvalid("dt must be a nonzero finite number")
        self.sys = sys
        self.dt = float(dt)
        tau = 0.5 * self.dt
        self.tau = tau
        eye = _eye_like(sys.h, sys.dim)
        m = eye + tau**2 * sys.h - 2j * tau * sys.k
        try:
            if _is_sparse(m):
                self._lu = spla.splu(sp.csc_matrix(m, dtype=complex))
                self._solve = self._lu.solve
            else:
                lu = sla.lu_factor(np.asarray(m, dtype=complex), check_finite=False)
                self._solve = lambda b: sla.lu_solve(lu, b, check_finite=False)
        except (RuntimeError, np.linalg.LinAlgError) as exc:
            raise SolverFailure(f"Cayley matrix factorization failed: {exc}") from exc

    def step(self, psi: State) -> State:
        s, tau = self.sys, self.tau
        ra = psi.u0 + 1j * tau * psi.u1
        hu0 = s.h @ psi.u0
        rb = psi.u1 + 1j * tau * (hu0 + 2.0 * (s.k @ psi.u1))
        b = self._solve(np.asarray(rb + 1j * tau * (s.h @ ra), dtype=complex))
        if not np.all(np.isfinite(b)):
            raise SolverFailure("non-finite values in Cayley step")
        return State(ra + 1j * tau * b, b)

    def run(self, psi: State, n_steps: int) -> State:
        for _ in range(n_steps):
            psi = self.step(psi)
        return psi


def step(sys: KGSystem, psi: State, dt: float) -> State:
    """One implicit-midpoint step."""
    if dt <= 0:
        raise ConfigInvalid("dt must be positive")
    return Stepper(sys, dt).step(psi)


def exact_evolve(sys: KGSystem, psi: State, t: float) -> State:
    """e^{itH} psi via a Krylov/Taylor action of the matrix exponential."""
    hm = hamiltonian_matrix(sys)
    hm = sp.csr_matrix(hm, dtype=complex) if _is_sparse(hm) else np.asarray(hm, dtype=complex)
    v = psi.vector()
    if _is_sparse(hm):
        out = spla.expm_multiply(1j * t * hm, v)
    else:
        out = sla.expm(1j * t * hm) @ v
    return State.from_vector(out)


# causal window ---------------------------------------------------------------------
def support_radius(sys: KGSystem, psi: State, rel_tol=1e-12):
    """Largest |x| where the datum exceeds rel_tol of its maximum."""
    lay = sys.grid
    if lay is None:
        return 0.0
    amp = np.abs(psi.u0) + np.abs(psi.u1)
    if amp.ndim > 1:
        amp = amp.max(axis=tuple(range(1, amp.ndim)))
    amp = amp.reshape(lay.nx, -1).max(axis=1)
    top = amp.max()
    if top == 0:
        return 0.0
    return float(np.max(np.abs(lay.x[amp > rel_tol * top])))


def check_causal(sys: KGSystem, psi: State, T: float, margin=2.0):
    lay = sys.grid
    if lay is None:
        return
    rad = support_radius(sys, psi)
    if abs(T) + rad + margin > lay.span:
        raise CausalWindowExceeded(f"T={abs(T):g} + support {rad:.3g} + margin {margin:g} > X={lay.span:g}")


# runs -----------------------------------------------------------------------------
@dataclass
class EvolutionRun:
    dt: float
    T: float
    times: np.ndarray
    charge: np.ndarray
    hom_energy: np.ndarray
    inhom_energy: np.ndarray
    ell_forms: dict = field(default_factory=dict)
    weighted_energy: np.ndarray | None = None
    final: State | None = None
    trajectory: list | None = None

    @property
    def sup_norm_ratio(self):
        return np.sqrt(self.hom_energy / self.hom_energy[0])

    def relative_drift(self, series):
        s = np.asarray(series)
        return float(np.max(np.abs(s - s[0])) / max(abs(self.hom_energy[0]), abs(s[0]), 1e-300))

    @property
    def charge_drift(self):
        return self.relative_drift(self.charge)

    def ell_drifts(self):
        return {k: self.relative_drift(v) for k, v in self.ell_forms.items()}

    @property
    def energy_drift(self):
        return self.relative_drift(self.hom_energy)

    @property
    def growth_factor(self):
        return float(self.hom_energy[-1] / self.hom_energy[0])

    def rows(self):
        ells = sorted(self.ell_forms)
        w = self.weighted_energy if self.weighted_energy is not None else np.full(self.times.size, np.nan)
        ratio = self.sup_norm_ratio
        out = []
        for i, t in enumerate(self.times):
            ellv = self.ell_forms[ells[0]][i].real if ells else np.nan
            out.append((float(t), float(self.charge[i].real), float(self.charge[i].imag), float(ellv),
                        float(self.hom_energy[i]), float(self.inhom_energy[i]), float(w[i]), float(ratio[i])))
        return out

    def summary(self):
        return {
            "dt": self.dt,
            "T": self.T,
            "samples": int(self.times.size),
            "chargeDrift": self.charge_drift,
            "ellFormDrift": {f"{k:.17g}": v for k, v in self.ell_drifts().items()},
            "homEnergyDrift": self.energy_drift,
            "growthFactor": self.growth_factor,
            "maxNormRatio": float(np.max(self.sup_norm_ratio)),
        }


def _monitor(sys, psi, ells, weight):
    en = energy_norms(sys, psi)
    q = charge(sys, psi, psi)
    ef = {ell: ell_form(sys, ell, psi, psi) for ell in ells}
    we = None
    if weight is not None:
        we = energy_norms(sys, psi.multiply(weight)).hom
    return q, en.hom, en.inhom, ef, we


def evolve(sys: KGSystem, psi0: State, T: float, dt: float, ells=(), weight=None, record_every=1,
           store="probes", causal=True, margin=2.0, stepper: Stepper | None = None) -> EvolutionRun:
    """Integrate to time T (negative T runs backward) with monitors."""
    if dt <= 0:
        raise ConfigInvalid("dt must be positive")
    n_steps = int(round(abs(T) / dt))
    if abs(n_steps * dt - abs(T)) > 1e-9 * max(1.0, abs(T)):
        raise ConfigInvalid("T must be an integer multiple of dt")
    if causal:
        check_causal(sys, psi0, T, margin)
    sgn = 1.0 if T >= 0 else -1.0
    st = stepper or Stepper(sys, sgn * dt)
    psi = psi0
    times, qs, homs, inhoms, wes = [], [], [], [], []
    efs = {ell: [] for ell in ells}
    traj = [] if store == "all" else None

    def record(t, psi):
        q, hom, inhom, ef, we = _monitor(sys, psi, ells, weight)
        times.append(t)
        qs.append(q)
        homs.append(hom)
        inhoms.append(inhom)
        wes.append(we)
        for ell in ells:
            efs[ell].append(ef[ell])
        if traj is not None:
            traj.append(psi)

    record(0.0, psi)
    for i in range(1, n_steps + 1):
        psi = st.step(psi)
        if i % record_every == 0 or i == n_steps:
            record(sgn * i * dt, psi)
    return EvolutionRun(dt, T, np.array(times), np.array(qs), np.array(homs), np.array(inhoms),
                        {k: np.array(v) for k, v in efs.items()},
                        None if weight is None else np.array(wes), psi, traj)


def propagate(sys: KGSystem, psi: State, T: float, dt: float, stepper: Stepper | None = None,
              causal=True, margin=2.0) -> State:
    """Final state only; T may be negative."""
    if causal:
        check_causal(sys, psi, T, margin)
    n_steps = int(round(abs(T) / dt))
    st = stepper or Stepper(sys, np.sign(T) * dt if T != 0 else dt)
    return st.run(psi, n_steps)


# diagnostics ------------------------------------------------------------------------
@dataclass
class EnergyDerivativeReport:
    defect: float
    defect_half: float
    order_ratio: float
    max_rate: float


def _energy_derivative_defect(sys, psi0, T, dt, causal):
    run = evolve(sys, psi0, T, dt, store="all", causal=causal)
    e = run.hom_energy
    rates = np.array([energy_rate(sys, p) for p in run.trajectory])
    d = (e[2:] - e[:-2]) / (2 * dt)
    scale = np.max(np.abs(rates))
    if scale == 0:
        return float(np.max(np.abs(d))), 0.0
    return float(np.max(np.abs(d - rates[1:-1])) / scale), float(scale)


def energy_derivative_check(sys: KGSystem, psi0: State, T: float, dt: float, causal=True) -> EnergyDerivativeReport:
    """Centered differences of the homogeneous energy against (i[h,k]u0|u0).

    The defect is max |dE/dt - rate| / max |rate| along the trajectory; it is
    also computed at dt/2 to expose the second-order convergence.
    """
    d1, scale = _energy_derivative_defect(sys, psi0, T, dt, causal)
    d2, _ = _energy_derivative_defect(sys, psi0, T, dt / 2, causal)
    return EnergyDerivativeReport(d1, d2, d1 / d2 if d2 > 0 else float("inf"), scale)


@dataclass
class BoundednessReport:
    times: np.ndarray
    ratio: np.ndarray  # max over ensemble of ||Psi(t)||/||Psi(0)|| per time
    running_sup: np.ndarray
    sup: float
    last_quartile_slope: float
    plateau: bool
    charge_drift: float

    def summary(self):
        return {"sup": self.sup, "lastQuartileSlope": self.last_quartile_slope, "plateau": self.plateau,
                "chargeDrift": self.charge_drift, "samples": int(self.times.size)}


def boundedness_probe(sys: KGSystem, ensemble: State, T: float, dt: float, record_every=1,
                      slope_tol=1e-3, causal=True) -> BoundednessReport:
    """Evolve an ensemble (columns of a batched State) and track the worst norm ratio."""
    run = evolve(sys, ensemble, T, dt, record_every=record_every, causal=causal)
    hom = np.atleast_2d(run.hom_energy.T).T
    ratio_all = np.sqrt(hom / hom[0:1])
    ratio = ratio_all.max(axis=1) if ratio_all.ndim > 1 else ratio_all
    sup_t = np.maximum.accumulate(ratio)
    t = run.times
    q = t >= t[-1] * 0.75
    slope = float(np.polyfit(t[q], sup_t[q], 1)[0]) if np.count_nonzero(q) > 1 else 0.0
    qd = np.max(np.abs(run.charge - run.charge[0:1]), axis=0) / np.max(np.abs(hom[0:1]), axis=0)
    return BoundednessReport(t, ratio, sup_t, float(sup_t[-1]), slope, slope <= slope_tol, float(np.max(qd)))


@dataclass
class DecayReport:
    times: np.ndarray
    weighted_energy: np.ndarray
    decay_factor: float
    integrated: float
    initial_energy: float

    def summary(self):
        return {"decayFactor": self.decay_factor, "integratedRatio": self.integrated / self.initial_energy,
                "samples": int(self.times.size)}


def decay_probe(sys: KGSystem, psi0: State, weight, T: float, dt: float, record_every=1, causal=True) -> DecayReport:
    """||w Psi(t)||^2 in the homogeneous energy and its time integral."""
    run = evolve(sys, psi0, T, dt, weight=weight, record_every=record_every, causal=causal)
    we = run.weighted_energy
    return DecayReport(run.times, we, float(we[-1] / np.max(we)), float(np.trapezoid(we, run.times)),
                       float(run.hom_energy[0]))


# fixtures ---------------------------------------------------------------------------
def angular_vector(bundle, q=0, basis="sphere"):
    """Angular profile: q-th eigenvector of the sphere operator or q-th modal basis function."""
    nt = bundle.grid.n_theta
    if basis == "sphere":
        return bundle.sphere_eigvecs[:, q]
    e = np.zeros(nt)
    e[q] = 1.0
    return e


def gaussian_state(bundle, center=0.0, width=2.0, q=0, omega=0.0, kx=0.0, basis="sphere") -> State:
    """u0 = exp(-(x-c)^2/(2 w^2) + i kx x) Z_q, u1 = omega u0 (frequency omega)."""
    x = bundle.grid.x
    g = np.exp(-0.5 * ((x - center) / width) ** 2 + 1j * kx * x)
    u0 = np.kron(g, angular_vector(bundle, q, basis))
    return State(u0, omega * u0)


def ergo_bump(bundle, center=-4.0, width=2.0, q=0, omega=None) -> State:
    """Bump near the inner horizon with u1 = omega u0.

    The default frequency 0.3 carries the sign opposite to ell; in the
    e^{itH} convention this is the co-rotating band where the homogeneous
    energy grows while the charge is conserved.
    """
    if omega is None:
        omega = -0.3 * np.sign(bundle.ell) if bundle.ell != 0 else 0.3
    return gaussian_state(bundle, center, width, q, omega)


def ingoing_profile(x, center, width, ell, amplitude=1.0):
    """Second-order datum (u, du/dt) with du/dt = d_x u + i ell u (moves to -x)."""
    g = amplitude * np.exp(-0.5 * ((x - center) / width) ** 2)
    dg = -(x - center) / width**2 * g
    return g.astype(complex), (dg + 1j * ell * g).astype(complex)


def random_ensemble(bundle, count=10, seed=0, radius=None, width=3.0) -> State:
    """Random smooth compact data (batched State, one column per member)."""
    rng = np.random.default_rng(seed)
    x = bundle.grid.x
    nt = bundle.grid.n_theta
    radius = bundle.grid.x_span / 4 if radius is None else radius
    cols0, cols1 = [], []
    for _ in range(count):
        c = rng.uniform(-radius + 3 * width, radius - 3 * width)
        env = np.exp(-0.5 * ((x - c) / width) ** 2)
        env[np.abs(x - c) > 6 * width] = 0.0
        a0 = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
        a1 = rng.standard_normal(nt) + 1j * rng.standard_normal(nt)
        ph = np.exp(1j * rng.uniform(-1, 1) * x)
        cols0.append(np.kron(env * ph, a0))
        cols1.append(np.kron(env * ph, a1) * 0.3)
    return State(np.stack(cols0, axis=1), np.stack(cols1, axis=1))
