"""Profile dynamics, in/out decomposition and finite-time wave operators.

Profile data are second-order pairs (u, du/dt) on the x grid, one column per
retained angular component. With g = du/dt - i ell u and I its
antiderivative (I = 0 at the left end), the profile equation has the
explicit solution
    u(t) = e^{i ell t} (F(x + t) + G(x - t)),  F = (u + I)/2,  G = (u - I)/2.
Antiderivatives, derivatives and translations are spectral (FFT) on the
grid's period, so differentiation inverts integration exactly and the
translation group law holds to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CausalWindowExceeded, ConfigInvalid, NotInFin, NotInL, SupportOverflow
from .evolution import Stepper, check_causal, support_radius
from .kg import KGSystem, State, energy_norms


# spectral calculus on the grid ------------------------------------------------------
def _wavenumbers(nx, dx):
    return 2 * np.pi * np.fft.fftfreq(nx, d=dx)


def _fourier_apply(f, dx, mult):
    """ifft(mult(xi) * fft(f)) along axis 0, for 1D or 2D arrays."""
    f = np.asarray(f, dtype=complex)
    f2 = f.reshape(f.shape[0], -1)
    xi = _wavenumbers(f.shape[0], dx)[:, None]
    return np.fft.ifft(mult(xi) * np.fft.fft(f2, axis=0), axis=0).reshape(f.shape)


def spectral_derivative(f, dx):
    return _fourier_apply(f, dx, lambda xi: 1j * xi)


def staggered_derivative(f, dx):
    """Half-step centered difference (f(x+dx/2) - f(x-dx/2))/dx, applied spectrally.

    Its square is the second-order finite-difference Laplacian, so data with
    du/dt = +-(this) u move rigidly under the discrete free wave equation.
    """
    return _fourier_apply(f, dx, lambda xi: 2j * np.sin(0.5 * xi * dx) / dx)


def antiderivative(g, dx):
    """Spectral antiderivative of a zero-mean g, normalized to vanish at the first node."""
    def inv(xi):
        safe = np.where(xi == 0, 1.0, xi)
        return np.where(xi == 0, 0.0, 1.0 / (1j * safe))

    out = _fourier_apply(g, dx, inv)
    return out - out[0:1]


def translate(f, shift, dx):
    """f(x + shift) on the periodic grid."""
    return _fourier_apply(f, dx, lambda xi: np.exp(1j * xi * shift))


def mean_free(g, x, width=None):
    """Subtract a wide Gaussian multiple so that sum(g) dx = 0 per column."""
    g = np.asarray(g, dtype=complex)
    x = np.asarray(x)
    span = x[-1] - x[0]
    width = span / 12 if width is None else width
    bump = np.exp(-0.5 * ((x - 0.5 * (x[0] + x[-1])) / width) ** 2)
    total = g.sum(axis=0)
    return g - np.multiply.outer(bump, total / bump.sum()).reshape(g.shape)


# profile data -------------------------------------------------------------------------
@dataclass
class ProfileDatum:
    """Second-order data (u, du/dt) on a uniform x grid; columns = angular components."""

    x: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    ell: float = 0.0
    q: object = None
    l1_tol: float = 1e-10

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=complex)
        self.u1 = np.asarray(self.u1, dtype=complex)
        if self.u0.shape != self.u1.shape or self.u0.shape[0] != len(self.x):
            raise ConfigInvalid("profile datum arrays do not match the grid")

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def g(self):
        return self.u1 - 1j * self.ell * self.u0

    def mean_defect(self):
        g = self.g
        l1 = np.sum(np.abs(g), axis=0) * self.dx
        m = np.abs(np.sum(g, axis=0)) * self.dx
        top = np.max(l1) if np.size(l1) else 0.0
        if top == 0:
            return 0.0
        # columns that are numerically empty are measured against the largest one
        return float(np.max(m / np.maximum(l1, 1e-6 * top)))

    @property
    def in_L(self):
        return bool(self.mean_defect() <= self.l1_tol)

    def to_state(self) -> State:
        return State(self.u0.reshape(-1), (-1j * self.u1).reshape(-1))

    @classmethod
    def from_state(cls, x, psi: State, ell=0.0, n_comp=1, q=None):
        u0 = psi.u0.reshape(len(x), n_comp)
        u1 = (1j * psi.u1).reshape(len(x), n_comp)
        if n_comp == 1:
            u0, u1 = u0[:, 0], u1[:, 0]
        return cls(np.asarray(x), u0, u1, ell, q)

    def replace(self, u0, u1):
        return ProfileDatum(self.x, u0, u1, self.ell, self.q, self.l1_tol)

    def __add__(self, other):
        return self.replace(self.u0 + other.u0, self.u1 + other.u1)

    def __sub__(self, other):
        return self.replace(self.u0 - other.u0, self.u1 - other.u1)

    def energy(self):
        """||u1 - ell u0||^2 + ||d_x u0||^2 (free profile energy)."""
        du = spectral_derivative(self.u0, self.dx)
        w = self.u1 - 1j * self.ell * self.u0
        return float(self.dx * (np.sum(np.abs(w) ** 2) + np.sum(np.abs(du) ** 2)))


def _support_ok(d: ProfileDatum, t, margin):
    amp = np.abs(d.u0) + np.abs(d.u1)
    if amp.ndim > 1:
        amp = amp.max(axis=1)
    top = amp.max()
    if top == 0:
        return
    idx = np.flatnonzero(amp > 1e-12 * top)
    lo, hi = d.x[idx[0]], d.x[idx[-1]]
    span_lo, span_hi = d.x[0] - d.dx, d.x[-1] + d.dx
    if lo - abs(t) - margin < span_lo or hi + abs(t) + margin > span_hi:
        raise SupportOverflow(f"support [{lo:.3g}, {hi:.3g}] translated by {abs(t):g} leaves the grid")


def profile_evolve(d: ProfileDatum, t: float, check_support=True, margin=0.0) -> ProfileDatum:
    """Explicit solution of the profile equation at time t."""
    if not d.in_L:
        raise NotInL(f"mean of u1 - i ell u0 is {d.mean_defect():.3e} of its L1 norm")
    if check_support:
        _support_ok(d, t, margin)
    dx = d.dx
    integ = antiderivative(d.g, dx)
    f = 0.5 * (d.u0 + integ)
    g = 0.5 * (d.u0 - integ)
    fp = translate(f, t, dx)
    gm = translate(g, -t, dx)
    ph = np.exp(1j * d.ell * t)
    u = ph * (fp + gm)
    ut = 1j * d.ell * u + ph * (spectral_derivative(fp, dx) - spectral_derivative(gm, dx))
    return d.replace(u, ut)


def inout_split(d: ProfileDatum):
    """(in, out) with in moving toward -x (du/dt = d_x u + i ell u) and out toward +x."""
    if not d.in_L:
        raise NotInL(f"mean of u1 - i ell u0 is {d.mean_defect():.3e} of its L1 norm")
    dx = d.dx
    g = d.g
    integ = antiderivative(g, dx)
    du = spectral_derivative(d.u0, dx)
    u0_in = 0.5 * (d.u0 + integ)
    u0_out = 0.5 * (d.u0 - integ)
    u1_in = 0.5 * (g + du) + 1j * d.ell * u0_in
    u1_out = 0.5 * (g - du) + 1j * d.ell * u0_out
    return d.replace(u0_in, u1_in), d.replace(u0_out, u1_out)


def ingoing_defect(d: ProfileDatum):
    """max |du/dt - d_x u - i ell u| relative to max |du/dt|."""
    r = d.u1 - spectral_derivative(d.u0, d.dx) - 1j * d.ell * d.u0
    return float(np.max(np.abs(r)) / max(np.max(np.abs(d.u1)), 1e-300))


# angular projection ---------------------------------------------------------------------
def fin_project(bundle, psi: State, Q=None, ell=None):
    """Components of a 2D datum on the sphere-operator eigenvectors q < Q."""
    nt = bundle.grid.n_theta
    Q = nt if Q is None else Q
    if Q > nt:
        raise ConfigInvalid(f"Q={Q} exceeds n_theta={nt}")
    v = bundle.sphere_eigvecs
    x = bundle.grid.x
    ell = bundle.ell if ell is None else ell
    u0 = psi.u0.reshape(len(x), nt) @ v
    u1 = (1j * psi.u1).reshape(len(x), nt) @ v
    return [ProfileDatum(x, u0[:, q], u1[:, q], ell, q) for q in range(Q)]


def fin_reassemble(bundle, parts) -> State:
    nt = bundle.grid.n_theta
    nx = bundle.grid.nx
    v = bundle.sphere_eigvecs
    c0 = np.zeros((nx, nt), dtype=complex)
    c1 = np.zeros((nx, nt), dtype=complex)
    for p in parts:
        c0[:, p.q] += p.u0
        c1[:, p.q] += p.u1
    return State((c0 @ v.T).reshape(-1), (-1j * (c1 @ v.T)).reshape(-1))


def fin_residual(bundle, psi: State, Q):
    """Relative size of the angular components with q >= Q."""
    nt = bundle.grid.n_theta
    v = bundle.sphere_eigvecs
    c0 = psi.u0.reshape(-1, nt) @ v
    c1 = psi.u1.reshape(-1, nt) @ v
    tot = np.sum(np.abs(c0) ** 2 + np.abs(c1) ** 2)
    tail = np.sum(np.abs(c0[:, Q:]) ** 2 + np.abs(c1[:, Q:]) ** 2)
    return float(np.sqrt(tail / tot)) if tot > 0 else 0.0


def profile_datum_2d(bundle, psi: State, ell) -> ProfileDatum:
    """View a 2D state as a profile datum in the sphere eigenbasis (all columns)."""
    parts = fin_project(bundle, psi, None, ell)
    return ProfileDatum(bundle.grid.x, np.stack([p.u0 for p in parts], axis=1),
                        np.stack([p.u1 for p in parts], axis=1), ell, "all")


def profile_to_state(bundle, d: ProfileDatum) -> State:
    v = bundle.sphere_eigvecs
    u0 = d.u0 if d.u0.ndim > 1 else d.u0[:, None]
    u1 = d.u1 if d.u1.ndim > 1 else d.u1[:, None]
    return State((u0 @ v.T).reshape(-1), (-1j * (u1 @ v.T)).reshape(-1))


# wave operators ---------------------------------------------------------------------------
@dataclass
class WaveOpReport:
    side: str
    comparison: str
    T_schedule: np.ndarray
    approximants: list = field(repr=False)
    norms: np.ndarray = None
    cauchy_gaps: np.ndarray = None
    datum_norm: float = 0.0
    kappa_fit: float = float("nan")
    kappa_geometric: float = float("nan")
    limit_norm: float = float("nan")
    extrapolated_error: float = float("nan")

    def __post_init__(self):
        t = np.asarray(self.T_schedule, dtype=float)
        if np.any(np.diff(t) <= 0):
            raise ConfigInvalid("T schedule must be strictly increasing")

    @property
    def gap_ratios(self):
        g = self.cauchy_gaps
        return g[:-1] / g[1:] if g.size > 1 else np.array([])

    @property
    def norm_ratios(self):
        return self.norms / self.datum_norm if self.datum_norm > 0 else self.norms

    def decreases(self, factor=2.0, floor=1e-12):
        """True if each gap shrinks by ``factor`` or already sits below floor * datum norm."""
        g = self.cauchy_gaps
        small = floor * max(self.datum_norm, 1.0)
        return all(b <= small or a >= factor * b for a, b in zip(g[:-1], g[1:]))

    def rows(self):
        out = []
        for i, t in enumerate(self.T_schedule):
            gap = self.cauchy_gaps[i - 1] if i > 0 else float("nan")
            out.append((float(t), float(gap), float(self.norm_ratios[i])))
        return out

    def summary(self):
        return {
            "side": self.side,
            "comparison": self.comparison,
            "T": [float(t) for t in self.T_schedule],
            "cauchyGaps": [float(g) for g in self.cauchy_gaps],
            "gapRatios": [float(r) for r in self.gap_ratios],
            "decreasing": bool(self.decreases()),
            "normRatios": [float(r) for r in self.norm_ratios],
            "limitNorm": self.limit_norm,
            "extrapolatedError": self.extrapolated_error,
            "kappaFit": self.kappa_fit,
            "kappaGeometric": self.kappa_geometric,
        }


def _energy_norm(sys: KGSystem, psi: State):
    return float(np.sqrt(max(energy_norms(sys, psi).hom, 0.0)))


def _finish_report(side, comparison, ts, approx, full, datum_norm, kappa_geo):
    norms = np.array([_energy_norm(full, a) for a in approx])
    gaps = np.array([_energy_norm(full, approx[i + 1] - approx[i]) for i in range(len(approx) - 1)])
    kfit = float("nan")
    err = float("nan")
    ok = gaps > 0
    if np.count_nonzero(ok) >= 2:
        kfit = float(-np.polyfit(np.asarray(ts[:-1])[ok], np.log(gaps[ok]), 1)[0])
    if gaps.size >= 2 and gaps[-2] > 0:
        r = gaps[-1] / gaps[-2]
        err = float(gaps[-1] * r / (1 - r)) if r < 1 else float(gaps[-1])
    elif gaps.size:
        err = float(gaps[-1])
    return WaveOpReport(side, comparison, np.asarray(ts, dtype=float), approx, norms, gaps, datum_norm,
                        kfit, kappa_geo, float(norms[-1]), err)


def _side_cutoff(bundle, side):
    c = bundle.cutoffs
    if side in ("left", "l", "minus"):
        return bundle.expand(c.i_minus), "left"
    if side in ("right", "r", "plus"):
        return bundle.expand(c.i_plus), "right"
    raise ConfigInvalid(f"unknown side {side!r}")


def _comparison_system(bundle, side, kind):
    left = side == "left"
    if kind == "profile":
        return bundle.profile_left if left else bundle.profile_right
    if kind == "separable":
        return bundle.comparison_minus if left else bundle.comparison_plus
    raise ConfigInvalid(f"unknown comparison {kind!r}")


def _check_fin_L(bundle, psi: State, Q, ell, profile=True):
    if fin_residual(bundle, psi, Q) > 1e-12:
        raise NotInFin(f"datum has angular components beyond Q={Q}")
    if not profile:
        return
    d = profile_datum_2d(bundle, psi, ell)
    if not d.in_L:
        raise NotInL(f"mean of u1 - i ell u0 is {d.mean_defect():.3e} of its L1 norm")


class _Propagators:
    """Cached Cayley steppers per (system, signed dt)."""

    def __init__(self):
        self._cache = {}

    def get(self, sys, dt):
        key = (id(sys), dt)
        if key not in self._cache:
            self._cache[key] = (Stepper(sys, dt), sys)
        return self._cache[key][0]

    def run(self, sys, psi, T, dt):
        n = int(round(abs(T) / dt))
        if abs(n * dt - abs(T)) > 1e-9 * max(1.0, abs(T)):
            raise ConfigInvalid("T must be an integer multiple of dt")
        return self.get(sys, np.sign(T) * dt).run(psi, n)


def _comparison_flow(bundle, side, kind, evolution, props):
    comp = _comparison_system(bundle, side, kind)
    ell = bundle.ell if side == "left" else 0.0
    if evolution == "formula":
        if kind != "profile":
            raise ConfigInvalid("the explicit formula exists only for the profile comparison")

        def flow(psi, T, dt):
            d = profile_datum_2d(bundle, psi, ell)
            return profile_to_state(bundle, profile_evolve(d, T))
    elif evolution == "stepper":
        def flow(psi, T, dt):
            return props.run(comp, psi, T, dt)
    else:
        raise ConfigInvalid(f"unknown comparison evolution {evolution!r}")
    return comp, ell, flow


def wave_operator(bundle, side, datum, T_schedule, dt, comparison="profile", evolution="stepper",
                  power=2, Q=None, margin=2.0) -> WaveOpReport:
    """W_T u = e^{-iTH} i^p e^{iTH_c} u for each T (H_c the comparison generator).

    The comparison flow runs forward, the cutoff i_{l/r}^p is applied, and
    the full flow runs backward. ``power`` is 2 for the profile comparison
    and 1 for the separable one.
    """
    side_i, side = _side_cutoff(bundle, side)
    props = _Propagators()
    comp, ell, flow = _comparison_flow(bundle, side, comparison, evolution, props)
    psi = datum.to_state() if isinstance(datum, ProfileDatum) else datum
    Q = bundle.Q if Q is None else Q
    _check_fin_L(bundle, psi, Q, ell, profile=comparison == "profile")
    ts = np.asarray(T_schedule, dtype=float)
    check_causal(bundle.full, psi, ts.max(), margin)
    cut = side_i**power
    approx = []
    for T in ts:
        v = flow(psi, T, dt).multiply(cut)
        approx.append(props.run(bundle.full, v, -T, dt))
    kappa = bundle.horizons.kappa_minus if side == "left" else bundle.horizons.kappa_plus
    return _finish_report(side, comparison, ts, approx, bundle.full, _energy_norm(comp, psi), kappa)


def inverse_wave_operator(bundle, side, psi0: State, T_schedule, dt, comparison="profile",
                          evolution="stepper", power=2, margin=2.0) -> WaveOpReport:
    """Omega_T psi = e^{-iTH_c} i^p e^{iTH} psi: full flow forward, cutoff, comparison backward."""
    side_i, side = _side_cutoff(bundle, side)
    props = _Propagators()
    comp, ell, flow = _comparison_flow(bundle, side, comparison, evolution, props)
    ts = np.asarray(T_schedule, dtype=float)
    check_causal(bundle.full, psi0, ts.max(), margin)
    cut = side_i**power
    approx = []
    for T in ts:
        v = props.run(bundle.full, psi0, T, dt).multiply(cut)
        approx.append(flow(v, -T, dt))
    kappa = bundle.horizons.kappa_minus if side == "left" else bundle.horizons.kappa_plus
    rep = _finish_report(side, comparison, ts, approx, comp, _energy_norm(bundle.full, psi0), kappa)
    return rep


def composition_defect(bundle, side, datum, T, dt, comparison="profile", T_inverse=None, power=2):
    """Relative comparison-energy distance between Omega_T' W_T u and u."""
    side_i, side = _side_cutoff(bundle, side)
    props = _Propagators()
    comp, _, flow = _comparison_flow(bundle, side, comparison, "stepper", props)
    psi = datum.to_state() if isinstance(datum, ProfileDatum) else datum
    T2 = T if T_inverse is None else T_inverse
    check_causal(bundle.full, psi, max(T, T2) + T, 2.0)
    cut = side_i**power
    w = props.run(bundle.full, flow(psi, T, dt).multiply(cut), -T, dt)
    back = flow(props.run(bundle.full, w, T2, dt).multiply(cut), -T2, dt)
    return _energy_norm(comp, back - psi) / _energy_norm(comp, psi)


def completeness_ratio(bundle, psi0: State, T, dt, comparison="profile", power=2):
    """(|Omega_l psi|^2 + |Omega_r psi|^2) / |psi|^2 at finite T, comparison energies."""
    props = _Propagators()
    check_causal(bundle.full, psi0, T, 2.0)
    evolved = props.run(bundle.full, psi0, T, dt)
    total = 0.0
    for side in ("left", "right"):
        side_i, side = _side_cutoff(bundle, side)
        comp, _, flow = _comparison_flow(bundle, side, comparison, "stepper", props)
        total += _energy_norm(comp, flow(evolved.multiply(side_i**power), -T, dt)) ** 2
    return total / _energy_norm(bundle.full, psi0) ** 2


def intertwining_defect(bundle, side, datum, T_schedule, s, dt, comparison="separable", power=1):
    """|W_T e^{isH_c} u - e^{isH} W_T u| / |W_T u| in the full energy, one value per T."""
    side_i, side = _side_cutoff(bundle, side)
    props = _Propagators()
    _, _, flow = _comparison_flow(bundle, side, comparison, "stepper", props)
    psi = datum.to_state() if isinstance(datum, ProfileDatum) else datum
    ts = np.asarray(T_schedule, dtype=float)
    check_causal(bundle.full, psi, ts.max() + abs(s), 2.0)
    cut = side_i**power
    shifted = flow(psi, s, dt)
    out = []
    for T in ts:
        w = props.run(bundle.full, flow(psi, T, dt).multiply(cut), -T, dt)
        a = props.run(bundle.full, flow(shifted, T, dt).multiply(cut), -T, dt)
        b = props.run(bundle.full, w, s, dt)
        out.append(_energy_norm(bundle.full, a - b) / _energy_norm(bundle.full, w))
    return np.array(out)


def separable_wave_operator(bundle, side, datum, T_schedule, dt, Q=None, margin=2.0) -> WaveOpReport:
    """Wave operator against the separable comparison, cutoff i_{+-} to the first power."""
    return wave_operator(bundle, side, datum, T_schedule, dt, comparison="separable", evolution="stepper",
                         power=1, Q=Q, margin=margin)


# fixtures -------------------------------------------------------------------------------
def profile_fixture(bundle, kind="in", center=0.0, width=2.0, q=0, side="left", amplitude=1.0, carrier=0.0,
                    discrete=True):
    """2D datum with one angular component q: in-going, out-going or a free bump.

    ``kind='in'`` moves toward -x under the comparison flow of ``side``,
    ``'out'`` toward +x, ``'bump'`` has du/dt = i ell u (splits both ways).
    A nonzero ``carrier`` wavenumber removes the low-frequency content that
    the potential would reflect. With ``discrete`` the direction is exact for
    the finite-difference comparison flow instead of the continuum one.
    """
    x = bundle.grid.x
    ell = bundle.ell if side == "left" else 0.0
    g = amplitude * np.exp(-0.5 * ((x - center) / width) ** 2 + 1j * carrier * (x - center))
    deriv = staggered_derivative if discrete else spectral_derivative
    dg = deriv(g, bundle.grid.dx)
    if kind == "in":
        ut = dg + 1j * ell * g
    elif kind == "out":
        ut = -dg + 1j * ell * g
    elif kind == "bump":
        ut = 1j * ell * g
    else:
        raise ConfigInvalid(f"unknown fixture kind {kind!r}")
    nt = bundle.grid.n_theta
    c0 = np.zeros((x.size, nt), dtype=complex)
    c1 = np.zeros((x.size, nt), dtype=complex)
    c0[:, q] = g
    c1[:, q] = ut
    return profile_to_state(bundle, ProfileDatum(x, c0, c1, ell, "all"))


def scattering_fixture(bundle, side="left", center=-25.0, lead=30.0, width=2.5, q=0, carrier=1.0, dt=0.1,
                       taper=5.0, radius=None, generator="separable"):
    """Datum that the chosen flow carries cleanly to infinity on ``side``.

    A free packet is placed ``lead`` further out (where the potentials are
    negligible) and evolved backward by ``lead`` with the separable comparison
    (``generator='separable'``) or the full system (``'full'``). The result
    is a scattering state of that flow rather than of the free one.
    """
    from .evolution import propagate
    from .operators import smooth_step

    left = side in ("left", "l", "minus")
    outward = -lead if left else lead
    free = profile_fixture(bundle, "in" if left else "out", center + outward, width, q,
                           "left" if left else "right", carrier=carrier)
    if generator == "full":
        sys = bundle.full
    elif generator == "separable":
        sys = bundle.comparison_minus if left else bundle.comparison_plus
    else:
        raise ConfigInvalid(f"unknown generator {generator!r}")
    psi = propagate(sys, free, -lead, dt, causal=False)
    # the backward run leaves a slowly decaying tail; cut it smoothly
    radius = lead if radius is None else radius
    d = np.abs(bundle.grid.x - center)
    win = bundle.grid.layout.expand(smooth_step((radius - d) / taper))
    return psi.multiply(win)


def profile_stepper_distance(nx, X=60.0, ell=0.0, T=3.0, seed=1, cfl=0.4):
    """Relative energy distance between the explicit profile flow and the midpoint stepper."""
    import scipy.sparse as sp

    from .kg import hom_energy
    from .operators import laplacian_1d, uniform_x

    x = uniform_x(nx, X)
    dx = x[1] - x[0]
    d = random_L_datum(x, ell, seed=seed)
    sys = KGSystem(laplacian_1d(nx, dx), ell * sp.identity(nx, format="csr"), mass=np.full(nx, dx))
    dt = cfl * dx
    n = int(round(T / dt))
    stepped = Stepper(sys, dt).run(d.to_state(), n)
    exact = profile_evolve(d, n * dt).to_state()
    return float(np.sqrt(hom_energy(sys, stepped - exact) / hom_energy(sys, exact)))


def random_L_datum(x, ell=0.0, seed=0, n_comp=1, center=0.0, width=3.0, kmax=0.5):
    """Random smooth compact profile datum with zero-mean u1 - i ell u0."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x)
    shape = (x.size,) if n_comp == 1 else (x.size, n_comp)
    env = np.exp(-0.5 * ((x - center) / width) ** 2)
    env = env if n_comp == 1 else env[:, None]

    def rnd():
        c = rng.standard_normal(n_comp) + 1j * rng.standard_normal(n_comp)
        k = rng.uniform(-kmax, kmax, n_comp)
        wave = np.exp(1j * np.multiply.outer(x, k))
        out = env * (wave if n_comp > 1 else wave[:, 0]) * (c if n_comp > 1 else c[0])
        return out.reshape(shape)

    u0 = rnd()
    g = rnd()
    g = g - env * (g.sum(axis=0) / env.sum(axis=0))
    return ProfileDatum(x, u0, g + 1j * ell * u0, ell)
