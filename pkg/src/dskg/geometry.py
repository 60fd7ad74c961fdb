"""Scalar geometry of the De Sitter Kerr family.

Metric functions, horizons, angular velocities, surface gravities, the
Regge-Wheeler coordinate x(r) and the ergoregion boundaries.

Near the horizons r - r_- and r_+ - r underflow long before x reaches the
values used on simulation grids, so radial points are carried together with
their offsets from both horizons (see :class:`RadialPoint`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as poly
from scipy import integrate, optimize, special
from scipy.interpolate import PchipInterpolator

from .errors import ConfigInvalid, NoErgoregion, NoPositivityInterval, QuadratureFailure


@dataclass(frozen=True)
class SpacetimeParams:
    Lambda: float
    M: float
    a: float = 0.0
    mass: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.Lambda) and self.Lambda > 0):
            raise ConfigInvalid(f"Lambda must be > 0, got {self.Lambda}")
        if not (np.isfinite(self.M) and self.M > 0):
            raise ConfigInvalid(f"M must be > 0, got {self.M}")
        if not np.isfinite(self.a):
            raise ConfigInvalid("a must be finite")
        if not (np.isfinite(self.mass) and self.mass >= 0):
            raise ConfigInvalid(f"field mass must be >= 0, got {self.mass}")

    @property
    def lam(self) -> float:
        """lambda = 1 + Lambda a^2 / 3."""
        return 1.0 + self.Lambda * self.a**2 / 3.0

    def delta_r_coeffs(self):
        """Coefficients of Delta_r in increasing powers of r."""
        L3 = self.Lambda / 3.0
        a2 = self.a**2
        return np.array([a2, -2.0 * self.M, 1.0 - L3 * a2, 0.0, -L3])


def delta_r(params: SpacetimeParams, r):
    r = np.asarray(r, dtype=float)
    a2 = params.a**2
    return (1.0 - params.Lambda * r**2 / 3.0) * (r**2 + a2) - 2.0 * params.M * r


def delta_r_prime(params: SpacetimeParams, r):
    return poly.polyval(r, poly.polyder(params.delta_r_coeffs()))


def delta_theta(params: SpacetimeParams, theta):
    return 1.0 + params.Lambda * params.a**2 * np.cos(theta) ** 2 / 3.0


def rho2(params: SpacetimeParams, r, theta):
    return np.asarray(r) ** 2 + params.a**2 * np.cos(theta) ** 2


def sigma2(params: SpacetimeParams, r, theta, dr=None):
    """sigma^2 = (r^2+a^2)^2 Delta_theta - a^2 Delta_r sin^2 theta.

    ``dr`` may carry a precomputed (offset-accurate) Delta_r.
    """
    r = np.asarray(r, dtype=float)
    if dr is None:
        dr = delta_r(params, r)
    a2 = params.a**2
    return (r**2 + a2) ** 2 * delta_theta(params, theta) - a2 * dr * np.sin(theta) ** 2


def omega_coordinate(params: SpacetimeParams, r, theta, dr=None):
    """Coordinate angular velocity of the frame dragging."""
    r = np.asarray(r, dtype=float)
    if dr is None:
        dr = delta_r(params, r)
    a = params.a
    a2 = a * a
    s2 = np.sin(theta) ** 2
    num = a * ((r**2 + a2) * delta_theta(params, theta) - dr * a2 * s2)
    return num / sigma2(params, r, theta, dr)


@dataclass(frozen=True)
class HorizonData:
    r_minus: float
    r_plus: float
    r_max: float
    omega_minus: float
    omega_plus: float
    kappa_minus: float
    kappa_plus: float
    p2: np.ndarray = field(repr=False)  # increasing powers
    alpha_minus: float = 0.0
    alpha_plus: float = 0.0
    kappa_alpha_minus: float = 0.0
    kappa_alpha_plus: float = 0.0

    @property
    def width(self):
        return self.r_plus - self.r_minus

    def p2_at(self, r):
        return poly.polyval(r, self.p2)

    def q(self, r):
        r = np.asarray(r, dtype=float)
        return np.sqrt(np.clip((self.r_plus - r) * (r - self.r_minus), 0.0, None))

    def ell(self, n: int) -> float:
        """Rotated-frame frequency at the black-hole horizon for mode n."""
        return (self.omega_plus - self.omega_minus) * n


def _newton_polish(coeffs, root, iters=8):
    d = poly.polyder(coeffs)
    for _ in range(iters):
        fp = poly.polyval(root, d)
        if fp == 0:
            break
        step = poly.polyval(root, coeffs) / fp
        root = root - step
        if abs(step) <= 1e-16 * max(1.0, abs(root)):
            break
    return root


def find_horizons(params: SpacetimeParams) -> HorizonData:
    c = params.delta_r_coeffs()
    roots = np.roots(c[::-1])  # companion-matrix eigenvalues
    scale = max(1.0, np.max(np.abs(roots)))
    real = np.sort([z.real for z in roots if abs(z.imag) <= 1e-9 * scale])
    real = np.array([_newton_polish(c, r) for r in real])
    pos = real[real > 0]
    pair = None
    for lo, hi in zip(pos[:-1], pos[1:]):
        if hi - lo <= 1e-9 * scale:
            continue
        if delta_r(params, 0.5 * (lo + hi)) > 0:
            pair = (float(lo), float(hi))
            break
    if pair is None:
        raise NoPositivityInterval(
            f"Delta_r has no positivity interval for {params}"
        )
    rm, rp = pair
    dprime = poly.polyder(c)
    if abs(poly.polyval(rm, dprime)) < 1e-10 or abs(poly.polyval(rp, dprime)) < 1e-10:
        raise NoPositivityInterval("horizon roots are not simple")

    # Delta_r = q^2 P2 with q^2 = (r_+ - r)(r - r_-)
    q2 = np.array([-rp * rm, rp + rm, -1.0])
    p2, rem = poly.polydiv(c, q2)
    if np.max(np.abs(rem)) > 1e-12 * max(1.0, np.max(np.abs(c))) * scale**2:
        raise NoPositivityInterval(f"Delta_r / q^2 remainder {rem} too large")
    p2 = np.trim_zeros(p2, "b")
    if poly.polyval(rm, p2) <= 0 or poly.polyval(rp, p2) <= 0:
        raise NoPositivityInterval("P2 not positive at the horizons")

    r_max = optimize.brentq(lambda r: poly.polyval(r, dprime), rm, rp, xtol=1e-15, rtol=1e-15)
    lam = params.lam
    a = params.a
    width = rp - rm
    om_m = a / (rm**2 + a**2)
    om_p = a / (rp**2 + a**2)
    p2m = poly.polyval(rm, p2)
    p2p = poly.polyval(rp, p2)
    # exponential rates of r - r_-, r_+ - r in the coordinate dx/dr = lam (r^2+a^2)/Delta_r
    kap_m = width * p2m / (lam * (rm**2 + a**2))
    kap_p = width * p2p / (lam * (rp**2 + a**2))
    al_m = np.sqrt(p2m) / (lam * (rm**2 + a**2))
    al_p = np.sqrt(p2p) / (lam * (rp**2 + a**2))
    return HorizonData(
        r_minus=rm,
        r_plus=rp,
        r_max=float(r_max),
        omega_minus=om_m,
        omega_plus=om_p,
        kappa_minus=float(kap_m),
        kappa_plus=float(kap_p),
        p2=p2,
        alpha_minus=float(al_m),
        alpha_plus=float(al_p),
        kappa_alpha_minus=float(al_m**2 * width),
        kappa_alpha_plus=float(al_p**2 * width),
    )


@dataclass(frozen=True)
class RadialPoint:
    """Radii with their distances to both horizons, kept separately."""

    r: np.ndarray
    d_minus: np.ndarray  # r - r_-
    d_plus: np.ndarray  # r_+ - r

    def delta_r(self, hz: HorizonData):
        return self.d_minus * self.d_plus * hz.p2_at(self.r)

    def q(self):
        return np.sqrt(self.d_minus * self.d_plus)


class RWMap:
    """Regge-Wheeler coordinate x(r) with dx/dr = lambda (r^2+a^2)/Delta_r.

    x is written as log(r-r_-)/kappa_- - log(r_+-r)/kappa_+ + G(r); the
    regular part G is integrated adaptively and stored as a Chebyshev series.
    The inverse is a safeguarded Newton iteration in the logit variable
    y = log((r-r_-)/(r_+-r)), in which x is smooth with bounded derivative.
    """

    def __init__(self, params: SpacetimeParams, hz: HorizonData, n_nodes: int = 256,
                 x_span: float = 50.0, cheb_degree: int = 64):
        if n_nodes < 16:
            raise ConfigInvalid("rw_map needs at least 16 nodes")
        if not x_span > 0:
            raise ConfigInvalid("x_span must be positive")
        self.params = params
        self.hz = hz
        self.order = 3
        self._build_regular_part(cheb_degree)
        rm, rp = hz.r_minus, hz.r_plus
        self._shift = 0.0
        self._shift = -float(self.x_from_offsets(hz.r_max, hz.r_max - rm, rp - hz.r_max))
        # coarse explicit table in y for initial guesses
        ylo = -hz.kappa_minus * 1.5 * x_span - 40.0
        yhi = hz.kappa_plus * 1.5 * x_span + 40.0
        ys = np.linspace(ylo, yhi, 4001)
        xs = self.x_of_y(ys)
        if np.any(np.diff(xs) <= 0):
            raise QuadratureFailure("x(y) table is not monotone")
        self._guess = PchipInterpolator(xs, ys, extrapolate=False)
        self._smin = 0.5 * float(np.min(np.diff(xs) / np.diff(ys)))
        self._xs_range = (xs[0], xs[-1])
        self._ys_range = (ys[0], ys[-1])
        self.x_nodes = np.linspace(-x_span, x_span, n_nodes)
        pts = self.r_of_x(self.x_nodes)
        self.r_nodes = pts.r
        self.y_nodes = self._y_of_x(self.x_nodes)
        self.x_span = x_span
        self._table = PchipInterpolator(self.x_nodes, self.r_nodes)

    # regular part -----------------------------------------------------
    def _build_regular_part(self, degree):
        p, hz = self.params, self.hz
        rm, rp = hz.r_minus, hz.r_plus
        a2 = p.a**2
        lam = p.lam
        # numerator of dx/dr minus both pole terms, over q^2 P2
        num = np.array([lam * a2, 0.0, lam])
        num = poly.polysub(num, poly.polymul([rp, -1.0], hz.p2) / hz.kappa_minus)
        num = poly.polysub(num, poly.polymul([-rm, 1.0], hz.p2) / hz.kappa_plus)
        q2 = np.array([-rp * rm, rp + rm, -1.0])
        lin, rem = poly.polydiv(num, q2)
        if np.max(np.abs(rem)) > 1e-9 * max(1.0, np.max(np.abs(num))):
            raise QuadratureFailure("pole subtraction left a singular remainder")
        self._lin = lin

        def regular(r):
            return poly.polyval(r, lin) / hz.p2_at(r)

        self._regular = regular
        nodes = cheb.chebpts2(degree + 1)
        rr = 0.5 * (rp + rm) + 0.5 * (rp - rm) * nodes
        vals = np.empty_like(rr)
        for i, r in enumerate(rr):
            val, err = integrate.quad(regular, hz.r_max, r, epsabs=1e-14, epsrel=1e-13, limit=200)
            if not np.isfinite(val) or err > 1e-10 * max(1.0, abs(val)):
                raise QuadratureFailure(f"quad error {err:.2e} at r={r}")
            vals[i] = val
        self._gcheb = cheb.chebfit(nodes, vals, degree)
        probe = 0.5 * (rp + rm) + 0.5 * (rp - rm) * np.array([-0.93, -0.41, 0.17, 0.77])
        for r in probe:
            val, _ = integrate.quad(regular, hz.r_max, r, epsabs=1e-14, epsrel=1e-13, limit=200)
            if abs(self._g(r) - val) > 1e-11 * max(1.0, abs(val)):
                raise QuadratureFailure("Chebyshev representation of x(r) not converged")

    def _t(self, r):
        hz = self.hz
        return (2.0 * np.asarray(r) - hz.r_plus - hz.r_minus) / hz.width

    def _g(self, r):
        return cheb.chebval(self._t(r), self._gcheb)

    # forward map ------------------------------------------------------
    def x_from_offsets(self, r, d_minus, d_plus):
        hz = self.hz
        return (np.log(d_minus) / hz.kappa_minus - np.log(d_plus) / hz.kappa_plus
                + self._g(r) + self._shift)

    def x_of_r(self, r):
        r = np.asarray(r, dtype=float)
        return self.x_from_offsets(r, r - self.hz.r_minus, self.hz.r_plus - r)

    def dx_dr(self, r):
        p = self.params
        r = np.asarray(r, dtype=float)
        return p.lam * (r**2 + p.a**2) / delta_r(p, r)

    def dx_dr_from_series(self, r):
        """Derivative of the stored representation (used to check the table)."""
        hz = self.hz
        r = np.asarray(r, dtype=float)
        dg = cheb.chebval(self._t(r), cheb.chebder(self._gcheb)) * 2.0 / hz.width
        return 1.0 / (hz.kappa_minus * (r - hz.r_minus)) + 1.0 / (hz.kappa_plus * (hz.r_plus - r)) + dg

    def _point_of_y(self, y):
        w = self.hz.width
        y = np.asarray(y, dtype=float)
        dm = w * special.expit(y)
        dp = w * special.expit(-y)
        r = np.where(y < 0, self.hz.r_minus + dm, self.hz.r_plus - dp)
        return RadialPoint(r, dm, dp)

    def x_of_y(self, y):
        hz = self.hz
        y = np.asarray(y, dtype=float)
        lw = np.log(hz.width)
        pt = self._point_of_y(y)
        return ((lw + special.log_expit(y)) / hz.kappa_minus
                - (lw + special.log_expit(-y)) / hz.kappa_plus
                + self._g(pt.r) + self._shift)

    def _dx_dy(self, y):
        p, hz = self.params, self.hz
        r = self._point_of_y(y).r
        return p.lam * (r**2 + p.a**2) / (hz.p2_at(r) * hz.width)

    # inverse map ------------------------------------------------------
    def _initial_y(self, x):
        hz = self.hz
        y = self._guess(x)
        lo = x < self._xs_range[0]
        hi = x > self._xs_range[1]
        y = np.where(lo, self._ys_range[0] + hz.kappa_minus * (x - self._xs_range[0]), y)
        y = np.where(hi, self._ys_range[1] + hz.kappa_plus * (x - self._xs_range[1]), y)
        return y

    def _y_of_x(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = self._initial_y(x)
        # bracket: x(y) is increasing with slope between these bounds
        smin = self._smin
        lo = y - 5.0 - np.abs(self.x_of_y(y) - x) / smin
        hi = y + 5.0 + np.abs(self.x_of_y(y) - x) / smin
        for _ in range(60):
            f = self.x_of_y(y) - x
            lo = np.where(f < 0, y, lo)
            hi = np.where(f > 0, y, hi)
            step = f / self._dx_dy(y)
            ynew = y - step
            bad = (ynew <= lo) | (ynew >= hi)
            ynew = np.where(bad, 0.5 * (lo + hi), ynew)
            done = np.abs(ynew - y) <= 1e-15 * (1.0 + np.abs(y))
            y = ynew
            if np.all(done):
                break
        return y

    def r_of_x(self, x) -> RadialPoint:
        x = np.asarray(x, dtype=float)
        shape = x.shape
        pt = self._point_of_y(self._y_of_x(x.ravel()))
        return RadialPoint(pt.r.reshape(shape), pt.d_minus.reshape(shape), pt.d_plus.reshape(shape))

    def r_table(self, x):
        """Monotone cubic interpolation on the stored table (no Newton polish)."""
        return self._table(x)

    @cached_property
    def covers(self):
        return (self.x_nodes[0], self.x_nodes[-1])


def rw_map(params: SpacetimeParams, hz: HorizonData, n_nodes: int = 256, x_span: float = 50.0) -> RWMap:
    return RWMap(params, hz, n_nodes, x_span)


def _ergo_function(params, theta):
    a2s2 = params.a**2 * np.sin(theta) ** 2 * delta_theta(params, theta)
    return lambda r: delta_r(params, r) - a2s2


def ergo_bounds(params: SpacetimeParams, hz: HorizonData, theta: float):
    """Boundaries r1 < r2 of the region where Delta_r > a^2 sin^2 Delta_theta.

    The ergoregions are (r_-, r1) and (r2, r_+).
    """
    rm, rp = hz.r_minus, hz.r_plus
    if params.a == 0 or np.sin(theta) == 0:
        raise NoErgoregion("no ergoregion for a = 0 or on the axis", rm, rp)
    f = _ergo_function(params, theta)
    if f(hz.r_max) <= 0:
        raise NoErgoregion("Delta_r - a^2 sin^2 Delta_theta never positive", rm, rp)
    r1 = optimize.brentq(f, rm, hz.r_max, xtol=1e-15, rtol=1e-15)
    r2 = optimize.brentq(f, hz.r_max, rp, xtol=1e-15, rtol=1e-15)
    for lo, hi, sign in ((rm, r1, -1), (r1, r2, 1), (r2, rp, -1)):
        s = np.linspace(lo, hi, 9)[1:-1]
        if s.size and not np.all(np.sign(f(s)) == sign):
            raise NoErgoregion("sign pattern check failed", rm, rp)
    return float(r1), float(r2)
