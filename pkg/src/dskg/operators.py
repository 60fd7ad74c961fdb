"""Discretized De Sitter Kerr operators at a fixed azimuthal mode n.

Unknowns live on a uniform Regge-Wheeler grid in x (Dirichlet at +-X) times
a modal angular basis phi_j(mu) = (1-mu^2)^{|n|/2} p_j(mu), mu = cos(theta),
with p_j orthonormal Jacobi polynomials for the weight (1-mu^2)^{|n|}. The
angular mass matrix is then the identity, and every angular integral is a
Gauss-Legendre sum over interior nodes (no node sits on a pole).

The unknown vector is x-major: index i*n_theta + j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import special

from .errors import AssemblyDomainError, ConfigInvalid, PositivityViolation, SupportOverflow
from .geometry import HorizonData, RadialPoint, RWMap, SpacetimeParams, find_horizons, rw_map
from .kg import KGSystem, gauge_transform, sym_extreme_eigs


# grids -----------------------------------------------------------------------
@dataclass(frozen=True)
class Layout:
    """Node positions in x and number of angular unknowns per node."""

    x: np.ndarray
    n_comp: int = 1

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def span(self):
        """Half-width X of the Dirichlet box."""
        return float(self.x[-1] + self.dx)

    @property
    def nx(self):
        return self.x.size

    def expand(self, v):
        """Repeat a node vector over the angular unknowns."""
        return np.repeat(np.asarray(v), self.n_comp)

    def reshape(self, u):
        return np.asarray(u).reshape((self.nx, self.n_comp) + np.shape(u)[1:])


def uniform_x(nx: int, x_span: float):
    """Interior nodes of [-X, X] with spacing 2X/(nx+1)."""
    dx = 2.0 * x_span / (nx + 1)
    return -x_span + dx * np.arange(1, nx + 1)


class AngularBasis:
    """Orthonormal modal basis on [-1, 1] in mu = cos(theta) for mode n."""

    def __init__(self, n: int, n_theta: int, extra_nodes: int = 8):
        if n_theta < 1:
            raise ConfigInvalid("n_theta must be >= 1")
        self.n = int(n)
        self.n_theta = int(n_theta)
        m = abs(self.n)
        nq = n_theta + m + extra_nodes
        mu, w = special.roots_legendre(nq)
        self.mu = mu
        self.weights = w
        s2 = 1.0 - mu**2
        j = np.arange(n_theta)
        lognorm = ((2 * m + 1) * np.log(2.0) + 2 * special.gammaln(j + m + 1)
                   - np.log(2 * j + 2 * m + 1) - special.gammaln(j + 2 * m + 1) - special.gammaln(j + 1))
        norm = np.exp(-0.5 * lognorm)
        p = np.stack([special.eval_jacobi(jj, m, m, mu) for jj in j], axis=1) * norm
        dp = np.zeros_like(p)
        for jj in j[1:]:
            dp[:, jj] = 0.5 * (jj + 2 * m + 1) * special.eval_jacobi(jj - 1, m + 1, m + 1, mu) * norm[jj]
        # values, sqrt(1-mu^2) d/dmu, and value / sqrt(1-mu^2)
        self.E = s2[:, None] ** (m / 2.0) * p
        self.Ds = s2[:, None] ** ((m + 1) / 2.0) * dp - m * mu[:, None] * s2[:, None] ** ((m - 1) / 2.0) * p
        self.Es = s2[:, None] ** ((m - 1) / 2.0) * p if m > 0 else np.zeros_like(p)

    def gram(self, c=None, left=None, right=None):
        """sum_q w_q c_q L_q^T R_q, batched over leading axes of c."""
        left = self.E if left is None else left
        right = left if right is None else right
        if c is None:
            return np.einsum("q,qa,qb->ab", self.weights, left, right)
        return np.einsum("...q,qa,qb->...ab", c * self.weights, left, right)


@dataclass(frozen=True)
class ModeGrid:
    n: int
    nx: int
    x_span: float
    n_theta: int

    def __post_init__(self):
        if self.nx < 4:
            raise ConfigInvalid("need at least 4 radial nodes")
        if self.x_span <= 0:
            raise ConfigInvalid("x_span must be positive")

    @property
    def x(self):
        return uniform_x(self.nx, self.x_span)

    @property
    def dx(self):
        return 2.0 * self.x_span / (self.nx + 1)

    @property
    def dim(self):
        return self.nx * self.n_theta

    @property
    def layout(self):
        return Layout(self.x, self.n_theta)

    @property
    def layout1d(self):
        return Layout(self.x, 1)

    def basis(self):
        return AngularBasis(self.n, self.n_theta)


# pointwise coefficients ----------------------------------------------------------
def _block_tridiag(diag, upper):
    """Sparse symmetric block-tridiagonal matrix from (nx,b,b) and (nx-1,b,b)."""
    nx, b, _ = diag.shape
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(b), np.arange(b), indexing="ij")
    base = np.arange(nx)[:, None, None] * b
    rows.append((base + ii).ravel())
    cols.append((base + jj).ravel())
    vals.append(diag.ravel())
    if nx > 1:
        up = np.arange(nx - 1)[:, None, None] * b
        rows += [(up + ii).ravel(), (up + b + jj).ravel()]
        cols += [(up + b + jj).ravel(), (up + ii).ravel()]
        vals += [upper.ravel(), upper.ravel()]
    a = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * b, nx * b))
    return a.tocsr()


def _block_diag(blocks):
    nx, b, _ = blocks.shape
    return _block_tridiag(blocks, np.zeros((max(nx - 1, 0), b, b)))


def _radial_points(rw: RWMap, x):
    lo, hi = rw.covers
    if np.min(x) < lo - 1e-9 or np.max(x) > hi + 1e-9:
        raise AssemblyDomainError(f"grid [{np.min(x)}, {np.max(x)}] outside map [{lo}, {hi}]")
    return rw.r_of_x(x)


def sphere_operator(grid: ModeGrid, params: SpacetimeParams, basis: AngularBasis | None = None):
    """Galerkin matrix of lam^2 n^2 / sin^2 - (1/sin) d_theta sin Delta_theta d_theta."""
    basis = basis or grid.basis()
    mu = basis.mu
    dth = 1.0 + params.Lambda * params.a**2 * mu**2 / 3.0
    p = basis.gram(dth, basis.Ds)
    if grid.n != 0:
        p = p + (params.lam * grid.n) ** 2 * basis.gram(None, basis.Es)
    return 0.5 * (p + p.T)


@dataclass
class _Coefficients:
    """Metric functions sampled on (x-node, mu-node) pairs."""

    r2a2: np.ndarray
    dr: np.ndarray
    dth: np.ndarray
    dth_mu: np.ndarray
    sig2: np.ndarray
    rho2: np.ndarray
    s2: np.ndarray


def _coefficients(params, hz, pts: RadialPoint, mu):
    a2 = params.a**2
    r = pts.r[:, None]
    dr = pts.delta_r(hz)[:, None]
    r2a2 = r**2 + a2
    dth = 1.0 + params.Lambda * a2 * mu[None, :] ** 2 / 3.0
    dth_mu = 2.0 * params.Lambda * a2 * mu[None, :] / 3.0
    s2 = 1.0 - mu[None, :] ** 2
    sig2 = r2a2**2 * dth - a2 * dr * s2
    rho2 = r**2 + a2 * mu[None, :] ** 2
    return _Coefficients(r2a2, dr, dth, dth_mu, sig2, rho2, s2)


def k_function(params: SpacetimeParams, hz: HorizonData, n, c: _Coefficients):
    """Rotated-frame k^n sampled on the coefficient grid."""
    a = params.a
    return n * (a / (hz.r_plus**2 + a**2) + a * (c.dr - c.r2a2 * c.dth) / c.sig2)


def _radial_blocks(fvals, weights_edges, basis, dx):
    """Flux-differenced -f d_x c d_x f; fvals (nx, nq), weights_edges (nx+1,)."""
    nx = fvals.shape[0]
    ce = weights_edges / dx**2
    diag = basis.gram((ce[:-1] + ce[1:])[:, None] * fvals**2)
    upper = -basis.gram(ce[1:-1, None] * fvals[:-1] * fvals[1:]) if nx > 1 else np.zeros((0,) + diag.shape[1:])
    return diag, upper


def assemble_full_mode(params: SpacetimeParams, hz: HorizonData, rw: RWMap, grid: ModeGrid,
                       basis: AngularBasis | None = None, weight="q", weight_eps=1.0) -> KGSystem:
    """(h0^n, k^n) on the 2D grid as a mass-symmetric sparse pair."""
    basis = basis or grid.basis()
    x = grid.x
    dx = grid.dx
    n = grid.n
    lam = params.lam
    mu = basis.mu
    pts = _radial_points(rw, x)
    c = _coefficients(params, hz, pts, mu)
    xe = np.concatenate([[x[0] - 0.5 * dx], 0.5 * (x[:-1] + x[1:]), [x[-1] + 0.5 * dx]])
    re = _radial_points(rw, np.clip(xe, *rw.covers)).r
    r2a2_edges = re**2 + params.a**2

    f = np.sqrt(c.r2a2 * c.dth / c.sig2)
    diag, upper = _radial_blocks(f, r2a2_edges, basis, dx)

    # angular part g P g with g = sqrt(Delta_r Delta_theta) / (lam sigma)
    g = np.sqrt(c.dr * c.dth / c.sig2) / lam
    sig2_mu = c.r2a2**2 * c.dth_mu + 2.0 * params.a**2 * c.dr * mu[None, :]
    g_mu = 0.5 * g * (c.dth_mu / c.dth - sig2_mu / c.sig2)
    amat = (np.sqrt(c.s2) * g_mu)[:, :, None] * basis.E[None] + g[:, :, None] * basis.Ds[None]
    diag = diag + np.einsum("iq,iqa,iqb->iab", c.dth * basis.weights, amat, amat)

    # n^2 terms of the potential and of g P g combine to n^2 rho^4 Dr Dth / (sigma^4 sin^2)
    if n != 0:
        pot_n = n**2 * c.rho2**2 * c.dr * c.dth / c.sig2**2
        diag = diag + basis.gram(pot_n, basis.Es)
    if params.mass > 0:
        pot_m = c.rho2 * c.dr * c.dth * params.mass**2 / (lam**2 * c.sig2)
        diag = diag + basis.gram(pot_m)
    h0 = _block_tridiag(diag, upper)
    h0 = 0.5 * (h0 + h0.T)
    kv = k_function(params, hz, n, c)
    k = _block_diag(basis.gram(kv))
    k = 0.5 * (k + k.T)
    lay = grid.layout
    return KGSystem(h0.tocsr(), k.tocsr(), mass=np.full(grid.dim, dx),
                    w_inv=lay.expand(weight_vector(pts, x, weight, weight_eps)), grid=lay,
                    name=f"full(n={n})")


def weight_vector(pts: RadialPoint, x, kind="q", eps=1.0):
    """w^{-1} on the x nodes: q(r(x)) or 1/cosh(eps x)."""
    if kind == "q":
        return pts.q()
    if kind == "cosh":
        return 1.0 / np.cosh(eps * np.asarray(x))
    raise ConfigInvalid(f"unknown weight {kind!r}")


def separable_radial(params, hz, rw, x, dx):
    """Radial pieces of the separable model on the 1D grid.

    Returns (R, v_sphere, v_mass, k_s, pts): h0_s = R + v_sphere * lambda_q + v_mass.
    """
    pts = _radial_points(rw, x)
    a2 = params.a**2
    lam = params.lam
    r2a2 = pts.r**2 + a2
    xe = np.concatenate([[x[0] - 0.5 * dx], 0.5 * (x[:-1] + x[1:]), [x[-1] + 0.5 * dx]])
    re = _radial_points(rw, np.clip(xe, *rw.covers)).r
    ce = (re**2 + a2) / dx**2
    fs = 1.0 / np.sqrt(r2a2)
    main = (ce[:-1] + ce[1:]) * fs**2
    off = -ce[1:-1] * fs[:-1] * fs[1:]
    radial = sp.diags([off, main, off], [-1, 0, 1], format="csr")
    dr = pts.delta_r(hz)
    v_sphere = dr / (lam**2 * r2a2**2)
    v_mass = dr * params.mass**2 / (lam**2 * r2a2)
    a = params.a
    k_s = a / (hz.r_plus**2 + a2) - a / r2a2
    return radial, v_sphere, v_mass, k_s, pts


def assemble_separable(params, hz, rw, grid: ModeGrid, Q: int = 8, weight="q", weight_eps=1.0,
                       p_eig=None):
    """One 1D system per retained eigenvalue lambda_q of the sphere operator."""
    if Q > grid.n_theta:
        raise ConfigInvalid(f"Q={Q} exceeds n_theta={grid.n_theta}")
    x = grid.x
    radial, vs, vm, ks, pts = separable_radial(params, hz, rw, x, grid.dx)
    if p_eig is None:
        p_eig = np.linalg.eigvalsh(sphere_operator(grid, params))
    w_inv = weight_vector(pts, x, weight, weight_eps)
    out = []
    for q in range(Q):
        h0 = radial + sp.diags(vs * p_eig[q] + vm)
        k = sp.diags(grid.n * ks)
        out.append(KGSystem(h0.tocsr(), k.tocsr(), mass=np.full(grid.nx, grid.dx), w_inv=w_inv,
                            grid=grid.layout1d, name=f"separable(n={grid.n},q={q})"))
    return out


def laplacian_1d(nx, dx):
    e = np.ones(nx) / dx**2
    return sp.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1], format="csr")


def assemble_profiles(params, hz, grid: ModeGrid, two_d=True):
    """Right (h = -d_x^2, k = 0) and left (h = -d_x^2 - ell^2, k = ell) profiles."""
    ell = hz.ell(grid.n)
    lap = laplacian_1d(grid.nx, grid.dx)
    lay = grid.layout if two_d else grid.layout1d
    if two_d:
        lap = sp.kron(lap, sp.identity(grid.n_theta), format="csr")
    eye = sp.identity(lap.shape[0], format="csr")
    mass = np.full(lap.shape[0], grid.dx)
    right = KGSystem(lap, 0.0 * eye, mass=mass, grid=lay, name="profile_r")
    left = KGSystem(lap, ell * eye, mass=mass, grid=lay, name="profile_l")
    return right, left


# cutoffs ----------------------------------------------------------------------
def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def chi_plus_minus(s):
    """(chi_+, chi_-) with chi_+^2 + chi_-^2 = 1, chi_+ = 0 for s <= -1, = 1 for s >= 1."""
    a = smooth_step(0.5 * (np.asarray(s) + 1.0))
    nrm = np.sqrt(a**2 + (1.0 - a) ** 2)
    return a / nrm, (1.0 - a) / nrm


def chi_tilde(s):
    """1 on [-1, 1], 0 outside (-2, 2)."""
    return 1.0 - smooth_step(np.abs(np.asarray(s)) - 1.0)


@dataclass(frozen=True)
class Cutoffs:
    eps: float
    R: float
    i_plus: np.ndarray
    i_minus: np.ndarray
    j_plus: np.ndarray
    j_minus: np.ndarray
    i_tilde: np.ndarray

    def identity_defects(self):
        return {
            "partition": float(np.max(np.abs(self.i_plus**2 + self.i_minus**2 - 1.0))),
            "j_plus_i_plus": float(np.max(np.abs(self.j_plus * self.i_plus - self.j_plus))),
            "j_minus_i_minus": float(np.max(np.abs(self.j_minus * self.i_minus - self.j_minus))),
            "i_plus_j_minus": float(np.max(np.abs(self.i_plus * self.j_minus))),
            "i_minus_j_plus": float(np.max(np.abs(self.i_minus * self.j_plus))),
        }


def build_cutoffs(x, eps, R=None, dx=None) -> Cutoffs:
    """i_+- = chi_+-(x/eps), j_+- = chi_+-(x/eps -+ 3), i_tilde = chi_tilde(x/R)."""
    x = np.asarray(x, dtype=float)
    dx = float(x[1] - x[0]) if dx is None else dx
    span = float(np.max(np.abs(x))) + dx
    R = span / 4.0 if R is None else R
    if eps <= 2 * dx:
        raise SupportOverflow(f"eps={eps} must exceed two grid spacings ({2 * dx})")
    if 4 * eps >= span or 2 * R >= span + dx:
        raise SupportOverflow(f"cutoff supports (eps={eps}, R={R}) do not fit in [-{span}, {span}]")
    ip, im = chi_plus_minus(x / eps)
    jp, _ = chi_plus_minus(x / eps - 3.0)
    _, jm = chi_plus_minus(x / eps + 3.0)
    return Cutoffs(eps, R, ip, im, jp, jm, chi_tilde(x / R))


# bundle -------------------------------------------------------------------------
@dataclass
class OperatorBundle:
    params: SpacetimeParams
    horizons: HorizonData
    rw: RWMap
    grid: ModeGrid
    basis: AngularBasis
    full: KGSystem
    sphere: np.ndarray
    sphere_eigvals: np.ndarray
    sphere_eigvecs: np.ndarray
    separable: list
    profile_right: KGSystem
    profile_left: KGSystem
    comparison_plus: KGSystem
    comparison_minus: KGSystem
    cutoffs: Cutoffs
    ell: float
    Q: int
    asymptotic_plus: KGSystem | None = None
    asymptotic_minus: KGSystem | None = None
    asymptotic_minus_gauged: KGSystem | None = None
    checks: dict = field(default_factory=dict)

    @property
    def layout(self):
        return self.grid.layout

    def expand(self, v):
        return self.layout.expand(v)

    def summary(self):
        return {
            "n": self.grid.n,
            "nx": self.grid.nx,
            "n_theta": self.grid.n_theta,
            "dim": self.full.dim,
            "x_span": self.grid.x_span,
            "dx": self.grid.dx,
            "ell": self.ell,
            "k_norm": self.full.k_norm,
            "min_eig_h0": self.full.min_eig_h0,
            "epsilon": self.cutoffs.eps,
            "R": self.cutoffs.R,
            "Q": self.Q,
            "hypothesisChecks": dict(self.checks),
        }


def comparison_systems(params, hz, rw, grid: ModeGrid, sphere, weight="q", weight_eps=1.0):
    """Separable comparison generators on the 2D grid: (h0_s, 0) and (h0_s, ell)."""
    radial, vs, vm, _, pts = separable_radial(params, hz, rw, grid.x, grid.dx)
    nt = grid.n_theta
    h0 = (sp.kron(radial, sp.identity(nt)) + sp.kron(sp.diags(vs), sp.csr_matrix(sphere))
          + sp.kron(sp.diags(vm), sp.identity(nt)))
    h0 = sp.csr_matrix(0.5 * (h0 + h0.T))
    eye = sp.identity(grid.dim, format="csr")
    mass = np.full(grid.dim, grid.dx)
    w_inv = grid.layout.expand(weight_vector(pts, grid.x, weight, weight_eps))
    ell = hz.ell(grid.n)
    plus = KGSystem(h0, 0.0 * eye, mass=mass, w_inv=w_inv, grid=grid.layout, name="comparison_plus")
    minus = KGSystem(h0, ell * eye, mass=mass, w_inv=w_inv, grid=grid.layout, name="comparison_minus")
    return plus, minus


def assemble_asymptotics(bundle: OperatorBundle, check=True, n_probe=100, seed=0):
    """Two-ends Hamiltonians k_+- = k -+ ell j_-+^2, h_+- = h0 - k_+-^2.

    Returns (plus, minus, minus_gauged); minus_gauged carries
    h~_- = h0 - (ell - k_-)^2 and k_- - ell.
    """
    full, cut, ell = bundle.full, bundle.cutoffs, bundle.ell
    jm2 = bundle.expand(cut.j_minus**2)
    jp2 = bundle.expand(cut.j_plus**2)
    k_plus = full.k - ell * sp.diags(jm2)
    k_minus = full.k + ell * sp.diags(jp2)
    plus = KGSystem(full.h0, sp.csr_matrix(k_plus), full.mass, full.w_inv, full.grid, "asymptotic_plus")
    minus = KGSystem(full.h0, sp.csr_matrix(k_minus), full.mass, full.w_inv, full.grid, "asymptotic_minus")
    gauged = gauge_transform(minus, ell)
    bundle.asymptotic_plus, bundle.asymptotic_minus, bundle.asymptotic_minus_gauged = plus, minus, gauged
    if check:
        rng = np.random.default_rng(seed)
        for label, s in (("h_plus", plus), ("h_tilde_minus", gauged)):
            lo = sym_extreme_eigs(s.symmetrized(s.h))[0]
            bundle.checks[f"{label}_min_eig"] = float(lo)
            if lo < -1e-10 * max(1.0, s.h0_norm):
                raise PositivityViolation(label, lo)
            # h >= c k^2 probed on random vectors
            v = rng.standard_normal((s.dim, n_probe))
            hv = np.sum(v * (s.h @ v), axis=0)
            kv = s.k @ v
            k2 = np.sum(kv * kv, axis=0)
            ratio = hv[k2 > 0] / k2[k2 > 0]
            bundle.checks[f"{label}_c"] = float(np.min(ratio)) if ratio.size else float("inf")
    return plus, minus, gauged


def assemble_bundle(params: SpacetimeParams, grid: ModeGrid, epsilon=None, R=None, Q=8,
                    weight="q", weight_eps=1.0, asymptotics=False, check=True,
                    hz: HorizonData | None = None, rw: RWMap | None = None) -> OperatorBundle:
    hz = hz or find_horizons(params)
    rw = rw or rw_map(params, hz, n_nodes=256, x_span=grid.x_span + grid.dx)
    basis = grid.basis()
    full = assemble_full_mode(params, hz, rw, grid, basis, weight, weight_eps)
    sphere = sphere_operator(grid, params, basis)
    w, v = np.linalg.eigh(sphere)
    Q = min(Q, grid.n_theta)
    seps = assemble_separable(params, hz, rw, grid, Q, weight, weight_eps, p_eig=w)
    pr, pl = assemble_profiles(params, hz, grid)
    cp, cm = comparison_systems(params, hz, rw, grid, sphere, weight, weight_eps)
    eps = grid.x_span / 8.0 if epsilon is None else epsilon
    cut = build_cutoffs(grid.x, eps, grid.x_span / 4.0 if R is None else R, grid.dx)
    ell = hz.ell(grid.n)
    b = OperatorBundle(params, hz, rw, grid, basis, full, sphere, w, v, seps, pr, pl, cp, cm,
                       cut, ell, Q)
    if check:
        b.checks.update(hypothesis_checks(b))
    if asymptotics:
        assemble_asymptotics(b, check=check)
    return b


def hypothesis_checks(b: OperatorBundle):
    full = b.full
    defects = b.cutoffs.identity_defects()
    lo = full.min_eig_h0
    return {
        "h0_symmetric": full.symmetry_defect(full.h0) <= 1e-12,
        "k_symmetric": full.symmetry_defect(full.k) <= 1e-12,
        "h0_nonnegative": lo >= -1e-10 * max(1.0, full.h0_norm),
        "cutoff_identities": max(defects.values()) <= 1e-14,
        "ell_formula": abs(b.ell - b.grid.n * (b.horizons.omega_plus - b.horizons.omega_minus)) <= 1e-15,
        "sphere_symmetric": bool(np.allclose(b.sphere, b.sphere.T, atol=1e-12, rtol=0)),
    }


def full_block_in_sphere_basis(b: OperatorBundle, op):
    """Rotate a 2D operator into the eigenbasis of the sphere operator."""
    rot = sp.kron(sp.identity(b.grid.nx), sp.csr_matrix(b.sphere_eigvecs))
    return rot.T @ op @ rot


def extract_q_block(b: OperatorBundle, op, q):
    nt = b.grid.n_theta
    rotated = full_block_in_sphere_basis(b, op).tocsr()
    idx = np.arange(b.grid.nx) * nt + q
    return rotated[idx][:, idx]
