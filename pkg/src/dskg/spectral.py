"""Spectra of H, pencil roots, resolvent scans, Riesz projectors and f(H)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial import cKDTree

from .errors import (BudgetExceeded, DefectiveCluster, IllConditioned, PencilSingular,
                     SolverFailure, SpectrumOnContour)
from .kg import (KGSystem, PencilFactor, State, _dense, apply_resolvent, apply_resolvent_adjoint,
                 hamiltonian_matrix, pencil_apply, pencil_matrix, resolvent)

DENSE_BUDGET = 6000


# eigenvalues ----------------------------------------------------------------------
@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    pencil_residuals: np.ndarray
    conjugation_pairing_error: float
    complex_count: int
    threshold: float
    hamiltonian_norm: float
    eigenvectors: np.ndarray | None = field(default=None, repr=False)

    @property
    def pencil_cross_check(self):
        return float(np.max(self.pencil_residuals)) if self.pencil_residuals.size else 0.0

    @property
    def max_residual(self):
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @property
    def max_abs_imag(self):
        return float(np.max(np.abs(self.eigenvalues.imag))) if self.eigenvalues.size else 0.0

    def in_disc(self, center, radius):
        z = self.eigenvalues
        return np.sort_complex(z[np.abs(z - center) < radius])

    def summary(self):
        return {
            "count": int(self.eigenvalues.size),
            "complexCount": self.complex_count,
            "imagThreshold": self.threshold,
            "maxAbsImag": self.max_abs_imag,
            "maxResidual": self.max_residual,
            "pencilCrossCheck": self.pencil_cross_check,
            "conjugationPairingError": self.conjugation_pairing_error,
        }

    def rows(self):
        order = np.lexsort((self.eigenvalues.imag, self.eigenvalues.real))
        return [(float(self.eigenvalues[i].real), float(self.eigenvalues[i].imag), float(self.residuals[i]))
                for i in order]


def conjugation_pairing_error(z):
    """Largest distance from an eigenvalue's conjugate to the nearest eigenvalue."""
    z = np.asarray(z)
    if z.size == 0:
        return 0.0
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    d, _ = tree.query(np.column_stack([z.real, -z.imag]))
    return float(np.max(d) / max(1.0, np.max(np.abs(z))))


def eig_hamiltonian(sys: KGSystem, budget=DENSE_BUDGET, threshold=1e-6, vectors=True) -> SpectrumReport:
    """Dense eigen-decomposition of H with eigen- and pencil residuals."""
    n2 = 2 * sys.dim
    if n2 > budget:
        raise BudgetExceeded(f"2N = {n2} exceeds the dense budget {budget}")
    hm = _dense(hamiltonian_matrix(sys))
    if not np.iscomplexobj(hm) or not np.any(hm.imag):
        hm = np.real(hm)
    try:
        if vectors:
            w, v = sla.eig(hm, check_finite=False, overwrite_a=False)
        else:
            w = sla.eigvals(hm, check_finite=False)
            v = None
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverFailure(str(exc)) from exc
    hnorm = float(np.linalg.norm(hm, 1))
    if v is not None:
        res = np.linalg.norm(hm @ v - v * w[None, :], axis=0) / (max(hnorm, 1.0) * np.linalg.norm(v, axis=0))
        u0 = v[: sys.dim]
        nrm = np.linalg.norm(u0, axis=0)
        nrm = np.where(nrm > 0, nrm, 1.0)
        pu = pencil_apply(sys, 0.0, u0) + w[None, :] * (2.0 * (sys.k @ u0) - w[None, :] * u0)
        pres = np.linalg.norm(pu, axis=0) / nrm
    else:
        res = np.zeros(w.size)
        pres = np.zeros(w.size)
    return SpectrumReport(w, res, pres, conjugation_pairing_error(w),
                          int(np.count_nonzero(np.abs(w.imag) > threshold)), threshold, hnorm, v)


def eig_near(sys: KGSystem, targets, count=6):
    """Shift-invert Arnoldi around targets, for grids over the dense budget."""
    import scipy.sparse.linalg as spla

    hm = sp.csc_matrix(hamiltonian_matrix(sys), dtype=complex)
    out = []
    for t in np.atleast_1d(targets):
        try:
            w = spla.eigs(hm, k=count, sigma=complex(t), return_eigenvectors=False)
        except Exception as exc:  # ARPACK raises several error types
            raise SolverFailure(str(exc)) from exc
        out.append(w)
    return np.concatenate(out) if out else np.array([], dtype=complex)


# pencil roots by contour moments ----------------------------------------------------
def pencil_roots(sys: KGSystem, center, radius, n_quad=None, n_probe=None, moments=2, seed=0,
                 rank_tol=1e-9, refine=True):
    """Roots of p(z) = h + z(2k - z) inside the disc |z - center| < radius.

    Block-Hankel contour moments of p(z)^{-1} V reduce the problem to a small
    linear eigenproblem; each root is then polished by Newton's method on
    det p(z). Roots are assumed simple and at distance >= radius/10 from the
    circle.
    """
    n = sys.dim
    h = _dense(sys.h).astype(complex)
    k2 = 2.0 * _dense(sys.k)
    eye = np.eye(n)
    L = n if n_probe is None else min(n_probe, n)
    n_quad = n_quad or max(128, 32 * moments)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, L)) + 1j * rng.standard_normal((n, L))
    theta = 2 * np.pi * (np.arange(n_quad) + 0.5) / n_quad
    zs = center + radius * np.exp(1j * theta)
    amom = [np.zeros((n, L), dtype=complex) for _ in range(2 * moments)]
    for z in zs:
        x = sla.solve(h + z * (k2 - z * eye), v)
        wq = radius * np.exp(1j * np.angle(z - center)) / n_quad
        s = (z - center) / radius
        for p in range(2 * moments):
            amom[p] += wq * s**p * x
    b0 = np.block([[amom[i + j] for j in range(moments)] for i in range(moments)])
    b1 = np.block([[amom[i + j + 1] for j in range(moments)] for i in range(moments)])
    u, sv, wh = np.linalg.svd(b0, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        return np.array([], dtype=complex)
    m = int(np.count_nonzero(sv > rank_tol * sv[0]))
    if m == 0:
        return np.array([], dtype=complex)
    if m >= min(b0.shape):
        raise SolverFailure("contour holds too many roots for the probe block; shrink the region")
    u0, s0, w0 = u[:, :m], sv[:m], wh[:m].conj().T
    small = u0.conj().T @ b1 @ w0 / s0[None, :]
    roots = center + radius * np.linalg.eigvals(small)
    roots = roots[np.abs(roots - center) < radius * 1.05]
    if refine:
        roots = np.array([_newton_det(h, k2, z) for z in roots])
    roots = roots[np.abs(roots - center) < radius]
    return np.sort_complex(roots)


def _newton_det(h, k2, z, iters=20):
    eye = np.eye(h.shape[0])
    for _ in range(iters):
        p = h + z * (k2 - z * eye)
        dp = k2 - 2.0 * z * eye
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", sla.LinAlgWarning)
                t = np.trace(sla.solve(p, dp))
        except np.linalg.LinAlgError:
            return z
        if t == 0 or not np.isfinite(t):
            return z
        step = 1.0 / t
        z = z - step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def match_roots(a, b):
    """Max distance in an optimal matching of two root lists (inf if sizes differ)."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    if a.size != b.size:
        return float("inf")
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(np.max(cost[r, c]))


# resolvent bounds ------------------------------------------------------------------
def _l2_norm(sys, a):
    s = np.sqrt(sys.mass)
    return float(np.linalg.norm(s[:, None] * a / s[None, :], 2))


def resolvent_fan(k_norm, n_radii=10, angles=(np.pi / 12, np.pi / 4, np.pi / 2, 3 * np.pi / 4, 11 * np.pi / 12),
                  r_max=3.0, margin=0.1, r_floor=0.2):
    r_min = max((1 + margin) * k_norm, r_floor)
    radii = np.geomspace(r_min, max(r_max, 2 * r_min), n_radii)
    return np.array([r * np.exp(1j * a) for r in radii for a in angles])


def resolvent_certificates(sys: KGSystem, zs):
    """Sup over zs of ||p^{-1}|| |z| |Im z| and ||h0^{1/2} p^{-1}|| |Im z| (dense)."""
    n = sys.dim
    h0s = sys.symmetrized(_dense(sys.h0))
    w, v = np.linalg.eigh(0.5 * (h0s + h0s.T))
    sqrt_h0 = (v * np.sqrt(np.clip(w, 0, None))) @ v.T
    s = np.sqrt(sys.mass)
    c1, c2 = [], []
    for z in zs:
        pinv = PencilFactor(sys, z).solve(np.eye(n, dtype=complex))
        ps = s[:, None] * pinv / s[None, :]
        c1.append(np.linalg.norm(ps, 2) * abs(z) * abs(z.imag))
        c2.append(np.linalg.norm(sqrt_h0 @ ps, 2) * abs(z.imag))
    return {"pinv": float(np.max(c1)), "sqrt_h0_pinv": float(np.max(c2)),
            "pinv_samples": np.array(c1), "sqrt_h0_pinv_samples": np.array(c2)}


# weighted resolvent scans ------------------------------------------------------------
@dataclass
class ResonanceScan:
    lambda_grid: np.ndarray
    delta_list: np.ndarray
    norm_table: np.ndarray  # (len(lambda), len(delta))
    growth: np.ndarray
    peak_candidates: np.ndarray
    threshold: float

    def rows(self):
        out = []
        for i, lam in enumerate(self.lambda_grid):
            for j, d in enumerate(self.delta_list):
                out.append((float(lam), float(d), float(self.norm_table[i, j])))
        return out

    def summary(self):
        return {
            "lambdaCount": int(self.lambda_grid.size),
            "deltaList": [float(d) for d in self.delta_list],
            "maxGrowth": float(np.max(self.growth)) if self.growth.size else 0.0,
            "argmaxGrowth": float(self.lambda_grid[int(np.argmax(self.growth))]) if self.growth.size else 0.0,
            "peakCandidates": [float(x) for x in self.peak_candidates],
            "growthThreshold": self.threshold,
        }


def weighted_resolvent_norm(sys: KGSystem, z, weight, n_iter=20, restarts=3, seed=0):
    """Power-iteration estimate of ||W R(z) W|| with W = diag(weight, weight)."""
    f = PencilFactor(sys, z)
    rng = np.random.default_rng(seed)
    n = sys.dim
    wv = np.asarray(weight)[:, None]
    x = State(rng.standard_normal((n, restarts)) + 1j * rng.standard_normal((n, restarts)),
              rng.standard_normal((n, restarts)) + 1j * rng.standard_normal((n, restarts)))
    est = np.zeros(restarts)
    for _ in range(n_iter):
        nrm = np.sqrt(np.sum(np.abs(x.u0) ** 2 + np.abs(x.u1) ** 2, axis=0))
        x = x.scale(1.0 / nrm[None, :])
        y = apply_resolvent(sys, z, x.multiply(wv[:, 0]), f).multiply(wv[:, 0])
        x = apply_resolvent_adjoint(sys, z, y.multiply(wv[:, 0]), f).multiply(wv[:, 0])
        est = np.sqrt(np.sum(np.abs(x.u0) ** 2 + np.abs(x.u1) ** 2, axis=0))
    if not np.all(np.isfinite(est)):
        raise SolverFailure("non-finite norm estimate")
    return float(np.sqrt(np.max(est)))


def weighted_resolvent_scan(sys: KGSystem, weight, lambda_grid, delta_list, growth_threshold=10.0,
                            n_iter=20, restarts=3, seed=0) -> ResonanceScan:
    """||W R(lambda + i delta) W|| on a grid, flagging lambda where it grows as delta shrinks."""
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    delta_list = np.sort(np.asarray(delta_list, dtype=float))[::-1]
    if np.any(delta_list <= 0):
        raise ValueError("all delta must be positive")
    table = np.zeros((lambda_grid.size, delta_list.size))
    for i, lam in enumerate(lambda_grid):
        for j, d in enumerate(delta_list):
            table[i, j] = weighted_resolvent_norm(sys, lam + 1j * d, weight, n_iter, restarts, seed)
    growth = table[:, -1] / table[:, 0]
    peaks = lambda_grid[growth >= growth_threshold]
    return ResonanceScan(lambda_grid, delta_list, table, growth, peaks, growth_threshold)


# glued resolvent ---------------------------------------------------------------------
def _two(v):
    return np.concatenate([v, v])


def glued_resolvent(full: KGSystem, minus: KGSystem, plus: KGSystem, i_minus, i_plus, j_minus, j_plus, z):
    """Compare R(z) with Q(z)(1 + K(z))^{-1}, Q = i_- R_- i_- + i_+ R_+ i_+."""
    z = complex(z)
    hm = _dense(hamiltonian_matrix(full))
    n2 = hm.shape[0]
    r = resolvent(full, z)
    rm = resolvent(minus, z)
    rp = resolvent(plus, z)
    im, ip, jm, jp = (_two(np.asarray(c, dtype=float)) for c in (i_minus, i_plus, j_minus, j_plus))
    q = im[:, None] * rm * im[None, :] + ip[:, None] * rp * ip[None, :]
    cm = hm * im[None, :] - im[:, None] * hm
    cp = hm * ip[None, :] - ip[:, None] * hm
    n = full.dim
    tri = max(np.max(np.abs(c[:n])) for c in (cm, cp)) + max(np.max(np.abs(c[n:, n:])) for c in (cm, cp))
    km = cm @ rm * im[None, :]
    kp = cp @ rp * ip[None, :]
    kk = km + kp
    eye = np.eye(n2)
    one_k = eye + kk
    cond = np.linalg.cond(one_k)
    if not np.isfinite(cond) or cond > 1e12:
        raise IllConditioned(f"1 + K(z) has condition {cond:.3e} at z = {z}")
    glued = q @ np.linalg.inv(one_k)
    rnorm = np.linalg.norm(r, 2)
    residual = float(np.linalg.norm(r - glued, 2) / rnorm)
    # (H - z) Q = 1 + K
    hq = float(np.linalg.norm((hm - z * eye) @ q - one_k, 2) / np.linalg.norm(one_k, 2))
    b = km * jm[None, :] + kp * jp[None, :]
    inv_defect = float(np.linalg.norm((eye + b) @ (eye - b) - eye, 2))
    a = (eye - b) @ one_k - eye
    fact_defect = float(np.linalg.norm((eye + b) @ (eye + a) - one_k, 2) / np.linalg.norm(one_k, 2))
    return {
        "residual": residual,
        "pencil_identity": hq,
        "commutator_upper_max": float(tri),
        "inverse_identity": inv_defect,
        "factorization": fact_defect,
        "cond_1_plus_K": float(cond),
        "norm_R": float(rnorm),
    }


def glued_resolvent_check(bundle, z):
    from .operators import assemble_asymptotics

    if bundle.asymptotic_plus is None:
        assemble_asymptotics(bundle, check=False)
    c = bundle.cutoffs
    ex = bundle.expand
    return glued_resolvent(bundle.full, bundle.asymptotic_minus, bundle.asymptotic_plus,
                           ex(c.i_minus), ex(c.i_plus), ex(c.j_minus), ex(c.j_plus), z)


# Riesz projectors and f(H) ---------------------------------------------------------------
def _circle_margin(eigs, z0, radius):
    if eigs.size == 0:
        return np.inf
    return float(np.min(np.abs(np.abs(eigs - z0) - radius)))


def riesz_projector(sys: KGSystem, z0, radius, quad_points=None, eigs=None, hm=None):
    """(i / 2 pi) times the contour integral of (H - z)^{-1} over |z - z0| = radius."""
    hm = _dense(hamiltonian_matrix(sys)) if hm is None else hm
    if eigs is None:
        eigs = np.linalg.eigvals(hm)
    margin = _circle_margin(eigs, z0, radius)
    if margin < radius / 10:
        raise SpectrumOnContour(f"eigenvalue within {margin:.3e} of the contour (radius {radius})")
    if quad_points is None:
        d = np.maximum(np.abs(eigs - z0) / radius, 1e-12)
        rho = np.max(np.where(d < 1, d, 1.0 / d)) if d.size else 0.0
        quad_points = int(np.clip(np.ceil(np.log(1e-14) / np.log(max(rho, 1e-3))), 32, 8192))
    n2 = hm.shape[0]
    eye = np.eye(n2)
    e = np.zeros((n2, n2), dtype=complex)
    theta = 2 * np.pi * np.arange(quad_points) / quad_points
    for t in theta:
        w = radius * np.exp(1j * t)
        # (1/2 pi i) contour of (z - H)^{-1} dz with dz = i w dtheta
        e += w * np.linalg.solve((z0 + w) * eye - hm, eye)
    return e / quad_points


@dataclass
class EigenClusters:
    values: np.ndarray  # representative value per cluster
    projectors: list
    sizes: list
    cond: float
    nilpotent: list


def spectral_clusters(hm, rel_radius=1e-6, contour_threshold=1e8):
    w, v = np.linalg.eig(hm)
    scale = max(np.linalg.norm(hm, 2), 1e-300)
    if w.size > 1:
        labels = fcluster(linkage(np.column_stack([w.real, w.imag]), "single"), rel_radius * scale, "distance")
    else:
        labels = np.ones(1, dtype=int)
    cond = np.linalg.cond(v)
    vals, projs, sizes, nil = [], [], [], []
    n2 = hm.shape[0]
    eye = np.eye(n2)
    if cond <= contour_threshold:
        vinv = np.linalg.inv(v)
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        zc = np.mean(w[idx])
        if cond <= contour_threshold:
            proj = v[:, idx] @ vinv[idx]
        else:
            others = np.delete(w, idx)
            spread = np.max(np.abs(w[idx] - zc))
            gap = np.min(np.abs(others - zc)) if others.size else np.inf
            radius = min(max(4 * spread, 1e-3 * scale), 0.5 * gap) if np.isfinite(gap) else max(4 * spread, 1.0)
            if radius <= 1.2 * spread:
                raise DefectiveCluster(f"cannot isolate cluster at {zc} by a circle")
            proj = riesz_projector(None, zc, radius, eigs=w, hm=hm)
        vals.append(zc)
        projs.append(proj)
        sizes.append(idx.size)
        nil.append((hm - zc * eye) @ proj if idx.size > 1 else None)
    return EigenClusters(np.array(vals), projs, sizes, float(cond), nil)


def _almost_analytic(f, df, z, h=1e-6):
    x = z.real
    fx = complex(f(x))
    if z.imag == 0:
        return fx
    # holomorphic continuation when f accepts complex input
    try:
        with np.errstate(all="raise"), warnings.catch_warnings():
            warnings.simplefilter("error")
            fz = complex(f(z))
        if np.isfinite(fz):
            return fz
    except (TypeError, ValueError, FloatingPointError, Warning):
        pass
    d = complex(df(x)) if df is not None else (f(x + h) - f(x - h)) / (2 * h)
    return fx + 1j * z.imag * d


def smooth_calculus(sys: KGSystem | None, f, df=None, clusters: EigenClusters | None = None, hm=None):
    """f(H) = sum over eigenvalue clusters of f(z_c) E_c (+ f'(z_c) N_c for clusters).

    f is a real function of a real variable. At complex z it is continued
    holomorphically when it accepts complex input, otherwise by its
    first-order almost-analytic extension f(x) + i y f'(x).
    """
    if clusters is None:
        hm = _dense(hamiltonian_matrix(sys)) if hm is None else hm
        clusters = spectral_clusters(hm)
    n2 = clusters.projectors[0].shape[0]
    out = np.zeros((n2, n2), dtype=complex)
    for zc, proj, nil in zip(clusters.values, clusters.projectors, clusters.nilpotent):
        out += _almost_analytic(f, df, zc) * proj
        if nil is not None:
            d = complex(df(zc.real)) if df is not None else (f(zc.real + 1e-6) - f(zc.real - 1e-6)) / 2e-6
            out += d * nil
    return out
