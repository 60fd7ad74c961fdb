"""Finite-dimensional Klein-Gordon algebra.

A system is a pair (h0, k) of operators, symmetric for a diagonal mass
inner product, with h = h0 - k^2. First-order states are
Psi = (u, -i du/dt) and evolve by Psi' = iH Psi with H = [[0, 1], [h, 2k]].
The quadratic pencil is p(z) = h + z(2k - z) = h0 - (k - z)^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, PencilSingular, PositivityViolation

RCOND_SINGULAR = 1e-13


def _is_sparse(a):
    return sp.issparse(a)


def _as_operator(a):
    if _is_sparse(a):
        return sp.csr_matrix(a)
    return np.asarray(a)


def _eye_like(a, n):
    return sp.identity(n, format="csr") if _is_sparse(a) else np.eye(n)


def _dense(a):
    return a.toarray() if _is_sparse(a) else np.asarray(a)


def _column_mass(mass, arr):
    return mass.reshape((-1,) + (1,) * (np.ndim(arr) - 1))


def inner(mass, a, b):
    """(a|b) = sum conj(a) m b, antilinear in a; batched over trailing axes."""
    return np.sum(np.conj(a) * _column_mass(mass, a) * b, axis=0)


@dataclass(frozen=True)
class State:
    """First-order state Psi = (u0, u1) with u1 = -i du/dt.

    Arrays may carry a trailing batch axis.
    """

    u0: np.ndarray
    u1: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u0", np.asarray(self.u0, dtype=complex))
        object.__setattr__(self, "u1", np.asarray(self.u1, dtype=complex))
        if self.u0.shape != self.u1.shape:
            raise DimensionMismatch(f"u0 {self.u0.shape} vs u1 {self.u1.shape}")

    @classmethod
    def from_cauchy(cls, u, ut):
        """From second-order data (u, du/dt)."""
        return cls(u, -1j * np.asarray(ut))

    def to_cauchy(self):
        return self.u0, 1j * self.u1

    @classmethod
    def from_vector(cls, v):
        n = v.shape[0] // 2
        return cls(v[:n], v[n:])

    def vector(self):
        return np.concatenate([self.u0, self.u1], axis=0)

    @property
    def dim(self):
        return self.u0.shape[0]

    def __add__(self, other):
        return State(self.u0 + other.u0, self.u1 + other.u1)

    def __sub__(self, other):
        return State(self.u0 - other.u0, self.u1 - other.u1)

    def scale(self, c):
        return State(c * self.u0, c * self.u1)

    def multiply(self, f):
        """Pointwise multiplication of both components by a node vector."""
        f = _column_mass(np.asarray(f), self.u0)
        return State(f * self.u0, f * self.u1)

    def column(self, j):
        return State(self.u0[:, j], self.u1[:, j])


class EnergyNorms(NamedTuple):
    hom: float
    inhom: float


class KGSystem:
    """Discrete operator pair (h0, k) with derived h, pencil and Hamiltonian.

    ``mass`` holds the diagonal inner-product weights; operators act on
    coefficient vectors and are symmetric in the sense that diag(mass) @ A
    is a symmetric matrix.
    """

    def __init__(self, h0, k, mass=None, w_inv=None, grid=None, name="", check=True):
        self.h0 = _as_operator(h0)
        self.k = _as_operator(k)
        n = self.h0.shape[0]
        if self.h0.shape != (n, n) or self.k.shape != (n, n):
            raise DimensionMismatch(f"h0 {self.h0.shape} vs k {self.k.shape}")
        self.dim = n
        self.mass = np.ones(n) if mass is None else np.asarray(mass, dtype=float)
        if self.mass.shape != (n,):
            raise DimensionMismatch("mass vector has wrong length")
        self.w_inv = None if w_inv is None else np.asarray(w_inv, dtype=float)
        self.grid = grid
        self.name = name
        self.h = self.h0 - self.k @ self.k
        if _is_sparse(self.h):
            self.h = sp.csr_matrix(self.h)
        if check:
            for label, a in (("h0", self.h0), ("k", self.k)):
                err = self.symmetry_defect(a)
                if err > 1e-12:
                    raise ValueError(f"{label} not symmetric for the mass inner product ({err:.2e})")

    @classmethod
    def from_h(cls, h, k, **kw):
        k = _as_operator(k)
        h0 = _as_operator(h) + k @ k
        return cls(h0, k, **kw)

    # structure -----------------------------------------------------------
    @property
    def sparse(self):
        return _is_sparse(self.h0)

    def symmetrized(self, a):
        """M^{1/2} A M^{-1/2}, a symmetric matrix when A is mass-symmetric."""
        s = np.sqrt(self.mass)
        if _is_sparse(a):
            return sp.diags(s) @ a @ sp.diags(1.0 / s)
        return s[:, None] * a / s[None, :]

    def symmetry_defect(self, a):
        ma = sp.diags(self.mass) @ a if _is_sparse(a) else self.mass[:, None] * a
        diff = ma - ma.T
        if _is_sparse(diff):
            num = spla.norm(diff)
            den = spla.norm(ma)
        else:
            num = np.linalg.norm(diff)
            den = np.linalg.norm(ma)
        return float(num / den) if den > 0 else float(num)

    @cached_property
    def k_is_diagonal(self):
        if _is_sparse(self.k):
            return self.k.nnz == np.count_nonzero(self.k.diagonal())
        return np.count_nonzero(self.k - np.diag(np.diag(self.k))) == 0

    @cached_property
    def k_norm(self) -> float:
        if self.k_is_diagonal:
            d = self.k.diagonal()
            return float(np.max(np.abs(d))) if d.size else 0.0
        return float(np.max(np.abs(sym_extreme_eigs(self.symmetrized(self.k)))))

    @cached_property
    def h0_norm(self) -> float:
        return float(np.max(np.abs(sym_extreme_eigs(self.symmetrized(self.h0)))))

    @cached_property
    def min_eig_h0(self) -> float:
        return float(sym_extreme_eigs(self.symmetrized(self.h0))[0])

    def check_positive(self, which="h0", tol=1e-10):
        lo = self.min_eig_h0
        if lo < -tol * max(1.0, self.h0_norm):
            raise PositivityViolation(which, lo)
        return lo

    def hamiltonian(self):
        return hamiltonian_matrix(self)

    def pencil(self, z):
        return pencil_matrix(self, z)

    def with_k(self, k, name=None):
        return KGSystem(self.h0, k, self.mass, self.w_inv, self.grid, name or self.name)


def sym_extreme_eigs(a):
    """Smallest and largest eigenvalue of a real symmetric operator."""
    n = a.shape[0]
    if not _is_sparse(a) or n <= 1500:
        w = np.linalg.eigvalsh(_dense(a))
        return np.array([w[0], w[-1]])
    a = sp.csr_matrix(0.5 * (a + a.T))
    hi = spla.eigsh(a, k=1, which="LA", return_eigenvectors=False, tol=1e-10)[0]
    shift = 1.0 + abs(hi) * 1e-6
    lo = spla.eigsh(a, k=1, sigma=-shift, which="LM", return_eigenvectors=False, tol=1e-12)[0]
    return np.array([lo, hi])


# pencil and Hamiltonian ---------------------------------------------------
def _check_dim(sys, u):
    if np.shape(u)[0] != sys.dim:
        raise DimensionMismatch(f"vector of length {np.shape(u)[0]} for dim {sys.dim}")


def pencil_apply(sys: KGSystem, z, u):
    _check_dim(sys, u)
    u = np.asarray(u)
    return sys.h @ u + z * (2.0 * (sys.k @ u) - z * u)


def pencil_matrix(sys: KGSystem, z):
    eye = _eye_like(sys.h, sys.dim)
    p = sys.h + z * (2.0 * sys.k - z * eye)
    return sp.csc_matrix(p) if _is_sparse(p) else p


def hamiltonian_matrix(sys: KGSystem):
    """H = [[0, 1], [h, 2k]] as a 2N x 2N (sparse if the system is)."""
    n = sys.dim
    if sys.sparse:
        return sp.bmat([[None, sp.identity(n)], [sys.h, 2.0 * sys.k]], format="csr")
    return np.block([[np.zeros((n, n)), np.eye(n)], [sys.h, 2.0 * sys.k]])


def phi_matrix(k, n, sparse=False):
    """Phi(k) = [[1, 0], [k, 1]] for an operator or scalar k."""
    if np.isscalar(k):
        k = k * (sp.identity(n) if sparse else np.eye(n))
    if sparse or _is_sparse(k):
        return sp.bmat([[sp.identity(n), None], [k, sp.identity(n)]], format="csr")
    return np.block([[np.eye(n), np.zeros((n, n))], [k, np.eye(n)]])


def hamiltonian_factors(sys: KGSystem):
    """(Phi(k), K, Phi(-k)) with K = [[k, 1], [h0, k]] and H = Phi(k) K Phi(-k)."""
    n = sys.dim
    if sys.sparse:
        kk = sp.bmat([[sys.k, sp.identity(n)], [sys.h0, sys.k]], format="csr")
    else:
        kk = np.block([[sys.k, np.eye(n)], [sys.h0, sys.k]])
    return phi_matrix(sys.k, n, sys.sparse), kk, phi_matrix(-sys.k, n, sys.sparse)


def phi_map(k_or_ell, psi: State) -> State:
    """Phi(k)(u0, u1) = (u0, k u0 + u1)."""
    if np.isscalar(k_or_ell):
        return State(psi.u0, k_or_ell * psi.u0 + psi.u1)
    return State(psi.u0, k_or_ell @ psi.u0 + psi.u1)


# forms ---------------------------------------------------------------------
def charge(sys: KGSystem, u: State, v: State):
    """<u, v> = (u0 | v1 - k v0) + (u1 - k u0 | v0); conserved by the flow."""
    m = sys.mass
    return inner(m, u.u0, v.u1 - sys.k @ v.u0) + inner(m, u.u1 - sys.k @ u.u0, v.u0)


def charge_plain(sys: KGSystem, u: State, v: State):
    """q(u, v) = (u0 | v1) + (u1 | v0); conserved only when k = 0."""
    m = sys.mass
    return inner(m, u.u0, v.u1) + inner(m, u.u1, v.u0)


def energy_norms(sys: KGSystem, u: State) -> EnergyNorms:
    """Squared homogeneous and inhomogeneous energy norms."""
    m = sys.mass
    w = u.u1 - sys.k @ u.u0
    hom = np.real(inner(m, w, w) + inner(m, u.u0, sys.h0 @ u.u0))
    inhom = hom + np.real(inner(m, u.u0, u.u0))
    return EnergyNorms(hom, inhom)


def hom_energy(sys: KGSystem, u: State):
    return energy_norms(sys, u).hom


def ell_form(sys: KGSystem, ell, u: State, v: State):
    """<u | v>_ell = (u1 - ell u0 | v1 - ell v0) + (p(ell) u0 | v0)."""
    m = sys.mass
    return (inner(m, u.u1 - ell * u.u0, v.u1 - ell * v.u0)
            + inner(m, pencil_apply(sys, ell, u.u0), v.u0))


def energy_rate(sys: KGSystem, u: State):
    """d/dt of the squared homogeneous energy along Psi' = iH Psi.

    Equals (i[h, k] u0 | u0) = -2 Im (h0 u0 | k u0).
    """
    m = sys.mass
    return -2.0 * np.imag(inner(m, sys.h0 @ u.u0, sys.k @ u.u0))


def commutator_rate(sys: KGSystem, u: State):
    """Same quantity as :func:`energy_rate`, from the commutator i[h, k]."""
    c = sys.h @ (sys.k @ u.u0) - sys.k @ (sys.h @ u.u0)
    return np.real(inner(sys.mass, u.u0, 1j * c))


def gauge_transform(sys: KGSystem, ell: float) -> KGSystem:
    """System with k' = k - ell and h' = p(ell), same h0.

    Phi(-ell) H Phi(ell) = H' + ell.
    """
    if ell == 0:
        return sys
    eye = _eye_like(sys.k, sys.dim)
    return KGSystem(sys.h0, sys.k - ell * eye, sys.mass, sys.w_inv, sys.grid,
                    name=f"{sys.name}|gauge({ell:g})", check=False)


# pencil factorizations and resolvents ---------------------------------------
class PencilFactor:
    """LU factorization of p(z) with a reciprocal condition estimate."""

    def __init__(self, sys: KGSystem, z):
        self.z = complex(z)
        p = pencil_matrix(sys, self.z)
        self.sparse = _is_sparse(p)
        if self.sparse:
            try:
                self._lu = spla.splu(sp.csc_matrix(p, dtype=complex))
            except RuntimeError as exc:
                raise PencilSingular(z, 0.0) from exc
            pnorm = spla.norm(p, 1)
            op = spla.LinearOperator(p.shape, matvec=self.solve, rmatvec=lambda b: self.solve(b, "H"),
                                     dtype=complex)
            inv_norm = spla.onenormest(op)
            self.rcond = float(1.0 / (pnorm * inv_norm)) if inv_norm > 0 else 0.0
        else:
            p = np.asarray(p, dtype=complex)
            self._lu = sla.lu_factor(p, check_finite=False)
            anorm = np.linalg.norm(p, 1)
            rc, info = sla.lapack.zgecon(self._lu[0], anorm, norm="1")
            self.rcond = float(rc)
        if not np.isfinite(self.rcond) or self.rcond < RCOND_SINGULAR:
            raise PencilSingular(z, self.rcond)

    def solve(self, b, trans="N"):
        b = np.asarray(b, dtype=complex)
        if self.sparse:
            return self._lu.solve(b, trans=trans)
        t = {"N": 0, "T": 1, "H": 2}[trans]
        return sla.lu_solve(self._lu, b, trans=t, check_finite=False)


class QuadraticPencil:
    """p(z) = h + z(2k - z) with a cache of factorizations."""

    def __init__(self, sys: KGSystem, cache_size=64):
        self.sys = sys
        self._cache = {}
        self._cache_size = cache_size

    def __call__(self, z):
        return pencil_matrix(self.sys, z)

    def apply(self, z, u):
        return pencil_apply(self.sys, z, u)

    def factor(self, z) -> PencilFactor:
        key = complex(z)
        f = self._cache.get(key)
        if f is None:
            if len(self._cache) >= self._cache_size:
                self._cache.pop(next(iter(self._cache)))
            f = PencilFactor(self.sys, key)
            self._cache[key] = f
        return f

    def solve(self, z, b):
        return self.factor(z).solve(b)

    def conjugation_defect(self, z):
        p = _dense(self(z))
        q = _dense(self(np.conj(z)))
        return float(np.linalg.norm(p.conj().T - q) / max(np.linalg.norm(p), 1e-300))


def apply_resolvent(sys: KGSystem, z, psi: State, factor: PencilFactor | None = None) -> State:
    """(H - z)^{-1} psi via one pencil solve."""
    f = factor or PencilFactor(sys, z)
    a = f.solve((z * psi.u0 - 2.0 * (sys.k @ psi.u0)) + psi.u1)
    return State(a, psi.u0 + z * a)


def apply_resolvent_adjoint(sys: KGSystem, z, psi: State, factor: PencilFactor | None = None) -> State:
    """Euclidean adjoint of (H - z)^{-1} (uniform-mass systems)."""
    f = factor or PencilFactor(sys, z)
    a = f.solve(psi.u0, "H")
    b = f.solve(psi.u1, "H")
    zc = np.conj(z)
    # R = diag(p^-1) B with B = [[z - 2k, 1], [h, z]]; R^H = B^H diag(p^-H)
    return State(zc * a - 2.0 * (sys.k.T @ a) + sys.h.T @ b, a + zc * b)


def resolvent(sys: KGSystem, z, form="direct"):
    """Dense (H - z)^{-1}.

    ``form`` selects the algebraic realisation: ``direct`` uses
    p^{-1}[[z-2k, 1], [h, z]], ``k`` conjugates the resolvent of
    K = [[k, 1], [h0, k]] by Phi(k), ``selfadjoint`` uses
    [[z^{-1}(p^{-1}h - 1), p^{-1}], [p^{-1}h, z p^{-1}]].
    """
    n = sys.dim
    z = complex(z)
    f = PencilFactor(sys, z)
    pinv = f.solve(np.eye(n, dtype=complex))
    h = _dense(sys.h)
    k = _dense(sys.k)
    eye = np.eye(n)
    if form == "direct":
        return np.block([[pinv @ (z * eye - 2.0 * k), pinv], [pinv @ h, z * pinv]])
    if form == "k":
        zk = z * eye - k
        rk = np.block([[pinv @ zk, pinv], [eye + zk @ pinv @ zk, zk @ pinv]])
        return _dense(phi_matrix(k, n)) @ rk @ _dense(phi_matrix(-k, n))
    if form == "selfadjoint":
        if z == 0:
            raise ValueError("selfadjoint form needs z != 0")
        ph = pinv @ h
        return np.block([[(ph - eye) / z, pinv], [ph, z * pinv]])
    raise ValueError(f"unknown resolvent form {form!r}")


def dump_system(sys: KGSystem, path):
    """Write h0, k, mass (and weight) to a compressed .npz file."""
    np.savez_compressed(path, h0=_dense(sys.h0), k=_dense(sys.k), mass=sys.mass,
                        w_inv=np.array([]) if sys.w_inv is None else sys.w_inv)


def random_system(n, seed=0, k_scale=0.3, shift=0.1) -> KGSystem:
    """Dense system with h0 = A A^T / n + shift and a symmetric random k."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    return KGSystem(a @ a.T / n + shift * np.eye(n), k_scale * (b + b.T) / 2, name=f"random({n},{seed})")


def identity_defects(sys: KGSystem, zs, ell=0.7):
    """Relative defects of the block identities behind the Hamiltonian formalism."""
    n = sys.dim
    eye2 = np.eye(2 * n)
    hm = _dense(hamiltonian_matrix(sys))
    hn = np.linalg.norm(hm, 2)
    pk, kk, pmk = (_dense(m) for m in hamiltonian_factors(sys))
    out = {
        "phi_inverse": float(np.linalg.norm(pk @ pmk - eye2, 2)),
        "factorization": float(np.linalg.norm(pk @ kk @ pmk - hm, 2) / hn),
    }
    res = 0.0
    for z in zs:
        r = resolvent(sys, z)
        res = max(res, float(np.linalg.norm((hm - z * eye2) @ r - eye2, 2)))
    out["resolvent"] = res
    g = _dense(hamiltonian_matrix(gauge_transform(sys, ell)))
    lhs = _dense(phi_matrix(-ell, n)) @ hm @ _dense(phi_matrix(ell, n))
    out["gauge"] = float(np.linalg.norm(lhs - g - ell * eye2, 2) / hn)
    return out
