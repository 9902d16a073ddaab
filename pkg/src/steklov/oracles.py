"""Independent reference computations.

Nothing here imports the production eigensolvers or the continuation
solver; the dense and fixed-point routines rebuild what they need from
the assembled matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

SERIES_MAX_X = 30.0


class OracleError(ValueError):
    pass


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function ``I_k(x)`` by its power series.

    Terms are added until the partial sum stops changing in floating point.
    """
    if int(order) != order or order < 0:
        raise OracleError("order must be a nonnegative integer")
    order = int(order)
    x = float(x)
    if x < 0:
        raise OracleError("x must be nonnegative")
    if x > SERIES_MAX_X:
        raise OracleError(f"x = {x} outside the series regime (x <= {SERIES_MAX_X})")
    half = 0.5 * x
    term = half ** order / math.factorial(order)
    total = term
    q = half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + order))
        new = total + term
        if new == total:
            return total
        total = new


def bessel_i_reference(order: int, x: float, terms: int = 60) -> float:
    """Exact rational sum of the first ``terms`` series terms, rounded once."""
    half = Fraction(float(x)) / 2
    total = Fraction(0)
    for m in range(terms):
        total += half ** (2 * m + order) / (math.factorial(m) * math.factorial(m + order))
    return float(total)


def bessel_i_prime(order: int, x: float) -> float:
    if order == 0:
        return bessel_i(1, x)
    return 0.5 * (bessel_i(order - 1, x) + bessel_i(order + 1, x))


@dataclass(frozen=True)
class DiskSpectrumOracle:
    """Steklov spectrum of ``-Lap u + c u = 0`` on a disk of radius ``R``.

    ``mode_values[k]`` is the eigenvalue of angular number ``k``;
    ``eigenvalues`` expands them with multiplicity (1 for k = 0, else 2).
    """

    c: float
    radius: float
    mode_values: tuple
    eigenvalues: tuple
    angular_numbers: tuple

    @property
    def multiplicities(self):
        return tuple(1 if k == 0 else 2 for k in range(len(self.mode_values)))


def disk_mode_value(k: int, c: float, radius: float) -> float:
    s = math.sqrt(c)
    x = s * radius
    return s * bessel_i_prime(k, x) / bessel_i(k, x)


def disk_spectrum(c: float, radius: float, count: int) -> DiskSpectrumOracle:
    if not c > 0 or not radius > 0:
        raise OracleError("c and radius must be positive")
    if count < 0:
        raise OracleError("count must be nonnegative")
    modes, eig, ks = [], [], []
    k = 0
    while len(eig) < count:
        mu = disk_mode_value(k, c, radius)
        modes.append(mu)
        for _ in range(1 if k == 0 else 2):
            eig.append(mu)
            ks.append(k)
        k += 1
    return DiskSpectrumOracle(float(c), float(radius), tuple(modes), tuple(eig[:count]), tuple(ks[:count]))


# ------------------------------------------------------------ dense solves

MAX_DENSE_DOFS = 3000


def _dense_reduction(ops):
    """Dense Schur complement via Cholesky of the interior block."""
    mesh = ops.mesh
    n = mesh.n_vertices
    if n > MAX_DENSE_DOFS:
        raise OracleError(f"dense reference limited to {MAX_DENSE_DOFS} dofs (mesh has {n})")
    K = (ops.stiffness.matrix + ops.mass.matrix).toarray()
    Bfull = ops.boundary_mass.matrix.toarray()
    on_bnd = np.zeros(n, dtype=bool)
    on_bnd[mesh.boundary_edges.ravel()] = True
    b = np.flatnonzero(on_bnd)
    i = np.flatnonzero(~on_bnd)
    S = K[np.ix_(b, b)]
    if len(i):
        cf = sla.cho_factor(K[np.ix_(i, i)])
        S = S - K[np.ix_(b, i)] @ sla.cho_solve(cf, K[np.ix_(i, b)])
    S = 0.5 * (S + S.T)
    return b, S, Bfull[np.ix_(b, b)]


def dense_reference_spectrum(ops, count: int) -> np.ndarray:
    """All boundary-reduced eigenvalues by Cholesky reduction to standard form.

    Returns the ``count`` smallest.
    """
    b, S, B = _dense_reduction(ops)
    if count > len(b):
        raise OracleError(f"count {count} exceeds the number of boundary vertices {len(b)}")
    L = np.linalg.cholesky(B)
    T = sla.solve_triangular(L, S, lower=True)
    C = sla.solve_triangular(L, T.T, lower=True).T
    w = np.linalg.eigvalsh(0.5 * (C + C.T))
    return w[:count]


# ------------------------------------------------------------ fixed point

@dataclass
class PicardResult:
    u: np.ndarray            # nodal solution, interior filled by harmonic extension
    trace: np.ndarray        # values at the boundary vertices (ascending vertex index)
    boundary_vertices: np.ndarray
    iterations: int
    residual: float


def picard_reference_solve(g, h, basis, j, ops, delta, theta=0.2, tol=1e-8, max_iter=10_000,
                           shift=None):
    """Damped preconditioned fixed-point solve of the resonant boundary problem.

    Iterates ``u <- u - theta * P^{-1} R(u)`` on the boundary trace, where
    ``R(u) = S u - mu_j B u - G(u) - H`` is the weak boundary residual and
    ``P = S - (mu_j + shift) B``. ``shift`` defaults to ``delta / 2``, inside
    ``(0, mu_{j+1} - mu_j)``, so ``P`` is invertible and has the sign of the
    Jacobian in the resonant direction. ``shift = -delta`` (``P = Lambda -
    mu_j + delta``) drifts away along the resonant mode whenever
    ``dg/du >= 0`` there; it is kept for comparison.

    ``g`` is a :class:`steklov.resonance.NonlinearityDef` (only evaluated),
    ``h`` a nodal boundary function or ``RhsData``.
    """
    mesh = ops.mesh
    bvec, S, B = _dense_reduction(ops)
    mu_j = float(basis.mu[j - 1])
    if shift is None:
        shift = 0.5 * float(delta)
    P = S - (mu_j + shift) * B
    lu = sla.lu_factor(P)
    Bc = sla.cho_factor(B)

    # boundary quadrature, built locally
    be = mesh.boundary_edges
    t = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    shape = np.column_stack([1.0 - t, t])
    pa, pb = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    pts = pa[:, None, :] + t[None, :, None] * (pb - pa)[:, None, :]
    wts = np.linalg.norm(pb - pa, axis=1)[:, None] * 0.5
    tags = np.repeat(mesh.boundary_tags[:, None], 2, axis=1)
    pos = np.full(mesh.n_vertices, -1)
    pos[bvec] = np.arange(len(bvec))
    le = pos[be]

    def load(values):
        contrib = (wts * values) @ shape
        return np.bincount(le.ravel(), contrib.ravel(), minlength=len(bvec))

    hval = getattr(h, "nodal", h)
    hval = np.asarray(hval, dtype=float)
    H = B @ hval[bvec]

    def residual(u):
        uq = u[le] @ shape.T
        gq = g.evaluate(pts.reshape(-1, 2), tags.ravel(), uq.ravel()).reshape(uq.shape)
        return S @ u - mu_j * (B @ u) - load(gq) - H

    u = np.zeros(len(bvec))
    for it in range(max_iter + 1):
        r = residual(u)
        res = float(np.sqrt(max(r @ sla.cho_solve(Bc, r), 0.0)))
        if res <= tol:
            break
        if it == max_iter or not np.isfinite(res) or res > 1e150:
            raise OracleError(f"fixed-point iteration did not converge: residual {res:.3e} after {it} iterations")
        u = u - theta * sla.lu_solve(lu, r)
    full = np.zeros(mesh.n_vertices)
    full[bvec] = u
    K = (ops.stiffness.matrix + ops.mass.matrix).tocsc()
    inner = np.setdiff1d(np.arange(mesh.n_vertices), bvec)
    if len(inner):
        full[inner] = spla.spsolve(K[inner][:, inner], -(K[inner][:, bvec] @ u))
    return PicardResult(full, u, bvec, it, res)
