"""Steklov eigenpairs of ``K phi = mu B phi``.

``K`` is the energy form (stiffness + weighted mass) and ``B`` the boundary
mass. Two solvers are provided:

* :func:`solve_spectrum_schur` condenses out the interior unknowns and
  diagonalises the dense boundary pencil;
* :func:`solve_spectrum_inductive` minimises the Rayleigh quotient over the
  boundary-orthogonal complement of the pairs already found, by block
  inverse iteration with locking, working on the full sparse system.

Both return a :class:`SteklovBasis` with boundary-orthonormal
eigenfunctions, clustered degenerate eigenvalues, a canonical basis inside
each cluster and a fixed sign convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assembly import Operators, c_inner_product
from .config import DEFAULT, Tolerances


class EigenError(RuntimeError):
    pass


class ConvergenceError(EigenError):
    """Inverse iteration exhausted ``max_iter``; carries the last iterate."""

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


@dataclass
class EigenPair:
    mu: float
    phi: np.ndarray
    residual: float


@dataclass(eq=False)
class SteklovBasis:
    """Ascending eigenpairs; ``phi[:, i]`` is the nodal eigenfunction ``i + 1``.

    Indices in the public helpers (``cluster_of``, ``pair``) are 1-based, to
    match the usual labelling ``mu_1 <= mu_2 <= ...``.
    """

    mu: np.ndarray
    phi: np.ndarray
    residuals: np.ndarray
    cluster_ids: np.ndarray
    boundary: np.ndarray
    tol: Tolerances = field(default=DEFAULT)
    solver: str = ""

    def __len__(self):
        return len(self.mu)

    @property
    def count(self) -> int:
        return len(self.mu)

    @property
    def traces(self) -> np.ndarray:
        """Boundary values, shape ``(nb, count)``."""
        return self.phi[self.boundary]

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.mu)

    @property
    def clusters(self) -> list[list[int]]:
        out = {}
        for i, c in enumerate(self.cluster_ids.tolist()):
            out.setdefault(c, []).append(i)
        return [out[k] for k in sorted(out)]

    def pair(self, j: int) -> EigenPair:
        return EigenPair(float(self.mu[j - 1]), self.phi[:, j - 1], float(self.residuals[j - 1]))

    def pairs(self) -> list[EigenPair]:
        return [self.pair(j) for j in range(1, self.count + 1)]

    def cluster_of(self, j: int) -> list[int]:
        """0-based indices of the cluster containing eigenvalue ``j`` (1-based)."""
        if not 1 <= j <= self.count:
            raise IndexError(f"resonance index {j} outside basis of size {self.count}")
        cid = self.cluster_ids[j - 1]
        return np.flatnonzero(self.cluster_ids == cid).tolist()


def _clusters(mu, tol_abs):
    ids = np.zeros(len(mu), dtype=np.int64)
    for i in range(1, len(mu)):
        ids[i] = ids[i - 1] + (0 if mu[i] - mu[i - 1] < tol_abs else 1)
    return ids


def finalize_basis(ops: Operators, X, tol: Tolerances = DEFAULT, solver="") -> SteklovBasis:
    """Canonicalise full nodal eigenvectors ``X`` (columns, any scaling).

    Steps: boundary normalisation and Rayleigh quotients, clustering,
    re-orthonormalisation and canonical rotation within clusters, sign fix,
    residuals.
    """
    K = ops.energy.matrix
    B = ops.boundary_mass.matrix
    bnd = ops.mesh.boundary_vertices()
    X = np.array(X, dtype=float, copy=True)
    m = X.shape[1]
    if m == 0:
        return SteklovBasis(np.zeros(0), np.zeros((ops.mesh.n_vertices, 0)), np.zeros(0),
                            np.zeros(0, dtype=np.int64), bnd, tol, solver)
    bn = np.sqrt(np.einsum("ij,ij->j", X, B @ X))
    X /= bn
    mu = np.einsum("ij,ij->j", X, K @ X)
    order = np.argsort(mu, kind="stable")
    X, mu = X[:, order], mu[order]
    ids = _clusters(mu, tol.cluster_abs(mu[0]))
    for cid in np.unique(ids):
        idx = np.flatnonzero(ids == cid)
        if len(idx) == 1:
            continue
        Y = X[:, idx]
        G = Y.T @ (B @ Y)
        L = np.linalg.cholesky(0.5 * (G + G.T))
        Y = sla.solve_triangular(L, Y.T, lower=True).T
        # rotate so member r vanishes at the first r boundary nodes
        V = Y[bnd[: len(idx)]]
        Q, _ = np.linalg.qr(V.T)
        Y = Y @ Q
        X[:, idx] = Y
        mu[idx] = np.einsum("ij,ij->j", Y, K @ Y)
    big = np.argmax(np.abs(X), axis=0)
    signs = np.sign(X[big, np.arange(m)])
    signs[signs == 0] = 1.0
    X *= signs
    R = K @ X - (B @ X) * mu
    res = np.linalg.norm(R, axis=0)
    return SteklovBasis(mu, X, res, ids, bnd, tol, solver)


def basis_from_vectors(ops: Operators, X, tol: Tolerances = DEFAULT, solver="file") -> SteklovBasis:
    """Wrap stored nodal eigenvectors without normalising or rotating them.

    ``mu`` is the Rayleigh quotient of each column; columns must already be
    in ascending order. Used to audit a basis read from disk.
    """
    K = ops.energy.matrix
    B = ops.boundary_mass.matrix
    X = np.array(X, dtype=float, copy=True)
    if X.ndim != 2 or X.shape[0] != ops.mesh.n_vertices:
        raise EigenError(f"basis must have {ops.mesh.n_vertices} rows, got shape {X.shape}")
    bn = np.einsum("ij,ij->j", X, B @ X)
    if np.any(bn <= 0):
        raise EigenError("basis vector with zero boundary trace")
    mu = np.einsum("ij,ij->j", X, K @ X) / bn
    res = np.linalg.norm(K @ X - (B @ X) * mu, axis=0)
    ids = _clusters(mu, tol.cluster_abs(mu[0])) if len(mu) else np.zeros(0, dtype=np.int64)
    return SteklovBasis(mu, X, res, ids, ops.mesh.boundary_vertices(), tol, solver)


def solve_spectrum_schur(ops: Operators, count: int, tol: Tolerances = DEFAULT) -> SteklovBasis:
    """Dense eigensolve of the boundary Schur complement pencil ``(S, B_bb)``."""
    red = ops.reduction
    if count < 0:
        raise EigenError("count must be nonnegative")
    if count > red.nb:
        raise EigenError(f"count {count} exceeds the number of boundary vertices {red.nb}")
    if count == 0:
        return finalize_basis(ops, np.zeros((ops.mesh.n_vertices, 0)), tol, "schur")
    try:
        S = red.schur()
    except RuntimeError as exc:  # singular interior factorisation
        raise EigenError(f"interior block factorisation failed: {exc}") from exc
    if not np.all(np.isfinite(S)):
        raise EigenError("interior block is singular (non-finite Schur complement); check the weight c")
    w, Xb = sla.eigh(S, red.B_bb, subset_by_index=[0, count - 1])
    return finalize_basis(ops, red.extend(Xb), tol, "schur")


def solve_spectrum_inductive(ops: Operators, count: int, tol: Tolerances = DEFAULT, block=4,
                             seed=0) -> SteklovBasis:
    """Successive constrained Rayleigh-quotient minimisation.

    Pair ``k`` minimises ``<u,u>_c / <u,u>_boundary`` over functions
    boundary-orthogonal to the ``k - 1`` pairs already locked. The
    minimisation is carried out by inverse iteration ``u <- K^{-1} B u`` on a
    small block, projected onto that orthogonal complement, with a
    Rayleigh-Ritz step; the leading Ritz vector is locked once its residual
    is at round-off level.
    """
    mesh = ops.mesh
    nb = len(mesh.boundary_vertices())
    if count < 0:
        raise EigenError("count must be nonnegative")
    if count > nb:
        raise EigenError(f"count {count} exceeds the number of boundary vertices {nb}")
    n = mesh.n_vertices
    if count == 0:
        return finalize_basis(ops, np.zeros((n, 0)), tol, "inductive")
    K = ops.energy.matrix.tocsc()
    B = ops.boundary_mass.matrix.tocsr()
    lu = spla.splu(K)
    rng = np.random.default_rng(seed)
    scale = max(1.0, float(abs(K).max()))
    lock_tol = 1e-11 * scale

    locked = np.zeros((n, 0))
    BL = np.zeros((n, 0))

    def deflate(Y):
        # remove components along locked pairs in the boundary form
        if locked.shape[1]:
            Y = Y - locked @ (BL.T @ Y)
            Y = Y - locked @ (BL.T @ Y)
        return Y

    while locked.shape[1] < count:
        b = min(block, nb - locked.shape[1])
        X = deflate(lu.solve(B @ rng.standard_normal((n, b))))
        last_res = np.inf
        for it in range(tol.max_iter):
            Y = deflate(lu.solve(B @ X))
            A = Y.T @ (K @ Y)
            M = Y.T @ (B @ Y)
            theta, Z = sla.eigh(0.5 * (A + A.T), 0.5 * (M + M.T))
            X = Y @ Z
            X /= np.sqrt(np.einsum("ij,ij->j", X, B @ X))
            R = K @ X - (B @ X) * theta
            res = np.linalg.norm(R, axis=0)
            last_res = res[0]
            nconv = 0
            while nconv < b - 1 and res[nconv] <= lock_tol * max(1.0, theta[nconv]):
                nconv += 1
            if b == 1 and res[0] <= lock_tol * max(1.0, theta[0]):
                nconv = 1
            if nconv:
                take = min(nconv, count - locked.shape[1])
                locked = np.column_stack([locked, X[:, :take]])
                BL = np.column_stack([BL, B @ X[:, :take]])
                break
        else:
            raise ConvergenceError(
                f"inverse iteration for pair {locked.shape[1] + 1} did not converge in {tol.max_iter} "
                f"iterations (residual {last_res:.3e})", iterate=X[:, 0].copy(), residual=last_res)
    return finalize_basis(ops, locked, tol, "inductive")


# ----------------------------------------------------------------- reports

@dataclass
class SignReport:
    gap: float
    simple: bool
    phi_min: float
    phi_max: float
    one_signed: bool

    @property
    def consistent(self) -> bool:
        """Simplicity and one-signedness hold together or fail together."""
        return self.simple == self.one_signed


def check_first_eigenfunction(basis: SteklovBasis) -> SignReport:
    if basis.count < 2:
        raise EigenError("need at least two eigenpairs to judge simplicity of mu_1")
    phi = basis.phi[:, 0]
    if phi.max() <= 0:
        phi = -phi
    gap = float(basis.mu[1] - basis.mu[0])
    lo, hi = float(phi.min()), float(phi.max())
    return SignReport(gap, gap > basis.tol.cluster_abs(basis.mu[0]), lo, hi, lo * hi > 0)


@dataclass
class Check:
    passed: bool
    max_error: float
    detail: str = ""

    def as_dict(self):
        return {"passed": bool(self.passed), "max_error": float(self.max_error), "detail": self.detail}


@dataclass
class StructureReport:
    checks: dict

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self):
        return [k for k, c in self.checks.items() if not c.passed]

    def as_dict(self):
        return {"ok": self.ok, "checks": {k: c.as_dict() for k, c in self.checks.items()}}


def verify_basis(basis: SteklovBasis, ops: Operators, samples=100, seed=0, tol=None) -> StructureReport:
    """Check orthogonality, the two coefficient formulas, Parseval and the
    span inequalities on random functions (normalised to unit boundary norm)."""
    tol = basis.tol.orth if tol is None else tol
    K = ops.energy.matrix
    B = ops.boundary_mass.matrix
    Phi, mu, m = basis.phi, basis.mu, basis.count
    rng = np.random.default_rng(seed)
    checks = {}

    def add(name, err, bound, detail=""):
        checks[name] = Check(bool(err <= bound), float(err), detail)

    if m == 0:
        return StructureReport({"empty": Check(True, 0.0, "no pairs")})

    G_b = Phi.T @ (B @ Phi)
    G_c = Phi.T @ (K @ Phi)
    add("boundary_orthonormal", np.abs(G_b - np.eye(m)).max(), tol)
    add("c_orthogonal", np.abs(G_c - np.diag(mu)).max(), tol * max(1.0, mu.max()))
    add("residuals", basis.residuals.max(), basis.tol.res)
    add("mu1_positive", 0.0 if mu[0] > 0 else 1.0, 0.0)

    coef_err = parseval_b = parseval_c = cor10 = 0.0
    span_v = span_w = 0.0
    for _ in range(samples):
        u = rng.uniform(-1.0, 1.0, ops.mesh.n_vertices)
        u /= np.sqrt(u @ (B @ u))
        cb = Phi.T @ (B @ u)
        cc = (Phi.T @ (K @ u)) / mu
        coef_err = max(coef_err, np.abs(cb - cc).max())
        cor10 = max(cor10, mu[0] * (u @ (B @ u)) - c_inner_product(u, u, ops))

        a = rng.standard_normal(m)
        v = Phi @ a
        nv = np.sqrt(v @ (B @ v))
        v, a = v / nv, a / nv
        c = Phi.T @ (B @ v)
        parseval_b = max(parseval_b, abs(v @ (B @ v) - c @ c))
        parseval_c = max(parseval_c, abs(v @ (K @ v) - mu @ c**2))

        for jj in range(1, m):
            lo = Phi[:, :jj] @ rng.standard_normal(jj)
            lo /= np.sqrt(lo @ (B @ lo))
            span_v = max(span_v, lo @ (K @ lo) - mu[jj - 1])
            hi = Phi[:, jj:] @ rng.standard_normal(m - jj)
            hi /= np.sqrt(hi @ (B @ hi))
            span_w = max(span_w, mu[jj] - hi @ (K @ hi))
    add("coefficient_formulas", coef_err, tol, "<u,phi>_c / mu == <u,phi>_boundary")
    add("parseval_boundary", parseval_b, tol)
    add("parseval_c", parseval_c, tol * max(1.0, mu.max()))
    add("corollary_mu1_bound", max(cor10, 0.0), tol, "mu_1 ||u||_b^2 <= ||u||_c^2")
    add("span_upper", max(span_v, 0.0), tol, "||v||_c^2 <= mu_j ||v||_b^2 on span{phi_i, i<=j}")
    add("span_lower", max(span_w, 0.0), tol, "||w||_c^2 >= mu_{j+1} ||w||_b^2 on span{phi_i, i>j}")
    return StructureReport(checks)
