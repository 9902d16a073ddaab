"""Boundary-trace spectral machinery.

The Dirichlet-to-Neumann map ``Lambda`` acts on boundary traces (arrays
over ``mesh.boundary_vertices()``). Given a resonance index ``j``
(1-based), a trace splits into the part below the ``mu_j`` cluster, the
cluster part, the part above it (within the computed basis) and a tail.

Norm convention: the boundary L2 norm stands in for the trace H^1 norm,
and ``||u||_proxy^2 = sum (1 + mu_i^2) c_i^2`` stands in for the H^2 norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import Operators, assemble_boundary_weighted, boundary_load
from .eigen import SteklovBasis


class TraceError(ValueError):
    pass


def apply_dtn(trace, ops: Operators) -> np.ndarray:
    """Nodal trace of the weak normal derivative of the weighted-harmonic extension."""
    red = ops.reduction
    trace = np.asarray(trace, dtype=float)
    if trace.shape[0] != red.nb:
        raise TraceError(f"trace must have {red.nb} boundary values")
    return red.to_nodal(red.dtn_weak(trace))


@dataclass
class SpectralSplit:
    j: int
    cluster: list
    bar: np.ndarray
    zero: np.ndarray
    tilde: np.ndarray
    tail: np.ndarray
    coefficients: np.ndarray

    @property
    def perp(self):
        return self.bar + self.tilde

    @property
    def parts(self):
        return {"bar": self.bar, "zero": self.zero, "tilde": self.tilde, "tail": self.tail}


def _cluster_bounds(basis, j):
    cl = basis.cluster_of(j)
    return cl[0], cl[-1] + 1


def split(trace, basis: SteklovBasis, j: int, ops: Operators) -> SpectralSplit:
    red = ops.reduction
    trace = np.asarray(trace, dtype=float)
    if not 1 <= j <= basis.count:
        raise TraceError(f"resonance index {j} outside basis of size {basis.count}")
    lo, hi = _cluster_bounds(basis, j)
    if hi > basis.count:
        raise TraceError("basis must extend past the resonant cluster")
    Phi = basis.traces
    c = Phi.T @ (red.B_bb @ trace)
    bar = Phi[:, :lo] @ c[:lo]
    zero = Phi[:, lo:hi] @ c[lo:hi]
    tilde = Phi[:, hi:] @ c[hi:]
    tail = trace - bar - zero - tilde
    return SpectralSplit(j, list(range(lo, hi)), bar, zero, tilde, tail, c)


class GammaField:
    """Slope bound ``Gamma(x)`` at the boundary quadrature points.

    Enforces ``0 <= Gamma <= gap`` with ``gap = mu_{j+1} - mu_j`` and strict
    inequality on a boundary subset of positive length.
    """

    def __init__(self, ops: Operators, values, gap: float, atol=1e-12):
        q = ops.quadrature
        values = np.array(np.broadcast_to(np.asarray(values, dtype=float), q.weights.shape))
        if not gap > 0:
            raise TraceError(f"spectral gap must be positive (got {gap:.3e})")
        slack = atol * max(1.0, gap)
        if np.any(values < -slack):
            e, k = np.argwhere(values < -slack)[0]
            raise TraceError(f"Gamma negative at {q.points[e, k].tolist()}")
        if np.any(values > gap + slack):
            e, k = np.argwhere(values > gap + slack)[0]
            raise TraceError(f"Gamma = {values[e, k]:.6g} exceeds the gap {gap:.6g} at {q.points[e, k].tolist()}")
        strict_length = float(np.sum(q.weights[values < gap - slack]))
        if not strict_length > 0:
            raise TraceError("Gamma must lie strictly below the gap on a boundary subset of positive length")
        self.values = values
        self.gap = float(gap)
        self.strict_length = strict_length
        self._ops = ops

    @classmethod
    def constant(cls, ops, value, gap):
        return cls(ops, float(value), gap)

    @classmethod
    def from_regions(cls, ops, region_values: dict, gap, default=0.0):
        """``region_values`` maps boundary tags to constant values."""
        tags = ops.quadrature.tags
        vals = np.full(len(tags), float(default))
        for tag, v in region_values.items():
            vals[tags == int(tag)] = float(v)
        return cls(ops, np.repeat(vals[:, None], ops.quadrature.weights.shape[1], axis=1), gap)

    @property
    def strict_subset(self) -> bool:
        return self.strict_length > 0

    def max(self) -> float:
        return float(self.values.max())

    def mass(self):
        """Boundary-restricted matrix of ``int Gamma u v``."""
        return weighted_boundary_matrix(self._ops, self.values)


def weighted_boundary_matrix(ops, values):
    red = ops.reduction
    M = assemble_boundary_weighted(ops.mesh, values, ops.quadrature).matrix.tocsc()
    return M[red.bnd][:, red.bnd].toarray()


def resonance_gap(basis: SteklovBasis, j: int) -> float:
    lo, hi = _cluster_bounds(basis, j)
    if hi >= basis.count:
        raise TraceError("basis does not reach the eigenvalue above the resonant cluster")
    return float(basis.mu[hi] - basis.mu[j - 1])


def _weight_matrix(gamma, ops):
    if isinstance(gamma, GammaField):
        return gamma.mass()
    return weighted_boundary_matrix(ops, gamma)


def coercivity_functional(trace, basis: SteklovBasis, j: int, gamma, ops: Operators) -> float:
    """``<Lambda u - (mu_j + Gamma) u, u_tilde - (u_bar + u_0)>`` on the boundary.

    ``gamma`` is a :class:`GammaField` or raw values at the quadrature points.
    """
    red = ops.reduction
    sp_ = split(trace, basis, j, ops)
    w = sp_.tilde - sp_.bar - sp_.zero
    mu_j = basis.mu[j - 1]
    M = _weight_matrix(gamma, ops)
    weak = red.dtn_weak(trace) - mu_j * (red.B_bb @ trace) - M @ trace
    return float(w @ weak)


def coercivity_terms(trace, basis, j, p_values, ops) -> dict:
    """Pieces of the coercivity form for a slope field ``p``.

    ``tilde``: <(Lambda - mu_j - p) u~, u~>, ``bar``: <(mu_j - Lambda) u_bar, u_bar>,
    ``low``: <p (u_bar + u0), u_bar + u0> (always >= 0). Their sum is the
    functional itself.
    """
    red = ops.reduction
    sp_ = split(trace, basis, j, ops)
    M = _weight_matrix(p_values, ops)
    mu_j = basis.mu[j - 1]
    S = red.schur()
    t, b, a = sp_.tilde, sp_.bar, sp_.bar + sp_.zero
    return {
        "tilde": float(t @ (S @ t) - mu_j * t @ (red.B_bb @ t) - t @ (M @ t)),
        "bar": float(mu_j * b @ (red.B_bb @ b) - b @ (S @ b)),
        "low": float(a @ (M @ a)),
        "perp_sq": float(red.inner(sp_.perp, sp_.perp)),
        "tilde_sq": float(red.inner(t, t)),
    }


@dataclass
class DeltaEstimate:
    delta_hat: float      # sampled minimum of D / ||u_perp||^2
    delta_dense: float    # exact minimum of the reduced lower-bound form
    samples: int
    j: int
    cluster: list
    gap: float


def reduced_form(basis, j, gamma, ops):
    """Matrix of the lower-bound form on coefficients of ``u_perp``.

    Block diagonal: (Lambda - mu_j - Gamma) on the part above the cluster,
    (mu_j - Lambda) below it. ``D(u) >= c^T Q c`` for every trace ``u`` in
    the computed span, where ``c`` are the coefficients of ``u_perp``.
    """
    red = ops.reduction
    lo, hi = _cluster_bounds(basis, j)
    Phi = basis.traces
    S = red.schur()
    M = _weight_matrix(gamma, ops)
    mu_j = basis.mu[j - 1]
    up, dn = Phi[:, hi:], Phi[:, :lo]
    Q_up = up.T @ (S - mu_j * red.B_bb - M) @ up
    Q_dn = dn.T @ (mu_j * red.B_bb - S) @ dn
    m = lo + (basis.count - hi)
    Q = np.zeros((m, m))
    Q[:lo, :lo] = 0.5 * (Q_dn + Q_dn.T)
    Q[lo:, lo:] = 0.5 * (Q_up + Q_up.T)
    return Q


def estimate_delta(basis, j, gamma, ops, sample_count=1000, seed=0) -> DeltaEstimate:
    if sample_count < 100:
        raise TraceError("sample_count must be at least 100")
    red = ops.reduction
    lo, hi = _cluster_bounds(basis, j)
    if lo == 0 and hi == basis.count:
        raise TraceError("computed span contains only the resonant cluster; u_perp is always zero")
    Q = reduced_form(basis, j, gamma, ops)
    delta_dense = float(np.linalg.eigvalsh(Q)[0])
    rng = np.random.default_rng(seed)
    Phi = basis.traces
    mu_j = basis.mu[j - 1]
    S = red.schur()
    M = _weight_matrix(gamma, ops)
    A = Phi.T @ (S - mu_j * red.B_bb - M) @ Phi
    signs = np.ones(basis.count)
    signs[:hi] = -1.0
    best = np.inf
    C = rng.standard_normal((sample_count, basis.count))
    for c in C:
        perp2 = float(np.sum(c[:lo] ** 2) + np.sum(c[hi:] ** 2))
        if perp2 <= 0:
            continue
        d = float((signs * c) @ (A @ c))
        best = min(best, d / perp2)
    gap = float(basis.mu[hi] - mu_j) if hi < basis.count else float("nan")
    return DeltaEstimate(float(best), delta_dense, sample_count, j, list(range(lo, hi)), gap)


@dataclass
class EtaReport:
    eta_hat: float
    eta_exact: float
    q: float
    j: int

    @property
    def positive(self) -> bool:
        return self.eta_hat > 0


def proxy_norm(trace, basis, ops) -> float:
    red = ops.reduction
    c = basis.traces.T @ (red.B_bb @ trace)
    return float(np.sqrt(np.sum((1.0 + basis.mu**2) * c**2)))


def shifted_residual_norm(trace, basis, j, q, ops) -> float:
    """``||(Lambda - mu_j - q) u||`` in the boundary norm."""
    red = ops.reduction
    r = apply_dtn(trace, ops) - (basis.mu[j - 1] + q) * trace
    return red.norm(r)


def lemma3_bound_check(basis, j, q, ops, samples=1000, seed=0) -> EtaReport:
    gap = resonance_gap(basis, j)
    if not 0.0 < q < gap:
        raise TraceError(f"q must lie in the open interval (0, {gap:.6g}); got {q}")
    rng = np.random.default_rng(seed)
    Phi = basis.traces
    best = np.inf
    for _ in range(samples):
        u = Phi @ rng.standard_normal(basis.count)
        best = min(best, shifted_residual_norm(u, basis, j, q, ops) / proxy_norm(u, basis, ops))
    shift = np.abs(basis.mu - basis.mu[j - 1] - q) / np.sqrt(1.0 + basis.mu**2)
    return EtaReport(float(best), float(shift.min()), float(q), j)


def diagnostics_report(basis, j, gamma, ops, q=None, samples=1000, seed=0) -> dict:
    """JSON-ready summary of the coercivity and shift constants."""
    delta = estimate_delta(basis, j, gamma, ops, samples, seed)
    gap = resonance_gap(basis, j)
    q = 0.5 * gap if q is None else q
    eta = lemma3_bound_check(basis, j, q, ops, samples=min(samples, 200), seed=seed)
    return {
        "delta_hat": delta.delta_hat,
        "delta_dense": delta.delta_dense,
        "eta_hat": eta.eta_hat,
        "eta_exact": eta.eta_exact,
        "q": q,
        "gap": gap,
        "j": j,
        "cluster": [i + 1 for i in delta.cluster],
        "norms": "boundary L2 for the trace H1 norm; spectral proxy sum (1+mu_i^2) c_i^2 for H2",
    }


def nodal_load(ops, values):
    """Boundary load vector restricted to boundary vertices."""
    return boundary_load(ops.mesh, values, ops.quadrature)[ops.reduction.bnd]
