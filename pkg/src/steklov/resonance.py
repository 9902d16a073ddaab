"""Resonant nonlinear boundary problem and its continuation solver.

Problem: find ``u`` with ``-Lap u + c u = 0`` in the domain and

    du/dn = mu_j u + g(x, u) + h(x)   on the boundary,

where ``mu_j`` is a Steklov eigenvalue. Discretely everything lives on the
boundary trace: ``u`` is the weighted-harmonic extension of its trace and
the boundary equation is tested with the boundary hat functions.

The continuation family is

    Lambda u - mu_j u - (1 - lam) (delta / 2) u - lam (g(., u) + h) = 0,

which is linear and uniquely solvable (``u = 0``) at ``lam = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import Operators
from .config import DEFAULT, Tolerances
from .eigen import SteklovBasis
from .trace import GammaField, resonance_gap, weighted_boundary_matrix, nodal_load


class ResonanceError(ValueError):
    pass


class ContinuationError(RuntimeError):
    """Continuation stalled; ``trace`` holds the accepted steps so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


# ------------------------------------------------------------- nonlinearity

@dataclass(frozen=True)
class GrowthBounds:
    """Declared ``|g(x,u)| <= (Gamma(x) + sigma)|u| + b`` for ``|u| >= K``."""

    sigma: float = 0.0
    K: float = 1.0
    b: float = 0.0


@dataclass(frozen=True)
class SplitBounds:
    """Bounds needed to split ``g``: ``g >= A`` for ``u >= R2``, ``g <= a`` for
    ``u <= R1``, ``g <= c|u| + b`` for ``u >= B``."""

    a: float
    A: float
    b: float
    c: float
    B: float
    R1: float = -1.0
    R2: float = 1.0


class NonlinearityDef:
    """Boundary nonlinearity ``g(x, u)``.

    ``func(points, tags, u)`` and ``deriv(points, tags, u)`` act on flat
    arrays. ``regions`` (a set of boundary tags) restricts ``g`` to part of
    the boundary; it is zero elsewhere. Without ``deriv`` the slope is taken
    by central differences with step ``fd_step * (1 + |u|)``.
    """

    def __init__(self, func, deriv=None, name="custom", regions=None, growth=None, split_bounds=None,
                 fd_step=DEFAULT.fd_step):
        self.func = func
        self.deriv = deriv
        self.name = name
        self.regions = None if regions is None else frozenset(int(t) for t in regions)
        self.growth = growth
        self.split_bounds = split_bounds
        self.fd_step = fd_step

    def _mask(self, tags):
        if self.regions is None:
            return np.ones(len(tags), dtype=bool)
        return np.isin(tags, list(self.regions))

    def evaluate(self, points, tags, u):
        u = np.asarray(u, dtype=float)
        tags = np.broadcast_to(np.asarray(tags), u.shape)
        out = np.zeros_like(u)
        m = self._mask(tags)
        if m.any():
            out[m] = self.func(np.asarray(points)[m] if np.ndim(points) > 1 else points, tags[m], u[m])
        return out

    def derivative(self, points, tags, u):
        u = np.asarray(u, dtype=float)
        tags = np.broadcast_to(np.asarray(tags), u.shape)
        if self.deriv is not None:
            out = np.zeros_like(u)
            m = self._mask(tags)
            if m.any():
                out[m] = self.deriv(np.asarray(points)[m], tags[m], u[m])
            return out
        step = self.fd_step * (1.0 + np.abs(u))
        return (self.evaluate(points, tags, u + step) - self.evaluate(points, tags, u - step)) / (2.0 * step)

    def __repr__(self):
        return f"NonlinearityDef({self.name!r}, regions={sorted(self.regions) if self.regions else 'all'})"


def ex1_sin2(mu1, regions=(1,)):
    """``mu1 * u * sin(u)^2`` on the given boundary region, zero elsewhere."""
    mu1 = float(mu1)
    return NonlinearityDef(
        lambda x, t, u: mu1 * u * np.sin(u) ** 2,
        lambda x, t, u: mu1 * (np.sin(u) ** 2 + u * np.sin(2.0 * u)),
        name="ex1_sin2", regions=regions,
        growth=GrowthBounds(sigma=0.0, K=1.0, b=0.0),
        split_bounds=SplitBounds(a=0.0, A=0.0, b=0.0, c=mu1, B=0.0))


def zero_nonlinearity():
    return NonlinearityDef(lambda x, t, u: np.zeros_like(u), lambda x, t, u: np.zeros_like(u), name="zero",
                           growth=GrowthBounds(0.0, 1.0, 0.0), split_bounds=SplitBounds(0, 0, 0, 0, 0))


def saturating(amplitude=1.0, scale=1.0, regions=None):
    """``amplitude * tanh(u / scale)``: bounded, sign condition holds."""
    a, s = float(amplitude), float(scale)
    return NonlinearityDef(lambda x, t, u: a * np.tanh(u / s),
                           lambda x, t, u: (a / s) / np.cosh(u / s) ** 2,
                           name="saturating", regions=regions,
                           growth=GrowthBounds(0.0, 1.0, abs(a)),
                           split_bounds=SplitBounds(a=abs(a), A=-abs(a), b=abs(a), c=0.0, B=0.0))


def linear(coefficient, regions=None):
    e = float(coefficient)
    return NonlinearityDef(lambda x, t, u: e * u, lambda x, t, u: np.full_like(u, e), name="linear",
                           regions=regions, growth=GrowthBounds(0.0, 1.0, 0.0),
                           split_bounds=SplitBounds(a=0.0, A=0.0, b=0.0, c=abs(e), B=0.0))


def cubic(coefficient=1.0, regions=None):
    """``coefficient * u^3``: superlinear, violates any linear growth bound."""
    e = float(coefficient)
    return NonlinearityDef(lambda x, t, u: e * u**3, lambda x, t, u: 3.0 * e * u**2, name="cubic",
                           regions=regions, growth=GrowthBounds(0.0, 1.0, 0.0))


CATALOG = {"ex1_sin2": ex1_sin2, "zero": zero_nonlinearity, "saturating": saturating,
           "linear": linear, "cubic": cubic}


# ------------------------------------------------------------- hypotheses

@dataclass
class HypothesisCheck:
    passed: bool
    detail: str = ""
    witness: dict | None = None

    def as_dict(self):
        return {"passed": bool(self.passed), "detail": self.detail, "witness": self.witness}


@dataclass
class HypothesisReport:
    checks: dict
    landesman_lazer: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def as_dict(self):
        return {"ok": self.ok, "failed": self.failed(),
                "checks": {k: c.as_dict() for k, c in self.checks.items()},
                "landesman_lazer": self.landesman_lazer}


def _u_grid(U, n=4001):
    # dense near zero, reaching +-U
    s = np.linspace(-1.0, 1.0, n)
    return U * np.sign(s) * np.abs(s) ** 3


def landesman_lazer_proxy(g, ops, U=1e3, step=1e-3, max_points=16):
    """Sampled ``limsup_{u -> -inf} g`` and ``liminf_{u -> +inf} g``.

    Reports the largest absolute value of each limit over the sampled points.

    Uses ``u`` in ``[-U, -U/2]`` and ``[U/2, U]`` with spacing ``step`` at up
    to ``max_points`` boundary quadrature points per region tag.
    """
    q = ops.quadrature
    pts, tags = q.flat_points(), q.flat_tags()
    pick = []
    for t in np.unique(tags):
        idx = np.flatnonzero(tags == t)
        pick.extend(idx[np.linspace(0, len(idx) - 1, min(max_points, len(idx))).astype(int)].tolist())
    neg = np.arange(-U, -U / 2 + step / 2, step)
    pos = -neg[::-1]
    sup_neg, inf_pos = [], []
    for k in pick:
        xk = np.repeat(pts[k][None, :], len(neg), axis=0)
        tk = np.full(len(neg), tags[k])
        sup_neg.append(float(g.evaluate(xk, tk, neg).max()))
        inf_pos.append(float(g.evaluate(xk, tk, pos).min()))
    sup_neg, inf_pos = np.array(sup_neg), np.array(inf_pos)
    return {"limsup_minus_inf": float(np.abs(sup_neg).max()), "liminf_plus_inf": float(np.abs(inf_pos).max()),
            "U": U, "step": step,
            "points": len(pick)}


def validate_hypotheses(g: NonlinearityDef, gamma, basis: SteklovBasis, j: int, ops: Operators, h=None,
                        U=1e3, tol: Tolerances = DEFAULT, landesman_lazer=True) -> HypothesisReport:
    """Sampled check of the sign, growth, slope-bound and orthogonality conditions.

    ``gamma`` is a :class:`GammaField` or raw values at the boundary
    quadrature points (validated here rather than at construction, so a
    violation is reported instead of raised). Keys: ``"01"`` sign,
    ``"02"`` growth, ``"03"`` slope bound, ``"04"`` orthogonality of ``h``,
    ``"gap"`` positivity of the gap above the resonant cluster.
    """
    q = ops.quadrature
    pts, tags = q.flat_points(), q.flat_tags()
    checks = {}
    try:
        gap = resonance_gap(basis, j)
    except Exception as exc:
        gap = float("nan")
        checks["gap"] = HypothesisCheck(False, str(exc))
    else:
        checks["gap"] = HypothesisCheck(gap > tol.cluster_abs(basis.mu[0]), f"mu_(j+1) - mu_j = {gap:.6g}")

    ugrid = _u_grid(U)
    P = np.repeat(pts, len(ugrid), axis=0)
    T = np.repeat(tags, len(ugrid))
    Ug = np.tile(ugrid, len(pts))
    G = g.evaluate(P, T, Ug)
    prod = G * Ug
    bad = np.flatnonzero(prod < -1e-12 * (1.0 + np.abs(Ug)))
    if bad.size:
        k = bad[np.argmin(prod[bad])]
        checks["01"] = HypothesisCheck(False, "g(x,u) u >= 0 violated",
                                       {"x": P[k].tolist(), "u": float(Ug[k]), "g": float(G[k])})
    else:
        checks["01"] = HypothesisCheck(True, f"sampled {len(Ug)} (x, u) pairs, |u| <= {U:g}")

    gvals = gamma.values if isinstance(gamma, GammaField) else np.broadcast_to(
        np.asarray(gamma, dtype=float), q.weights.shape)
    gflat = np.asarray(gvals, dtype=float).ravel()
    gb = g.growth or GrowthBounds()
    far = np.abs(Ug) >= gb.K
    bound = (np.repeat(gflat, len(ugrid)) + gb.sigma) * np.abs(Ug) + gb.b
    excess = np.abs(G) - bound
    viol = np.flatnonzero(far & (excess > 1e-9 * (1.0 + bound)))
    if viol.size:
        k = viol[np.argmax(excess[viol])]
        checks["02"] = HypothesisCheck(False, f"|g| <= (Gamma + {gb.sigma:g})|u| + {gb.b:g} for |u| >= {gb.K:g} violated",
                                       {"x": P[k].tolist(), "u": float(Ug[k]), "g": float(G[k]),
                                        "bound": float(bound[k])})
    else:
        checks["02"] = HypothesisCheck(True, f"sigma={gb.sigma:g}, K={gb.K:g}, b={gb.b:g}")

    if np.isfinite(gap):
        slack = 1e-12 * max(1.0, gap)
        low = np.flatnonzero(gflat < -slack)
        high = np.flatnonzero(gflat > gap + slack)
        strict = float(np.sum(q.weights.ravel()[gflat < gap - slack]))
        if low.size or high.size:
            k = (low if low.size else high)[0]
            checks["03"] = HypothesisCheck(False, f"0 <= Gamma <= gap = {gap:.6g} violated",
                                           {"x": pts[k].tolist(), "Gamma": float(gflat[k])})
        elif not strict > 0:
            checks["03"] = HypothesisCheck(False, "Gamma equals the gap almost everywhere")
        else:
            checks["03"] = HypothesisCheck(True, f"max Gamma = {gflat.max():.6g} <= gap {gap:.6g}; "
                                                 f"strict on length {strict:.4g}")
    else:
        checks["03"] = HypothesisCheck(False, "gap unavailable")

    if h is not None:
        trace = _as_trace(h, ops)
        red = ops.reduction
        cl = basis.cluster_of(j)
        d = basis.traces[:, cl].T @ (red.B_bb @ trace)
        scale = max(1.0, red.norm(trace))
        err = float(np.abs(d).max())
        checks["04"] = HypothesisCheck(err <= tol.orth * scale, f"max |<h, phi_j>| = {err:.3e}",
                                       None if err <= tol.orth * scale else {"defect": d.tolist()})
    ll = landesman_lazer_proxy(g, ops, U=U) if landesman_lazer else {}
    return HypothesisReport(checks, ll)


# -------------------------------------------------------------------- data

@dataclass
class RhsData:
    """Boundary data ``h`` as a P1 trace; ``nodal`` is the full-length array
    (zero in the interior), ``defect`` the remaining cluster coefficients."""

    trace: np.ndarray
    nodal: np.ndarray
    defect: np.ndarray
    removed: float


def _as_trace(h, ops):
    red = ops.reduction
    if isinstance(h, RhsData):
        return h.trace
    h = np.asarray(h, dtype=float)
    if h.shape == (ops.mesh.n_vertices,):
        return h[red.bnd]
    if h.shape == (red.nb,):
        return h
    raise ResonanceError(f"h must be a nodal array or a boundary trace, got shape {h.shape}")


def make_rhs(h, basis, j, ops) -> RhsData:
    """Wrap ``h`` without projecting."""
    red = ops.reduction
    trace = _as_trace(h, ops).copy()
    nodal = np.zeros(ops.mesh.n_vertices)
    nodal[red.bnd] = trace
    cl = basis.cluster_of(j)
    d = basis.traces[:, cl].T @ (red.B_bb @ trace)
    return RhsData(trace, nodal, d, 0.0)


def project_rhs(h_raw, basis, j, ops) -> RhsData:
    """Remove the resonant-cluster component of ``h``."""
    red = ops.reduction
    trace = _as_trace(h_raw, ops)
    cl = basis.cluster_of(j)
    Phi = basis.traces[:, cl]
    d = Phi.T @ (red.B_bb @ trace)
    out = trace - Phi @ d
    nodal = np.zeros(ops.mesh.n_vertices)
    nodal[red.bnd] = out
    return RhsData(out, nodal, Phi.T @ (red.B_bb @ out), float(np.linalg.norm(d)))


# ---------------------------------------------------- slope regularisation

class GammaTilde:
    """Regularised slope ``gamma~(x, u)`` at the boundary quadrature points.

    ``q1(x,u)/u`` for ``|u| >= Bbar``; for ``|u| < Bbar`` linear interpolation
    in ``u`` between ``Gamma(x)`` at ``u = 0`` and the value at ``+-Bbar``.
    """

    def __init__(self, q1, gamma_values, Bbar, points, tags):
        self.q1 = q1
        self.gamma = np.asarray(gamma_values, dtype=float).ravel()
        self.Bbar = float(Bbar)
        self.points = points
        self.tags = tags
        Bp = np.full(len(self.gamma), self.Bbar)
        self._slope_plus = q1.evaluate(points, tags, Bp) / self.Bbar
        self._slope_minus = q1.evaluate(points, tags, -Bp) / (-self.Bbar)

    def __call__(self, u, index=None):
        """``u`` aligned with the flat quadrature points (or ``index`` into them)."""
        u = np.asarray(u, dtype=float)
        idx = np.arange(len(self.gamma)) if index is None else np.asarray(index)
        B = self.Bbar
        gam = self.gamma[idx]
        out = np.empty_like(u)
        far = np.abs(u) >= B
        if far.any():
            uf = u[far]
            out[far] = self.q1.evaluate(self.points[idx][far], self.tags[idx][far], uf) / uf
        pos = ~far & (u >= 0)
        t = u[pos] / B
        out[pos] = self._slope_plus[idx][pos] * t + (1.0 - t) * gam[pos]
        neg = ~far & (u < 0)
        t = -u[neg] / B
        out[neg] = self._slope_minus[idx][neg] * t + (1.0 - t) * gam[neg]
        return out

    def remainder(self, g, u, index=None):
        """``f(x,u) = g(x,u) - gamma~(x,u) u``."""
        idx = np.arange(len(self.gamma)) if index is None else np.asarray(index)
        return g.evaluate(self.points[idx], self.tags[idx], u) - self(u, idx) * u

    def remainder_bound(self, g, n=2001):
        """Per-point ``sup_u |f(x,u)|``, sampled on ``|u| <= Bbar`` (f = g - q1 beyond)."""
        us = np.linspace(-self.Bbar, self.Bbar, n)
        npts = len(self.gamma)
        idx = np.repeat(np.arange(npts), n)
        U = np.tile(us, npts)
        f = np.abs(self.remainder(g, U, idx)).reshape(npts, n)
        return f.max(axis=1)


def build_gamma_tilde(g: NonlinearityDef, delta, gamma, ops: Operators, q1=None, Bbar=None) -> GammaTilde:
    """Construct ``gamma~`` with threshold ``Bbar``.

    ``q1`` defaults to ``g`` itself (the trivial split). Requires
    ``Bbar > max(1, B)`` and ``(b + 1) / Bbar < delta / 4`` with ``B = K`` and
    ``b`` from the declared growth bounds.
    """
    q = ops.quadrature
    gb = g.growth or GrowthBounds()
    need = max(1.0, gb.K, 4.0 * (gb.b + 1.0) / delta)
    if Bbar is None:
        Bbar = 1.01 * need
    if not Bbar > max(1.0, gb.K):
        raise ResonanceError(f"Bbar = {Bbar:g} must exceed max(1, B) = {max(1.0, gb.K):g}")
    if not (gb.b + 1.0) / Bbar < delta / 4.0:
        raise ResonanceError(f"threshold violated: (b + 1) / Bbar = {(gb.b + 1.0) / Bbar:.4g} >= delta / 4 = {delta / 4:.4g}")
    gvals = gamma.values if isinstance(gamma, GammaField) else np.broadcast_to(gamma, q.weights.shape)
    return GammaTilde(q1 or g, gvals, Bbar, q.flat_points(), q.flat_tags())


def decompose_g(g: NonlinearityDef, k: float, sigma=None, u_max=1e3, n=20001):
    """Split ``g = q_k + g_k`` by truncating the value of ``g`` at ``sigma_k``.

    ``g_k = clip(g, -sigma_k, sigma_k)`` and ``q_k = g - g_k``; both keep the
    sign of ``g`` (so ``u q_k >= 0``, ``u g_k >= 0``), ``|g_k| <= sigma_k`` and
    ``|q_k| <= |g|``. ``sigma_k`` defaults to ``max(|a|, |A|) + k``. Also
    returns the per-point radius ``r_k`` inside which ``q_k`` vanishes.
    """
    if not k > 0:
        raise ResonanceError("k must be positive")
    sb = g.split_bounds
    if sb is None:
        raise ResonanceError(f"{g.name}: split bounds (a, A, b, c, B) not declared")
    sig = float(max(abs(sb.a), abs(sb.A)) + k) if sigma is None else float(sigma)

    def gk(x, t, u):
        return np.clip(g.evaluate(x, t, u), -sig, sig)

    def qk(x, t, u):
        v = g.evaluate(x, t, u)
        return v - np.clip(v, -sig, sig)

    g_k = NonlinearityDef(gk, name=f"{g.name}_g{k:g}", growth=GrowthBounds(0.0, 1.0, sig))
    q_k = NonlinearityDef(qk, name=f"{g.name}_q{k:g}", growth=g.growth)

    def radius(points, tags):
        us = np.linspace(0.0, u_max, n)
        out = np.empty(len(tags))
        for i in range(len(tags)):
            xi = np.repeat(np.asarray(points)[i][None, :], n, axis=0)
            ti = np.full(n, tags[i])
            m = np.maximum(np.abs(g.evaluate(xi, ti, us)), np.abs(g.evaluate(xi, ti, -us)))
            over = np.flatnonzero(np.maximum.accumulate(m) > sig)
            out[i] = us[over[0] - 1] if over.size else u_max
        return out

    return q_k, g_k, sig, radius


# ------------------------------------------------------------ continuation

@dataclass
class HomotopyStep:
    lam: float
    u: np.ndarray
    boundary_residual: float
    interior_residual: float
    newton_iterations: int
    perp_norm: float
    zero_norm: float
    bound: float

    @property
    def bound_ok(self) -> bool:
        """``||u_perp||^2 <= bound``, the form recorded in the trace."""
        return self.perp_norm**2 <= self.bound * (1.0 + 1e-12) + 1e-12


@dataclass
class HomotopyTrace:
    steps: list
    delta: float
    alpha: float
    beta: float
    j: int
    rejected: int = 0

    @property
    def final(self) -> HomotopyStep:
        return self.steps[-1]

    @property
    def lambdas(self):
        return np.array([s.lam for s in self.steps])

    def bound_violations(self) -> int:
        return sum(not s.bound_ok for s in self.steps)

    def linear_bound_violations(self) -> int:
        """Count of steps breaking ``||u_perp|| <= alpha + sqrt(alpha^2 + 2 alpha ||u0||)``."""
        return sum(s.perp_norm > s.bound * (1.0 + 1e-12) + 1e-12 for s in self.steps)

    def rows(self):
        for s in self.steps:
            yield {"lambda": s.lam, "boundary_residual": s.boundary_residual,
                   "interior_residual": s.interior_residual, "newton_iterations": s.newton_iterations,
                   "perp_norm": s.perp_norm, "zero_norm": s.zero_norm, "apriori_bound": s.bound,
                   "bound_ok": int(s.bound_ok)}


class BoundaryProblem:
    """Discrete boundary operators for one resonance problem."""

    def __init__(self, g, rhs: RhsData, basis: SteklovBasis, j: int, ops: Operators):
        self.g, self.rhs, self.basis, self.j, self.ops = g, rhs, basis, j, ops
        red = ops.reduction
        self.red = red
        self.S = red.schur()
        self.B = red.B_bb
        self.mu_j = float(basis.mu[j - 1])
        q = ops.quadrature
        self.q = q
        self.points = q.flat_points()
        self.tags = q.flat_tags()
        pos = np.full(ops.mesh.n_vertices, -1)
        pos[red.bnd] = np.arange(red.nb)
        self.local_edges = pos[q.edges]
        self.H = self.B @ rhs.trace
        cl = basis.cluster_of(j)
        self.Phi0 = basis.traces[:, cl]

    def at_quadrature(self, trace):
        return trace[self.local_edges] @ self.q.shape.T

    def g_load(self, trace):
        uq = self.at_quadrature(trace).ravel()
        gq = self.g.evaluate(self.points, self.tags, uq).reshape(self.q.weights.shape)
        return nodal_load(self.ops, gq)

    def g_slope_matrix(self, trace):
        uq = self.at_quadrature(trace).ravel()
        dq = self.g.derivative(self.points, self.tags, uq).reshape(self.q.weights.shape)
        return weighted_boundary_matrix(self.ops, dq)

    def residual(self, trace, lam, delta):
        Bu = self.B @ trace
        return (self.S @ trace - (self.mu_j + (1.0 - lam) * 0.5 * delta) * Bu
                - lam * (self.g_load(trace) + self.H))

    def jacobian(self, trace, lam, delta):
        J = self.S - (self.mu_j + (1.0 - lam) * 0.5 * delta) * self.B
        if lam:
            J = J - lam * self.g_slope_matrix(trace)
        return J

    def norm(self, weak):
        return self.red.dual_norm(weak)

    def parts(self, trace):
        c0 = self.Phi0.T @ (self.B @ trace)
        zero = self.Phi0 @ c0
        perp = trace - zero
        return self.red.norm(perp), self.red.norm(zero)

    def interior_residual(self, full):
        r = self.ops.energy.matrix @ full
        return float(np.linalg.norm(r[self.red.int])) if len(self.red.int) else 0.0


def _newton(prob, u0, lam, delta, tol):
    u = u0.copy()
    r = prob.residual(u, lam, delta)
    res = prob.norm(r)
    for it in range(1, tol.newton_max_iter + 1):
        if not np.isfinite(res):
            return None, res, it
        du = np.linalg.solve(prob.jacobian(u, lam, delta), -r)
        u = u + du
        r = prob.residual(u, lam, delta)
        res = prob.norm(r)
        if res <= tol.newton and prob.red.norm(du) <= tol.newton_step * max(1.0, prob.red.norm(u)):
            return u, res, it
    return None, res, tol.newton_max_iter


def homotopy_solve(g: NonlinearityDef, rhs: RhsData, basis: SteklovBasis, j: int, ops: Operators, delta: float,
                   gamma, tol: Tolerances = DEFAULT, dlambda0=None) -> HomotopyTrace:
    """Newton continuation in ``lam`` from 0 to 1.

    ``delta`` is the coercivity constant for ``gamma`` (use the dense value
    from :func:`steklov.trace.estimate_delta`). Each accepted step records
    the a-priori quantity ``alpha + sqrt(alpha^2 + 2 alpha ||u0||)`` with
    ``alpha = (||v|| + ||h||) / delta``, ``v`` the bound on the remainder
    ``f = g - gamma~ u``.
    """
    if not delta > 0:
        raise ResonanceError("coercivity constant delta must be positive")
    prob = BoundaryProblem(g, rhs, basis, j, ops)
    red = prob.red
    gt = build_gamma_tilde(g, delta, gamma, ops)
    v = gt.remainder_bound(g).reshape(ops.quadrature.weights.shape)
    beta = math.sqrt(ops.quadrature.integrate(v**2)) + red.norm(rhs.trace)
    alpha = beta / delta

    def record(lam, u, res, iters):
        full = red.extend(u)
        perp, zero = prob.parts(u)
        bound = alpha + math.sqrt(alpha**2 + 2.0 * alpha * zero)
        return HomotopyStep(lam, full, res, prob.interior_residual(full), iters, perp, zero, bound)

    u = np.zeros(red.nb)
    steps = [record(0.0, u, prob.norm(prob.residual(u, 0.0, delta)), 0)]
    trace = HomotopyTrace(steps, float(delta), alpha, beta, j)
    dmax = tol.dlambda0 if dlambda0 is None else dlambda0
    dl = dmax
    lam = 0.0
    prev = None
    while lam < 1.0:
        target = min(1.0, lam + dl)
        if 1.0 - target < 1e-12:
            target = 1.0
        guess = u
        if prev is not None:
            lam_p, u_p = prev
            guess = u + (u - u_p) * (target - lam) / (lam - lam_p)
        new, res, iters = _newton(prob, guess, target, delta, tol)
        if new is None and prev is not None:
            new, res, iters = _newton(prob, u, target, delta, tol)
        if new is None:
            trace.rejected += 1
            dl *= 0.5
            if dl < tol.dlambda_min:
                raise ContinuationError(f"continuation stalled at lambda = {lam:.6g} (residual {res:.3e})", trace)
            continue
        prev = (lam, u)
        lam, u = target, new
        steps.append(record(lam, u, res, iters))
        dl = min(dmax, 2.0 * dl)
    final = steps[-1]
    if final.interior_residual > tol.pde:
        raise ContinuationError(f"interior residual {final.interior_residual:.3e} exceeds {tol.pde:g}", trace)
    return trace


def verify_solution(u, g, rhs, ops, basis, j, tol: Tolerances = DEFAULT) -> dict:
    """Residuals of a nodal candidate ``u`` for the full problem (``lam = 1``)."""
    red = ops.reduction
    rhs = rhs if isinstance(rhs, RhsData) else make_rhs(rhs, basis, j, ops)
    prob = BoundaryProblem(g, rhs, basis, j, ops)
    u = np.asarray(u, dtype=float)
    trace = u[red.bnd]
    r_full = ops.energy.matrix @ u
    interior = float(np.linalg.norm(r_full[red.int])) if len(red.int) else 0.0
    weak = r_full[red.bnd] - prob.mu_j * (prob.B @ trace) - prob.g_load(trace) - prob.H
    boundary = prob.norm(weak)
    balance = prob.Phi0.T @ (prob.g_load(trace) + prob.H)
    resid_proj = prob.Phi0.T @ weak
    return {
        "interior_residual": interior,
        "boundary_residual": boundary,
        "resonance_balance": float(np.abs(balance).max()),
        "residual_resonant_component": float(np.abs(resid_proj).max()),
        "interior_ok": interior <= tol.pde,
        "boundary_ok": boundary <= tol.newton,
        "balance_ok": float(np.abs(balance).max()) <= max(tol.orth, 10 * tol.newton),
    }
