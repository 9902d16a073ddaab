"""P1 assembly of the energy, weighted-mass and boundary-mass forms.

Functions on the mesh are plain nodal arrays of length ``V``; boundary
traces are arrays over ``mesh.boundary_vertices()`` (loop order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import Mesh

# 2-point Gauss on [0, 1]
_GAUSS_T = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
_GAUSS_W = np.array([0.5, 0.5])


class AssemblyError(ValueError):
    pass


class WeightField:
    """Nonnegative weight ``c(x)`` given as a vectorised evaluator.

    ``evaluator`` maps an ``(n, 2)`` array of points to ``n`` values.
    """

    def __init__(self, evaluator, descriptor="custom"):
        self.evaluator = evaluator
        self.descriptor = descriptor

    @classmethod
    def constant(cls, value):
        value = float(value)
        return cls(lambda x: np.full(len(x), value), f"constant({value:g})")

    def __call__(self, points):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        vals = np.asarray(self.evaluator(points), dtype=float).reshape(-1)
        if vals.shape != (len(points),):
            raise AssemblyError("weight evaluator returned the wrong shape")
        bad = np.flatnonzero(~(vals >= 0))
        if bad.size:
            i = bad[0]
            raise AssemblyError(f"weight c is negative (or NaN) at point {points[i].tolist()}: c = {vals[i]!r}")
        return vals

    def __repr__(self):
        return f"WeightField({self.descriptor})"


@dataclass(eq=False)
class SymmetricOperator:
    """Exactly symmetric sparse matrix of a bilinear form over mesh DOFs.

    Assembled entries are reduced to the upper triangle and mirrored, so
    ``matrix`` is symmetric bit for bit.
    """

    matrix: sp.csr_matrix
    name: str = ""

    def __post_init__(self):
        A = sp.csr_matrix(self.matrix)
        if A.shape[0] != A.shape[1]:
            raise AssemblyError("operator must be square")
        U = sp.triu(A, format="csr")
        full = (U + sp.triu(U, k=1, format="csr").T).tocsr()
        full.sum_duplicates()
        full.sort_indices()
        self.matrix = full

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return (self.matrix != self.matrix.T).nnz == 0

    def __matmul__(self, u):
        return self.matrix @ u

    def bilinear(self, u, v) -> float:
        return float(np.dot(u, self.matrix @ v))

    def quadratic_form(self, u) -> float:
        return self.bilinear(u, u)

    def coo_lines(self):
        """``row col value`` lines for the stored upper triangle."""
        U = sp.triu(self.matrix).tocoo()
        order = np.lexsort((U.col, U.row))
        return [f"{U.row[k]} {U.col[k]} {U.data[k]:.17g}" for k in order]

    def write_coo(self, path):
        with open(path, "w") as fh:
            fh.write(f"% {self.name} n={self.n} symmetric upper triangle\n")
            fh.write("\n".join(self.coo_lines()) + "\n")


def _new_operator(rows, cols, vals, n, name):
    A = sp.coo_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)).tocsr()
    return SymmetricOperator(A, name)


def assemble_stiffness(mesh: Mesh) -> SymmetricOperator:
    p = mesh.vertices[mesh.triangles]
    area = mesh.signed_areas()
    # gradients of barycentric coordinates: rotate opposite edge vectors
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-e[..., 1], e[..., 0]], axis=-1) / (2.0 * area[:, None, None])
    local = np.einsum("tad,tbd->tab", grads, grads) * area[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    return _new_operator(rows, cols, local.reshape(-1, 9), mesh.n_vertices, "stiffness")


def triangle_quadrature(mesh: Mesh):
    """Edge-midpoint rule (degree 2): points ``(T, 3, 2)``, weights ``(T, 3)``.

    Point ``q`` is the midpoint of the edge opposite to local vertex ``q``.
    """
    p = mesh.vertices[mesh.triangles]
    mid = np.stack([0.5 * (p[:, 1] + p[:, 2]), 0.5 * (p[:, 2] + p[:, 0]), 0.5 * (p[:, 0] + p[:, 1])], axis=1)
    w = np.repeat(mesh.signed_areas()[:, None] / 3.0, 3, axis=1)
    return mid, w


# basis values at edge midpoints: phi_a(m_q) = 1/2 if a != q else 0
_MID_SHAPE = 0.5 * (np.ones((3, 3)) - np.eye(3))


def assemble_weighted_mass(mesh: Mesh, weight: WeightField) -> SymmetricOperator:
    pts, w = triangle_quadrature(mesh)
    c = weight(pts.reshape(-1, 2)).reshape(w.shape)
    local = np.einsum("tq,qa,qb->tab", w * c, _MID_SHAPE, _MID_SHAPE)
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    return _new_operator(rows, cols, local.reshape(-1, 9), mesh.n_vertices, "weighted_mass")


def integrate_weight(mesh: Mesh, weight: WeightField) -> float:
    pts, w = triangle_quadrature(mesh)
    return float(np.sum(w * weight(pts.reshape(-1, 2)).reshape(w.shape)))


@dataclass(frozen=True, eq=False)
class BoundaryQuadrature:
    """Two Gauss points per boundary edge.

    ``points[e, q]``, ``weights[e, q]`` (includes edge length), edge tags
    ``tags[e]`` and ``shape[q, a]`` = value of the edge's local node ``a``
    basis function at point ``q``.
    """

    points: np.ndarray
    weights: np.ndarray
    tags: np.ndarray
    edges: np.ndarray
    shape: np.ndarray

    def interpolate(self, nodal):
        """Values of a nodal field (length V) at the quadrature points."""
        nodal = np.asarray(nodal, dtype=float)
        return nodal[self.edges] @ self.shape.T

    def integrate(self, values) -> float:
        return float(np.sum(self.weights * values))

    def flat_points(self):
        return self.points.reshape(-1, 2)

    def flat_tags(self):
        return np.repeat(self.tags, self.points.shape[1])


def boundary_quadrature(mesh: Mesh) -> BoundaryQuadrature:
    be = mesh.boundary_edges
    a, b = mesh.vertices[be[:, 0]], mesh.vertices[be[:, 1]]
    pts = a[:, None, :] + _GAUSS_T[None, :, None] * (b - a)[:, None, :]
    length = mesh.boundary_edge_lengths()
    w = length[:, None] * _GAUSS_W[None, :]
    shape = np.column_stack([1.0 - _GAUSS_T, _GAUSS_T])
    return BoundaryQuadrature(pts, w, mesh.boundary_tags.copy(), be.copy(), shape)


def assemble_boundary_weighted(mesh: Mesh, values, quad=None) -> SymmetricOperator:
    """``int_{boundary} p u v`` with ``p`` given at the boundary quadrature points."""
    quad = quad or boundary_quadrature(mesh)
    values = np.broadcast_to(np.asarray(values, dtype=float), quad.weights.shape)
    local = np.einsum("eq,qa,qb->eab", quad.weights * values, quad.shape, quad.shape)
    rows = np.repeat(quad.edges, 2, axis=1)
    cols = np.tile(quad.edges, (1, 2))
    return _new_operator(rows, cols, local.reshape(-1, 4), mesh.n_vertices, "boundary_weighted")


def assemble_boundary_mass(mesh: Mesh) -> SymmetricOperator:
    if len(mesh.boundary_edges) == 0:
        raise AssemblyError("mesh has no boundary edges")
    op = assemble_boundary_weighted(mesh, 1.0)
    op.name = "boundary_mass"
    return op


def boundary_load(mesh: Mesh, values, quad=None) -> np.ndarray:
    """``int_{boundary} f psi_k`` for ``f`` sampled at the quadrature points."""
    quad = quad or boundary_quadrature(mesh)
    contrib = (quad.weights * values) @ quad.shape
    return np.bincount(quad.edges.ravel(), contrib.ravel(), minlength=mesh.n_vertices)


# ------------------------------------------------------------------ bundles

@dataclass(eq=False)
class Operators:
    """Assembled forms for one (mesh, weight) pair."""

    mesh: Mesh
    weight: WeightField
    stiffness: SymmetricOperator
    mass: SymmetricOperator
    boundary_mass: SymmetricOperator
    weight_integral: float
    _cache: dict = field(default_factory=dict, repr=False)

    @cached_property
    def energy(self) -> SymmetricOperator:
        return SymmetricOperator(self.stiffness.matrix + self.mass.matrix, "energy")

    @cached_property
    def quadrature(self) -> BoundaryQuadrature:
        return boundary_quadrature(self.mesh)

    @cached_property
    def reduction(self) -> "BoundaryReduction":
        return BoundaryReduction(self)


def assemble_operators(mesh: Mesh, weight=None) -> Operators:
    """Assemble all forms. ``weight`` defaults to ``c = 1``."""
    if weight is None:
        weight = WeightField.constant(1.0)
    elif not isinstance(weight, WeightField):
        weight = WeightField.constant(weight)
    total = integrate_weight(mesh, weight)
    if not total > 0:
        raise AssemblyError("weight must have positive integral over the domain")
    return Operators(mesh, weight, assemble_stiffness(mesh), assemble_weighted_mass(mesh, weight),
                     assemble_boundary_mass(mesh), total)


def _check_dims(ops, *arrays):
    for a in arrays:
        if np.shape(a) != (ops.mesh.n_vertices,):
            raise AssemblyError(f"expected a nodal array of length {ops.mesh.n_vertices}, got shape {np.shape(a)}")


def c_inner_product(u, v, ops: Operators) -> float:
    """Energy pairing: stiffness plus weighted mass."""
    _check_dims(ops, u, v)
    return ops.stiffness.bilinear(u, v) + ops.mass.bilinear(u, v)


def boundary_inner_product(u, v, ops: Operators) -> float:
    _check_dims(ops, u, v)
    return ops.boundary_mass.bilinear(u, v)


def rayleigh_quotient(u, ops: Operators) -> float:
    _check_dims(ops, u)
    den = ops.boundary_mass.quadratic_form(u)
    scale = max(1.0, float(np.dot(u, u)))
    if not den > 1e-14 * scale:
        raise AssemblyError("function has zero boundary trace; Rayleigh quotient undefined")
    return c_inner_product(u, u, ops) / den


class BoundaryReduction:
    """Static condensation of the energy form onto the boundary vertices.

    Traces are ordered as ``mesh.boundary_vertices()``. The interior block
    is factorised once with a sparse LU.
    """

    def __init__(self, ops: Operators):
        mesh = ops.mesh
        self.ops = ops
        self.bnd = mesh.boundary_vertices()
        self.int = mesh.interior_vertices()
        if len(self.bnd) + len(self.int) != mesh.n_vertices:
            raise AssemblyError("boundary and interior vertex sets do not partition the mesh")
        K = ops.energy.matrix.tocsc()
        self.K_bb = K[self.bnd][:, self.bnd]
        self.K_bi = K[self.bnd][:, self.int]
        self.K_ib = K[self.int][:, self.bnd].tocsc()
        self.K_ii = K[self.int][:, self.int].tocsc()
        self.B_bb = ops.boundary_mass.matrix.tocsc()[self.bnd][:, self.bnd].toarray()
        self._lu = spla.splu(self.K_ii) if len(self.int) else None
        self._schur = None
        self._bchol = None

    @property
    def nb(self) -> int:
        return len(self.bnd)

    def solve_interior(self, rhs):
        if self._lu is None:
            return np.zeros((0,) + np.shape(rhs)[1:])
        return self._lu.solve(np.asarray(rhs, dtype=float))

    def extend(self, trace):
        """Discrete weighted-harmonic extension of a trace (or trace columns)."""
        trace = np.asarray(trace, dtype=float)
        full = np.zeros((self.ops.mesh.n_vertices,) + trace.shape[1:])
        full[self.bnd] = trace
        if len(self.int):
            full[self.int] = -self.solve_interior(self.K_ib @ trace)
        return full

    def restrict(self, u):
        return np.asarray(u)[self.bnd]

    def schur(self) -> np.ndarray:
        """Dense boundary Schur complement ``K_bb - K_bi K_ii^{-1} K_ib``."""
        if self._schur is None:
            S = self.K_bb.toarray()
            if len(self.int):
                S = S - self.K_bi @ self.solve_interior(self.K_ib.toarray())
            self._schur = 0.5 * (S + S.T)
        return self._schur

    def dtn_weak(self, trace):
        """Weak normal derivative of the harmonic extension, tested with boundary basis functions."""
        full = self.extend(trace)
        return (self.ops.energy.matrix @ full)[self.bnd]

    def inner(self, s, t) -> float:
        return float(np.dot(s, self.B_bb @ t))

    def norm(self, s) -> float:
        return float(np.sqrt(max(self.inner(s, s), 0.0)))

    def to_nodal(self, weak):
        """Convert a boundary functional to the nodal trace representing it."""
        if self._bchol is None:
            self._bchol = sla.cho_factor(self.B_bb)
        return sla.cho_solve(self._bchol, np.asarray(weak, dtype=float))

    def dual_norm(self, weak) -> float:
        """Boundary L2 norm of the trace representing a functional."""
        return float(np.sqrt(max(np.dot(weak, self.to_nodal(weak)), 0.0)))
