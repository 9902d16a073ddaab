"""Triangular meshes of planar domains with tagged boundary edges.

Generators are deterministic: the disk and annulus are built from
concentric rings whose point counts are multiples of six, so the meshes
carry an exact six-fold rotational structure (degenerate angular modes
stay degenerate to round-off).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    """Invalid mesh parameters or malformed mesh file."""


def _frozen(a, dtype):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable P1 triangulation.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary_edges : (E, 2) int array, oriented with the domain on the left
    boundary_tags : (E,) int array of region labels
    regions : dict mapping tag -> label
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    regions: dict = field(default_factory=lambda: {1: "boundary"})

    def __post_init__(self):
        object.__setattr__(self, "vertices", _frozen(self.vertices, float).reshape(-1, 2))
        object.__setattr__(self, "triangles", _frozen(self.triangles, np.int64).reshape(-1, 3))
        object.__setattr__(self, "boundary_edges", _frozen(self.boundary_edges, np.int64).reshape(-1, 2))
        object.__setattr__(self, "boundary_tags", _frozen(self.boundary_tags, np.int64).reshape(-1))
        if len(self.boundary_tags) != len(self.boundary_edges):
            raise MeshError("one tag per boundary edge is required")
        missing = set(np.unique(self.boundary_tags).tolist()) - set(self.regions)
        if missing:
            raise MeshError(f"boundary tags {sorted(missing)} missing from region map")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(np.sum(self.signed_areas()))

    def edge_lengths(self) -> np.ndarray:
        """Lengths of all unique edges."""
        e = _unique_edges(self.triangles)
        d = self.vertices[e[:, 1]] - self.vertices[e[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.boundary_edges[:, 1]] - self.vertices[self.boundary_edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    def boundary_length(self) -> float:
        return float(np.sum(self.boundary_edge_lengths()))

    def boundary_loops(self) -> list[np.ndarray]:
        """Vertex sequences of the boundary loops, in edge-list order."""
        nxt = {}
        for a, b in self.boundary_edges.tolist():
            nxt[a] = b
        seen = set()
        loops = []
        for a, _ in self.boundary_edges.tolist():
            if a in seen:
                continue
            loop = []
            v = a
            while v not in seen and v in nxt:
                seen.add(v)
                loop.append(v)
                v = nxt[v]
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    def boundary_vertices(self) -> np.ndarray:
        """Boundary vertex indices ordered loop by loop."""
        loops = self.boundary_loops()
        if not loops:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(loops)

    def interior_vertices(self) -> np.ndarray:
        mask = np.ones(self.n_vertices, dtype=bool)
        mask[self.boundary_edges.ravel()] = False
        return np.flatnonzero(mask)

    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.boundary_edges[:, 0]] + self.vertices[self.boundary_edges[:, 1]])

    def with_tags(self, tags, regions) -> "Mesh":
        return Mesh(self.vertices, self.triangles, self.boundary_edges, tags, dict(regions))


def _unique_edges(triangles):
    e = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def _check_positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and math.isfinite(value) and value > 0):
        raise MeshError(f"{name} must be a positive length, got {value!r}")


def _ring(radius, n):
    t = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([radius * np.cos(t), radius * np.sin(t)])


def _zip_rings(inner, outer):
    """Triangulate the band between two closed rings of vertex indices.

    Both rings start at angle zero and are uniformly spaced, so angular
    order is decided by exact integer comparison (keeps the rotational
    pattern identical from sector to sector).
    """
    n0, n1 = len(inner), len(outer)
    tris = []
    i = k = 0
    while i < n0 or k < n1:
        # advance the ring whose next vertex comes first; ties go inner
        if k < n1 and (i == n0 or (k + 1) * n0 < (i + 1) * n1):
            tris.append((inner[i % n0], outer[k % n1], outer[(k + 1) % n1]))
            k += 1
        else:
            tris.append((inner[i % n0], outer[k % n1], inner[(i + 1) % n0]))
            i += 1
    return tris


def _orient(vertices, triangles):
    t = np.array(triangles, dtype=np.int64)
    p = vertices[t]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    t[neg] = t[neg][:, [0, 2, 1]]
    return t


def _loop_edges(indices, reverse=False):
    idx = np.asarray(indices)
    e = np.column_stack([idx, np.roll(idx, -1)])
    if reverse:
        e = e[::-1, ::-1]
    return e


def generate_disk_mesh(radius=1.0, target_h=0.1, center=(0.0, 0.0)) -> Mesh:
    """Concentric-ring mesh of a disk; ring ``k`` carries ``6k`` vertices.

    The boundary polygon is inscribed in the circle, so the boundary
    length and enclosed area are slightly below ``2 pi R`` and ``pi R^2``.
    """
    _check_positive("radius", radius)
    _check_positive("target_h", target_h)
    if target_h >= radius:
        raise MeshError("target_h must be smaller than the radius")
    m = int(math.ceil(radius / target_h - 1e-12))
    pts = [np.zeros((1, 2))]
    rings = [np.array([0])]
    offset = 1
    for k in range(1, m + 1):
        n = 6 * k
        pts.append(_ring(radius * k / m, n))
        rings.append(np.arange(offset, offset + n))
        offset += n
    vertices = np.concatenate(pts) + np.asarray(center, dtype=float)
    tris = []
    for k in range(1, m + 1):
        if k == 1:
            out = rings[1]
            tris += [(0, out[i], out[(i + 1) % 6]) for i in range(6)]
        else:
            tris += _zip_rings(rings[k - 1], rings[k])
    triangles = _orient(vertices, tris)
    edges = _loop_edges(rings[m])
    return Mesh(vertices, triangles, edges, np.ones(len(edges), dtype=np.int64))


def generate_square_mesh(side=1.0, target_h=0.1, origin=(0.0, 0.0)) -> Mesh:
    """Structured right-triangle mesh of ``[0, side]^2`` (shifted by origin)."""
    _check_positive("side", side)
    _check_positive("target_h", target_h)
    n = max(1, int(math.ceil(side / target_h - 1e-12)))
    t = np.linspace(0.0, side, n + 1)
    t[-1] = side
    X, Y = np.meshgrid(t, t)  # row = y index
    vertices = np.column_stack([X.ravel(), Y.ravel()]) + np.asarray(origin, dtype=float)

    def vid(i, j):  # i along x, j along y
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    loop = ([vid(i, 0) for i in range(n)] + [vid(n, j) for j in range(n)]
            + [vid(i, n) for i in range(n, 0, -1)] + [vid(0, j) for j in range(n, 0, -1)])
    edges = _loop_edges(loop)
    return Mesh(vertices, np.array(tris, dtype=np.int64), edges, np.ones(len(edges), dtype=np.int64))


def generate_annulus_mesh(inner_radius=0.5, outer_radius=1.0, target_h=0.1) -> Mesh:
    """Ring mesh of an annulus. Tag 1 = outer circle, tag 2 = inner circle."""
    _check_positive("inner_radius", inner_radius)
    _check_positive("outer_radius", outer_radius)
    _check_positive("target_h", target_h)
    if inner_radius >= outer_radius:
        raise MeshError("inner_radius must be smaller than outer_radius")
    if target_h >= outer_radius - inner_radius:
        raise MeshError("target_h must be smaller than the annulus width")
    m = int(math.ceil((outer_radius - inner_radius) / target_h - 1e-12))
    pts, rings, offset = [], [], 0
    for k in range(m + 1):
        r = inner_radius + (outer_radius - inner_radius) * k / m
        n = 6 * int(math.ceil(2.0 * np.pi * r / (6.0 * target_h) - 1e-12))
        pts.append(_ring(r, n))
        rings.append(np.arange(offset, offset + n))
        offset += n
    vertices = np.concatenate(pts)
    tris = []
    for k in range(1, m + 1):
        tris += _zip_rings(rings[k - 1], rings[k])
    triangles = _orient(vertices, tris)
    outer = _loop_edges(rings[m])
    inner = _loop_edges(rings[0], reverse=True)
    edges = np.concatenate([outer, inner])
    tags = np.concatenate([np.ones(len(outer)), 2 * np.ones(len(inner))]).astype(np.int64)
    return Mesh(vertices, triangles, edges, tags, {1: "outer", 2: "inner"})


def split_upper_lower(mesh: Mesh, labels=("A", "B")) -> Mesh:
    """Retag boundary edges: tag 1 where the edge midpoint has y > 0, else 2."""
    y = mesh.edge_midpoints()[:, 1]
    tags = np.where(y > 0.0, 1, 2).astype(np.int64)
    return mesh.with_tags(tags, {1: labels[0], 2: labels[1]})


# ---------------------------------------------------------------- validation

@dataclass
class CheckResult:
    passed: bool
    detail: str = ""
    offenders: list = field(default_factory=list)


@dataclass
class MeshReport:
    checks: dict
    min_angle_deg: float
    max_aspect_ratio: float

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]


def validate_mesh(mesh: Mesh) -> MeshReport:
    """Check mesh invariants. Never raises; failures are reported."""
    V = mesh.n_vertices
    checks = {}
    tri, be = mesh.triangles, mesh.boundary_edges

    bad_tri = np.flatnonzero(((tri < 0) | (tri >= V)).any(axis=1)).tolist()
    bad_edge = np.flatnonzero(((be < 0) | (be >= V)).any(axis=1)).tolist()
    checks["indices_in_range"] = CheckResult(
        not bad_tri and not bad_edge,
        f"{len(bad_tri)} triangles, {len(bad_edge)} boundary edges out of range",
        bad_tri + bad_edge)
    if bad_tri or bad_edge:
        for name in ("positive_area", "edge_in_one_triangle", "closed_loops"):
            checks[name] = CheckResult(False, "skipped: indices out of range")
        return MeshReport(checks, float("nan"), float("nan"))

    areas = mesh.signed_areas()
    flipped = np.flatnonzero(areas <= 0).tolist()
    checks["positive_area"] = CheckResult(not flipped, f"{len(flipped)} non-positive triangles", flipped)

    count = {}
    for t in tri.tolist():
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            key = (min(a, b), max(a, b))
            count[key] = count.get(key, 0) + 1
    bad = [i for i, (a, b) in enumerate(be.tolist()) if count.get((min(a, b), max(a, b)), 0) != 1]
    checks["edge_in_one_triangle"] = CheckResult(not bad, f"{len(bad)} boundary edges not in exactly one triangle", bad)

    outdeg = np.bincount(be[:, 0], minlength=V)
    indeg = np.bincount(be[:, 1], minlength=V)
    touched = (outdeg + indeg) > 0
    broken = np.flatnonzero(touched & ((outdeg != 1) | (indeg != 1))).tolist()
    checks["closed_loops"] = CheckResult(not broken and len(be) > 0,
                                         f"{len(broken)} boundary vertices with open or branching loops", broken)

    p = mesh.vertices[tri]
    lens = np.stack([np.linalg.norm(p[:, 1] - p[:, 2], axis=1),
                     np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
                     np.linalg.norm(p[:, 0] - p[:, 1], axis=1)], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a, b, c = lens[:, 0], lens[:, 1], lens[:, 2]
        cosines = np.stack([(b * b + c * c - a * a) / (2 * b * c),
                            (a * a + c * c - b * b) / (2 * a * c),
                            (a * a + b * b - c * c) / (2 * a * b)], axis=1)
        angles = np.degrees(np.arccos(np.clip(cosines, -1.0, 1.0)))
        # longest edge over twice the inradius-normalised height, =1 for equilateral
        inradius = 2 * np.abs(areas) / lens.sum(axis=1)
        aspect = lens.max(axis=1) / (2 * np.sqrt(3.0) * inradius)
    return MeshReport(checks, float(np.nanmin(angles)), float(np.nanmax(aspect)))


# ----------------------------------------------------------------------- I/O

def write_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh format (17 significant digits, base 0)."""
    lines = ["$vertices"]
    lines += [f"{i} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(mesh.vertices.tolist())]
    lines.append("$triangles")
    lines += [f"{i} {a} {b} {c}" for i, (a, b, c) in enumerate(mesh.triangles.tolist())]
    lines.append("$boundary")
    lines += [f"{i} {a} {b} {t}" for i, ((a, b), t) in
              enumerate(zip(mesh.boundary_edges.tolist(), mesh.boundary_tags.tolist()))]
    lines.append("$regions")
    lines += [f"{t} {label}" for t, label in sorted(mesh.regions.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    sections = {}
    current = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("$"):
            current = line[1:]
            sections.setdefault(current, [])
            continue
        if current is None:
            raise MeshError(f"{path}:{lineno}: data before first section header")
        sections[current].append((lineno, line.split()))
    for name in ("vertices", "triangles", "boundary"):
        if name not in sections:
            raise MeshError(f"{path}: missing section ${name}")

    def table(name, width, conv):
        rows = sections[name]
        out = [None] * len(rows)
        for lineno, tok in rows:
            if len(tok) != width + 1:
                raise MeshError(f"{path}:{lineno}: expected {width + 1} fields in ${name}")
            idx = int(tok[0])
            if not 0 <= idx < len(rows) or out[idx] is not None:
                raise MeshError(f"{path}:{lineno}: bad or duplicate index {idx}")
            out[idx] = [conv(t) for t in tok[1:]]
        return out

    try:
        verts = table("vertices", 2, float)
        tris = table("triangles", 3, int)
        bnd = table("boundary", 3, int)
    except ValueError as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"{path}: {exc}") from exc
    regions = {}
    for lineno, tok in sections.get("regions", []):
        regions[int(tok[0])] = " ".join(tok[1:])
    bnd = np.array(bnd, dtype=np.int64).reshape(-1, 3)
    if not regions:
        regions = {int(t): str(t) for t in np.unique(bnd[:, 2])}
    return Mesh(np.array(verts, dtype=float).reshape(-1, 2), np.array(tris, dtype=np.int64).reshape(-1, 3),
                bnd[:, :2], bnd[:, 2], regions)
