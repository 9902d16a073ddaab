"""Problem-definition files (JSON) and plain-text artifact I/O.

A problem file looks like::

    {
      "mesh": {"generator": "disk", "radius": 1.0, "h": 0.05, "regions": "upper_lower"},
      "weight": {"constant": 1.0},
      "count": 8,
      "j": 1,
      "g": {"name": "ex1_sin2", "regions": [1]},
      "gamma": {"regions": {"1": "mu1"}},
      "h": {"basis": {"2": 0.1}},
      "project_h": false,
      "tolerances": {"newton": 1e-8}
    }

``mesh`` may instead be ``{"file": "path.msh"}``. Relative paths resolve
against the directory of the problem file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mesh as mesh_mod
from .assembly import WeightField
from .config import DEFAULT, Tolerances
from .resonance import CATALOG, GrowthBounds, NonlinearityDef, SplitBounds


class ConfigError(ValueError):
    """Malformed or inconsistent problem definition."""


@dataclass
class Problem:
    raw: dict
    base: Path = field(default_factory=Path.cwd)

    def get(self, key, default=None):
        return self.raw.get(key, default)

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    @property
    def tolerances(self) -> Tolerances:
        try:
            return DEFAULT.override(**self.raw.get("tolerances", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"tolerances: {exc}") from exc

    @property
    def j(self) -> int:
        j = self.raw.get("j", 1)
        if not isinstance(j, int) or j < 1:
            raise ConfigError(f"j must be a positive integer (1-based), got {j!r}")
        return j


def load_problem(path) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read problem file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return Problem(raw, path.parent)


def _number(spec, key, default=None):
    v = spec.get(key, default)
    if v is None:
        raise ConfigError(f"missing numeric field {key!r}")
    try:
        return float(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {key!r} must be numeric, got {v!r}") from exc


GENERATORS = {
    "disk": lambda s, hh: mesh_mod.generate_disk_mesh(_number(s, "radius", 1.0), hh),
    "square": lambda s, hh: mesh_mod.generate_square_mesh(_number(s, "side", 1.0), hh),
    "annulus": lambda s, hh: mesh_mod.generate_annulus_mesh(_number(s, "inner_radius", 0.5),
                                                          _number(s, "outer_radius", 1.0), hh),
}


def build_mesh(problem: Problem, h=None) -> mesh_mod.Mesh:
    """Mesh from a generator spec or file; ``h`` overrides the generator size."""
    spec = problem.get("mesh")
    if not isinstance(spec, dict):
        raise ConfigError("'mesh' must be an object with 'generator' or 'file'")
    try:
        if "file" in spec:
            m = mesh_mod.read_mesh(problem.path(spec["file"]))
        else:
            gen = spec.get("generator")
            if gen not in GENERATORS:
                raise ConfigError(f"unknown mesh generator {gen!r}; choose from {sorted(GENERATORS)}")
            m = GENERATORS[gen](spec, _number(spec, "h", 0.1) if h is None else float(h))
    except (OSError, mesh_mod.MeshError) as exc:
        raise ConfigError(f"mesh: {exc}") from exc
    regions = spec.get("regions")
    if regions == "upper_lower":
        m = mesh_mod.split_upper_lower(m)
    elif regions is not None:
        raise ConfigError(f"unknown region rule {regions!r}")
    return m


def build_weight(problem: Problem) -> WeightField:
    spec = problem.get("weight", {"constant": 1.0})
    if not isinstance(spec, dict):
        raise ConfigError("'weight' must be an object")
    if "constant" in spec:
        return WeightField.constant(_number(spec, "constant"))
    if "affine" in spec:
        c0, cx, cy = (float(v) for v in spec["affine"])
        return WeightField(lambda p: c0 + cx * p[..., 0] + cy * p[..., 1], f"{c0}+{cx}x+{cy}y")
    raise ConfigError("weight needs 'constant' or 'affine' [c0, cx, cy]")


def build_nonlinearity(problem: Problem, mu1: float) -> NonlinearityDef:
    spec = problem.get("g", {"name": "zero"})
    if isinstance(spec, str):
        spec = {"name": spec}
    name = spec.get("name")
    regions = spec.get("regions")
    if name == "ex1_sin2":
        g = CATALOG[name](_number(spec, "coefficient", mu1), regions=tuple(regions or (1,)))
    elif name == "zero":
        g = CATALOG[name]()
    elif name == "saturating":
        g = CATALOG[name](_number(spec, "amplitude", 1.0), _number(spec, "scale", 1.0), regions=regions)
    elif name in ("linear", "cubic"):
        g = CATALOG[name](_number(spec, "coefficient", 1.0), regions=regions)
    elif name == "negative_linear":
        g = CATALOG["linear"](-_number(spec, "coefficient", 1.0), regions=regions)
        g.name = "negative_linear"
    else:
        raise ConfigError(f"unknown nonlinearity {name!r}; choose from {sorted(CATALOG) + ['negative_linear']}")
    if "growth" in spec:
        gs = spec["growth"]
        g.growth = GrowthBounds(_number(gs, "sigma", 0.0), _number(gs, "K", 1.0), _number(gs, "b", 0.0))
    if "split_bounds" in spec:
        sb = spec["split_bounds"]
        g.split_bounds = SplitBounds(**{k: float(v) for k, v in sb.items()})
    return g


def _gamma_value(v, mu1, gap):
    if isinstance(v, (int, float)):
        return float(v)
    table = {"mu1": mu1, "gap": gap, "half_gap": 0.5 * gap}
    if v in table:
        return table[v]
    raise ConfigError(f"gamma value {v!r} must be a number or one of {sorted(table)}")


def gamma_values(problem: Problem, ops, mu1, gap) -> np.ndarray:
    """Raw Gamma at the boundary quadrature points (validated later)."""
    spec = problem.get("gamma", {"constant": "half_gap"})
    q = ops.quadrature
    if "constant" in spec:
        return np.full(q.weights.shape, _gamma_value(spec["constant"], mu1, gap))
    if "regions" in spec:
        vals = np.full(len(q.tags), _gamma_value(spec.get("default", 0.0), mu1, gap))
        for tag, v in spec["regions"].items():
            vals[q.tags == int(tag)] = _gamma_value(v, mu1, gap)
        return np.repeat(vals[:, None], q.weights.shape[1], axis=1)
    raise ConfigError("gamma needs 'constant' or 'regions'")


def boundary_data(problem: Problem, basis, ops) -> np.ndarray:
    """Trace of ``h``: a combination of basis functions or a nodal CSV."""
    spec = problem.get("h", {"basis": {}})
    red = ops.reduction
    if "basis" in spec:
        tr = np.zeros(red.nb)
        for idx, coef in spec["basis"].items():
            i = int(idx)
            if not 1 <= i <= basis.count:
                raise ConfigError(f"h refers to basis function {i} outside 1..{basis.count}")
            tr += float(coef) * basis.traces[:, i - 1]
        return tr
    if "csv" in spec:
        nodal = read_nodal_csv(problem.path(spec["csv"]), ops.mesh.n_vertices)
        return nodal[red.bnd]
    raise ConfigError("h needs 'basis' {index: coefficient} or 'csv'")


# ------------------------------------------------------------------- I/O

def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def read_nodal_csv(path, n_vertices, column=1) -> np.ndarray:
    """Read ``vertex,value[,...]`` rows (header optional) into a nodal array."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if rows and not rows[0][0].strip().lstrip("-").isdigit():
        rows = rows[1:]
    out = np.zeros(n_vertices)
    for r in rows:
        k = int(r[0])
        if not 0 <= k < n_vertices:
            raise ConfigError(f"{path}: vertex {k} out of range")
        out[k] = float(r[column])
    return out


def write_basis_csv(path, mesh, basis):
    header = ["vertex", "x", "y"] + [f"phi_{i + 1}" for i in range(basis.count)]
    rows = ([k, float(mesh.vertices[k, 0]), float(mesh.vertices[k, 1])] + [float(v) for v in basis.phi[k]]
            for k in range(mesh.n_vertices))
    write_csv(path, header, rows)


def read_basis_csv(path, n_vertices) -> np.ndarray:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read basis file {path}: {exc}") from exc
    if not rows or rows[0][:3] != ["vertex", "x", "y"]:
        raise ConfigError(f"{path}: expected header 'vertex,x,y,phi_1,...'")
    data = rows[1:]
    if len(data) != n_vertices:
        raise ConfigError(f"{path}: {len(data)} rows for a mesh with {n_vertices} vertices")
    X = np.zeros((n_vertices, len(rows[0]) - 3))
    try:
        for r in data:
            X[int(r[0])] = [float(v) for v in r[3:]]
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: malformed row: {exc}") from exc
    return X
