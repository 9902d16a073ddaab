"""Regenerate the frozen oracle constants consumed by the test suite.

Every number the tests compare against comes from here; nothing is typed
by hand. Run ``steklov oracle-freeze --out tests/data`` to rewrite the file.
"""

from __future__ import annotations

import numpy as np

from .assembly import assemble_operators
from .eigen import solve_spectrum_schur
from .mesh import generate_disk_mesh, split_upper_lower
from .oracles import bessel_i, bessel_i_reference, disk_spectrum, picard_reference_solve
from .resonance import ex1_sin2, linear, make_rhs
from .trace import GammaField, estimate_delta, resonance_gap

BESSEL_ORDERS = (0, 1, 2, 3, 5, 8)
BESSEL_POINTS = (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)
DISK_CASES = ((1.0, 1.0), (0.5, 1.0), (2.0, 1.0), (1.0, 0.5))
DISK_COUNT = 21


def ex1_problem(h=0.05, amplitude=0.1):
    """Unit disk, c = 1, j = 1, g = mu_1 u sin^2 u on the upper half, h = amplitude * phi_2."""
    mesh = split_upper_lower(generate_disk_mesh(1.0, h))
    ops = assemble_operators(mesh)
    basis = solve_spectrum_schur(ops, ops.reduction.nb)
    mu1 = float(basis.mu[0])
    gap = resonance_gap(basis, 1)
    gamma = GammaField.from_regions(ops, {1: mu1}, gap)
    g = ex1_sin2(mu1, regions=(1,))
    rhs = make_rhs(amplitude * basis.traces[:, 1], basis, 1, ops)
    delta = estimate_delta(basis, 1, gamma, ops, 1000, 0).delta_dense
    return {"mesh": mesh, "ops": ops, "basis": basis, "g": g, "gamma": gamma, "rhs": rhs, "delta": delta, "j": 1}


def _picard_entry(p, g):
    res = picard_reference_solve(g, p["rhs"], p["basis"], p["j"], p["ops"], p["delta"])
    red = p["ops"].reduction
    trace = res.u[red.bnd]
    return {"trace": trace.tolist(), "boundary_norm": red.norm(trace), "iterations": res.iterations,
            "residual": res.residual, "delta": p["delta"], "mu_1": float(p["basis"].mu[0])}


def freeze() -> dict:
    bessel = [{"order": k, "x": x, "series": bessel_i(k, x), "reference": bessel_i_reference(k, x)}
              for k in BESSEL_ORDERS for x in BESSEL_POINTS]
    disks = []
    for c, R in DISK_CASES:
        o = disk_spectrum(c, R, DISK_COUNT)
        disks.append({"c": c, "radius": R, "mode_values": list(o.mode_values), "eigenvalues": list(o.eigenvalues),
                      "angular_numbers": list(o.angular_numbers)})
    p = ex1_problem()
    picard = {"ex1_disk_h0.05": _picard_entry(p, p["g"]),
              "linear_eps0.05_disk_h0.05": _picard_entry(p, linear(0.05))}
    return {"bessel": bessel, "disk_spectra": disks, "picard": picard}


def disk_entry(frozen, c, R):
    for d in frozen["disk_spectra"]:
        if d["c"] == c and d["radius"] == R:
            return np.array(d["eigenvalues"])
    raise KeyError((c, R))
