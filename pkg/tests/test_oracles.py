import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steklov import freeze as fz
from steklov.oracles import (OracleError, bessel_i, bessel_i_prime, bessel_i_reference, dense_reference_spectrum,
                             disk_spectrum, picard_reference_solve)
from steklov.assembly import assemble_operators
from steklov.eigen import solve_spectrum_inductive, solve_spectrum_schur
from steklov.mesh import generate_disk_mesh, generate_square_mesh
from steklov.resonance import linear, make_rhs, zero_nonlinearity
from steklov.trace import apply_dtn


def test_bessel_trivial_values():
    assert bessel_i(0, 0.0) == 1.0
    assert bessel_i(1, 0.0) == 0.0


def test_bessel_against_reference(frozen):
    for p in frozen["bessel"]:
        ref = p["reference"]
        val = bessel_i(p["order"], p["x"])
        if ref == 0.0:
            assert val == 0.0
        else:
            assert abs(val - ref) <= 1e-13 * abs(ref)
        assert val == p["series"]


def test_bessel_i0_at_one(frozen):
    probe = next(p for p in frozen["bessel"] if p["order"] == 0 and p["x"] == 1.0)
    assert bessel_i(0, 1.0) == pytest.approx(probe["reference"], rel=1e-15)
    assert probe["reference"] == pytest.approx(1.2660658777520, abs=1e-12)


@pytest.mark.parametrize("args", [(0, 31.0), (0, -1.0), (-1, 1.0), (1.5, 1.0)])
def test_bessel_rejects(args):
    with pytest.raises(OracleError):
        bessel_i(*args)


@pytest.mark.parametrize("k", range(1, 9))
def test_bessel_recurrence(k):
    for x in np.linspace(0.5, 10.0, 20):
        lhs = bessel_i(k - 1, x) - bessel_i(k + 1, x)
        rhs = 2 * k / x * bessel_i(k, x)
        assert abs(lhs - rhs) <= 1e-11 * abs(rhs)


def test_disk_spectrum_values(frozen):
    o = disk_spectrum(1.0, 1.0, 5)
    assert o.eigenvalues[0] == pytest.approx(bessel_i(1, 1.0) / bessel_i(0, 1.0), rel=1e-15)
    assert o.eigenvalues[1] == o.eigenvalues[2] and o.eigenvalues[3] == o.eigenvalues[4]
    assert list(o.eigenvalues) == fz.disk_entry(frozen, 1.0, 1.0)[:5].tolist()
    assert o.multiplicities[:3] == (1, 2, 2)


def test_disk_spectrum_monotone():
    o = disk_spectrum(1.0, 1.0, 23)
    assert np.all(np.diff(o.mode_values[:12]) > 0)


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_disk_spectrum_scaling(c):
    R = 0.8
    a = np.array(disk_spectrum(c, R, 9).eigenvalues)
    b = np.array(disk_spectrum(1.0, math.sqrt(c) * R, 9).eigenvalues)
    assert np.allclose(a, math.sqrt(c) * b, rtol=1e-13)


def test_disk_spectrum_rejects():
    with pytest.raises(OracleError):
        disk_spectrum(0.0, 1.0, 3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 6), st.floats(0.01, 20.0))
def test_bessel_prime_finite_difference(k, x):
    h = 1e-5 * max(1.0, x)
    fd = (bessel_i(k, x + h) - bessel_i(k, max(x - h, 0.0))) / (x + h - max(x - h, 0.0))
    assert bessel_i_prime(k, x) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_dense_agrees_with_schur_500_dofs():
    m = generate_square_mesh(1.0, 1.0 / 21)
    assert 400 <= m.n_vertices <= 600
    ops = assemble_operators(m)
    d = dense_reference_spectrum(ops, 8)
    s = solve_spectrum_schur(ops, 8).mu
    i = solve_spectrum_inductive(ops, 8).mu
    assert np.all(np.abs(d - s) / s <= 1e-10)
    assert np.all(np.abs(d - i) / i <= 1e-8)


def test_dense_rejects_large_count():
    ops = assemble_operators(generate_disk_mesh(1.0, 0.3))
    with pytest.raises(OracleError):
        dense_reference_spectrum(ops, ops.reduction.nb + 1)


def test_dense_size_guard():
    ops = assemble_operators(generate_disk_mesh(1.0, 0.02))
    with pytest.raises(OracleError):
        dense_reference_spectrum(ops, 3)


def test_picard_zero_data(disk_coarse):
    ops, b = disk_coarse
    res = picard_reference_solve(zero_nonlinearity(), np.zeros(ops.mesh.n_vertices), b, 1, ops, 0.3)
    assert np.all(res.u == 0.0)


def test_picard_linear_matches_direct_solve(disk05):
    ops, b = disk05
    red = ops.reduction
    eps = 0.05
    h = 0.1 * b.traces[:, 1]
    res = picard_reference_solve(linear(eps), make_rhs(h, b, 1, ops), b, 1, ops, 0.5, tol=1e-12)
    # direct: (S - (mu_1 + eps) B) u = B h
    u = np.linalg.solve(red.schur() - (b.mu[0] + eps) * red.B_bb, red.B_bb @ h)
    assert red.norm(res.u[red.bnd] - u) <= 1e-9
    # the extension is harmonic
    assert np.abs((ops.energy.matrix @ res.u)[red.int]).max() <= 1e-10


def test_picard_size_guard():
    ops = assemble_operators(generate_disk_mesh(1.0, 0.02))
    b = solve_spectrum_schur(ops, 3)
    with pytest.raises(OracleError):
        picard_reference_solve(zero_nonlinearity(), np.zeros(ops.mesh.n_vertices), b, 1, ops, 0.3)


def test_freeze_regenerates_identically(frozen):
    fresh = fz.freeze()
    assert fresh["bessel"] == frozen["bessel"]
    assert fresh["disk_spectra"] == frozen["disk_spectra"]
    for key, entry in frozen["picard"].items():
        assert np.allclose(fresh["picard"][key]["trace"], entry["trace"], rtol=0, atol=1e-12)
