import numpy as np
import pytest

from steklov.assembly import assemble_operators, rayleigh_quotient
from steklov.config import DEFAULT
from steklov.eigen import (ConvergenceError, EigenError, basis_from_vectors, check_first_eigenfunction,
                           solve_spectrum_inductive, solve_spectrum_schur, verify_basis)
from steklov.freeze import disk_entry
from steklov.mesh import generate_disk_mesh, generate_square_mesh


@pytest.fixture(scope="module")
def disk_ops():
    return assemble_operators(generate_disk_mesh(1.0, 0.05))


def test_schur_disk_first_five(disk_ops, frozen):
    ref = disk_entry(frozen, 1.0, 1.0)[:5]
    b = solve_spectrum_schur(disk_ops, 5)
    assert np.all(np.abs(b.mu - ref) / ref <= 0.01)
    assert b.residuals.max() <= DEFAULT.res


def test_mu1_below_constant_quotient(small_meshes):
    for m in small_meshes.values():
        ops = assemble_operators(m)
        mu1 = solve_spectrum_schur(ops, 1).mu[0]
        assert mu1 <= rayleigh_quotient(np.ones(m.n_vertices), ops) + 1e-14
        assert mu1 <= ops.weight_integral / m.boundary_length() + 1e-14


@pytest.mark.parametrize("solver", [solve_spectrum_schur, solve_spectrum_inductive])
def test_count_edge_cases(disk_ops, solver):
    assert solver(disk_ops, 0).count == 0
    with pytest.raises(EigenError):
        solver(disk_ops, disk_ops.reduction.nb + 1)


def test_inductive_matches_schur(disk_ops):
    a = solve_spectrum_inductive(disk_ops, 3)
    b = solve_spectrum_schur(disk_ops, 3)
    assert np.all(np.abs(a.mu - b.mu) / b.mu <= 1e-8)
    B = disk_ops.boundary_mass.matrix
    assert abs(a.phi[:, 1] @ (B @ a.phi[:, 0])) <= DEFAULT.orth


def test_inductive_infimum_property(disk_ops, rng):
    mu1 = solve_spectrum_inductive(disk_ops, 1).mu[0]
    n = disk_ops.mesh.n_vertices
    trial = min(rayleigh_quotient(rng.standard_normal(n), disk_ops) for _ in range(10_000))
    assert mu1 <= trial


def test_inductive_nonconvergence_carries_iterate(disk_ops):
    with pytest.raises(ConvergenceError) as ei:
        solve_spectrum_inductive(disk_ops, 2, DEFAULT.override(max_iter=1))
    assert ei.value.iterate.shape == (disk_ops.mesh.n_vertices,)
    assert ei.value.residual > 0


def test_first_eigenfunction_disk(disk05):
    ops, b = disk05
    rep = check_first_eigenfunction(b)
    assert rep.simple and rep.one_signed and rep.consistent
    assert rep.gap == pytest.approx(b.mu[1] - b.mu[0])
    phi2 = b.phi[:, 1]
    assert phi2.min() < 0 < phi2.max()


def test_first_eigenfunction_needs_two_pairs(disk_ops):
    with pytest.raises(EigenError):
        check_first_eigenfunction(solve_spectrum_schur(disk_ops, 1))


def test_verify_examples(disk05):
    ops, b = disk05
    B, K = ops.boundary_mass.matrix, ops.energy.matrix
    u = b.phi[:, 0] + 2 * b.phi[:, 1]
    assert u @ (B @ u) == pytest.approx(5.0, abs=DEFAULT.orth)
    assert u @ (K @ u) == pytest.approx(b.mu[0] + 4 * b.mu[1], abs=DEFAULT.orth)
    z = np.zeros(ops.mesh.n_vertices)
    assert z @ (B @ z) == 0.0 and (b.phi.T @ (B @ z) == 0).all()
    five = solve_spectrum_schur(ops, 5)
    rep = verify_basis(five, ops)
    assert rep.ok, rep.failed()


def test_verify_full_disk_basis(disk05):
    ops, b = disk05
    small = solve_spectrum_schur(ops, 12)
    rep = verify_basis(small, ops, samples=20)
    assert rep.ok, {k: v.max_error for k, v in rep.checks.items()}


def test_disk_clusters_and_canonical_rotation(disk05):
    ops, b = disk05
    assert abs(b.mu[1] - b.mu[2]) <= 10 * DEFAULT.xcheck
    assert abs(b.mu[3] - b.mu[4]) <= 10 * DEFAULT.xcheck
    assert b.clusters[:3] == [[0], [1, 2], [3, 4]]
    assert b.cluster_of(2) == [1, 2]
    # second member of each degenerate pair vanishes at the first boundary node
    assert abs(b.phi[b.boundary[0], 2]) <= 1e-12
    assert abs(b.phi[b.boundary[0], 4]) <= 1e-12


def test_sign_convention(disk05):
    ops, b = disk05
    big = np.argmax(np.abs(b.phi), axis=0)
    assert np.all(b.phi[big, np.arange(b.count)] > 0)


def test_eigenvalues_unbounded_proxy():
    for h in (0.2, 0.1):
        ops = assemble_operators(generate_disk_mesh(1.0, h))
        count = min(ops.reduction.nb, 20)
        b = solve_spectrum_schur(ops, count)
        assert b.mu[-1] >= b.mu[0] * count / 2


def test_error_decreases_under_refinement(frozen):
    hs = (0.2, 0.1, 0.05)
    ref = disk_entry(frozen, 1.0, 1.0)[:5]
    errs = np.array([np.abs(solve_spectrum_schur(assemble_operators(generate_disk_mesh(1.0, h)), 5).mu - ref) / ref
                     for h in hs])
    # non-increasing error toward the oracle, O(h^2)
    assert np.all(np.diff(errs, axis=0) <= 0)
    C = errs[-1] / hs[-1] ** 2
    assert np.all(errs[-1] <= 1.1 * C * hs[-1] ** 2)
    assert np.all(errs[-2] / errs[-1] >= 3.0)


def test_basis_from_vectors_detects_corruption(disk05):
    ops, b = disk05
    X = b.phi[:, :6].copy()
    good = basis_from_vectors(ops, X)
    assert np.allclose(good.mu, b.mu[:6], rtol=1e-12)
    assert verify_basis(good, ops, samples=10).ok
    X[:, 2] *= 1.01
    bad = verify_basis(basis_from_vectors(ops, X), ops, samples=10)
    assert "boundary_orthonormal" in bad.failed()


def test_square_and_annulus_simple_mu1(small_meshes):
    for name in ("square", "annulus"):
        ops = assemble_operators(small_meshes[name])
        rep = check_first_eigenfunction(solve_spectrum_schur(ops, 3))
        assert rep.consistent
        assert rep.simple and rep.one_signed
