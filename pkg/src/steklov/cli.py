"""Command-line driver: ``steklov {spectrum,resonance,verify,oracle-freeze}``.

Exit codes: 0 success, 2 configuration or I/O error, 3 hypothesis or
invariant violation, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import problem as pb
from .assembly import AssemblyError, assemble_operators
from .config import DEFAULT, Tolerances
from .eigen import (ConvergenceError, EigenError, basis_from_vectors, check_first_eigenfunction,
                    solve_spectrum_inductive, solve_spectrum_schur, verify_basis)
from .oracles import OracleError, disk_spectrum, picard_reference_solve
from .resonance import (ContinuationError, ResonanceError, homotopy_solve, make_rhs, project_rhs,
                        validate_hypotheses, verify_solution)
from .trace import GammaField, TraceError, diagnostics_report, estimate_delta, resonance_gap

EXIT_OK, EXIT_CONFIG, EXIT_HYPOTHESIS, EXIT_SOLVER = 0, 2, 3, 4

HYPOTHESIS_NAMES = {
    "01": "sign condition g(x,u) u >= 0",
    "02": "growth bound |g| <= (Gamma + sigma)|u| + b",
    "03": "slope bound 0 <= Gamma <= mu_(j+1) - mu_j, strict on a set of positive length",
    "04": "orthogonality <h, phi_j> = 0",
    "gap": "positive gap mu_(j+1) - mu_j",
}


class HypothesisFailure(RuntimeError):
    pass


class SolverFailure(RuntimeError):
    pass


# ----------------------------------------------------------------- helpers

def _solve(ops, count, problem, tol, seed):
    solver = problem.get("solver", "schur")
    if solver == "schur":
        return solve_spectrum_schur(ops, count, tol)
    if solver == "inductive":
        return solve_spectrum_inductive(ops, count, tol, seed=seed)
    raise pb.ConfigError(f"unknown solver {solver!r}; choose 'schur' or 'inductive'")


def _setup(problem, tol, h=None):
    mesh = pb.build_mesh(problem, h)
    try:
        ops = assemble_operators(mesh, pb.build_weight(problem))
    except AssemblyError as exc:
        raise pb.ConfigError(f"assembly: {exc}") from exc
    return mesh, ops


def _count(problem, ops, default):
    count = problem.get("count", default)
    if count == "all":
        return ops.reduction.nb
    if not isinstance(count, int) or count < 0:
        raise pb.ConfigError(f"count must be a nonnegative integer or 'all', got {count!r}")
    return min(count, ops.reduction.nb)


def _oracle(problem):
    spec = problem.get("mesh", {})
    w = problem.get("weight", {"constant": 1.0})
    if spec.get("generator") == "disk" and "constant" in w and float(w["constant"]) > 0:
        return float(w["constant"]), float(spec.get("radius", 1.0))
    return None


def _spectrum_rows(basis):
    return [[i + 1, float(basis.mu[i]), float(basis.residuals[i]), int(basis.cluster_ids[i]) + 1]
            for i in range(basis.count)]


def _refinement_level(args):
    raw, base, h, count, tol, seed = args
    problem = pb.Problem(raw, base)
    mesh, ops = _setup(problem, tol, h)
    t = time.perf_counter()
    basis = _solve(ops, min(count, ops.reduction.nb), problem, tol, seed)
    return h, mesh.n_vertices, basis.mu.tolist(), time.perf_counter() - t


# ----------------------------------------------------------------- commands

def cmd_spectrum(problem, out: Path, tol: Tolerances, seed: int, jobs: int, log) -> int:
    mesh, ops = _setup(problem, tol)
    count = _count(problem, ops, 8)
    basis = _solve(ops, count, problem, tol, seed)
    pb.write_csv(out / "spectrum.csv", ["index", "mu", "residual", "cluster_id"], _spectrum_rows(basis))
    pb.write_basis_csv(out / "basis.csv", mesh, basis)
    report = {"structure": verify_basis(basis, ops, samples=problem.get("samples", 100), seed=seed).as_dict(),
              "solver": basis.solver, "count": basis.count, "n_vertices": mesh.n_vertices,
              "n_boundary": ops.reduction.nb, "clusters": [[i + 1 for i in c] for c in basis.clusters]}
    if basis.count >= 2:
        sr = check_first_eigenfunction(basis)
        report["first_eigenfunction"] = {"gap": sr.gap, "simple": sr.simple, "phi_min": sr.phi_min,
                                         "phi_max": sr.phi_max, "one_signed": sr.one_signed,
                                         "consistent": sr.consistent}
    oc = _oracle(problem)
    if oc is not None and basis.count:
        ref = np.array(disk_spectrum(oc[0], oc[1], basis.count).eigenvalues)
        report["oracle"] = {"c": oc[0], "radius": oc[1], "mu": ref.tolist(),
                            "relative_error": (np.abs(basis.mu - ref) / ref).tolist()}
    pb.write_json(out / "structure_report.json", report)
    levels = problem.get("refinement")
    if levels:
        _convergence(problem, out, tol, seed, jobs, [float(h) for h in levels], count, oc)
    log(f"spectrum: {basis.count} eigenvalues, mu_1 = {basis.mu[0]:.10g}" if basis.count else "spectrum: empty")
    return EXIT_OK


def _convergence(problem, out, tol, seed, jobs, levels, count, oc):
    work = [(problem.raw, problem.base, h, count, tol, seed) for h in levels]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_refinement_level, work))
    else:
        results = [_refinement_level(w) for w in work]
    m = min(len(r[2]) for r in results)
    ref = np.array(disk_spectrum(oc[0], oc[1], m).eigenvalues) if oc else None
    rows = []
    prev = None
    for h, nv, mu, _ in results:
        mu = np.array(mu[:m])
        for k in range(m):
            if ref is None:
                rows.append([h, nv, k + 1, float(mu[k]), "", "", "", ""])
                continue
            err = abs(mu[k] - ref[k]) / ref[k]
            ratio = prev[k] / err if prev is not None and err > 0 else float("nan")
            rows.append([h, nv, k + 1, float(mu[k]), float(ref[k]), float(err), float(err / h**2), float(ratio)])
        prev = None if ref is None else np.abs(mu - ref) / ref
    pb.write_csv(out / "convergence.csv",
                 ["h", "n_vertices", "index", "mu", "oracle", "relative_error", "error_over_h2", "error_ratio"], rows)


def _resonance_setup(problem, tol, seed):
    mesh, ops = _setup(problem, tol)
    j = problem.j
    basis = _solve(ops, _count(problem, ops, "all"), problem, tol, seed)
    if j >= basis.count:
        raise pb.ConfigError(f"basis of size {basis.count} does not reach past j = {j}")
    mu1 = float(basis.mu[0])
    try:
        gap = resonance_gap(basis, j)
    except TraceError:
        gap = float("nan")
    return mesh, ops, basis, j, mu1, gap


def cmd_resonance(problem, out: Path, tol: Tolerances, seed: int, jobs: int, log) -> int:
    mesh, ops, basis, j, mu1, gap = _resonance_setup(problem, tol, seed)
    g = pb.build_nonlinearity(problem, mu1)
    gam = pb.gamma_values(problem, ops, mu1, gap)
    h_raw = pb.boundary_data(problem, basis, ops)
    rhs = project_rhs(h_raw, basis, j, ops) if problem.get("project_h", False) else make_rhs(h_raw, basis, j, ops)
    report = validate_hypotheses(g, gam, basis, j, ops, h=rhs, U=float(problem.get("U", 1e3)), tol=tol)
    hyp = report.as_dict()
    hyp.update({"g": g.name, "j": j, "mu_j": float(basis.mu[j - 1]), "gap": gap,
                "h_projected": bool(problem.get("project_h", False)), "h_removed": rhs.removed})
    if not report.ok:
        pb.write_json(out / "hypotheses.json", hyp)
        names = ", ".join(f"{k} ({HYPOTHESIS_NAMES[k]})" for k in report.failed())
        raise HypothesisFailure(f"hypothesis violated: {names}")
    gamma = GammaField(ops, gam, gap)
    diag = diagnostics_report(basis, j, gamma, ops, samples=int(problem.get("samples", 1000)), seed=seed)
    hyp["diagnostics"] = diag
    pb.write_json(out / "hypotheses.json", hyp)
    delta = diag["delta_dense"]
    try:
        trace = homotopy_solve(g, rhs, basis, j, ops, delta, gamma, tol)
    except ContinuationError as exc:
        if exc.trace is not None:
            _write_trace(out, exc.trace)
        raise SolverFailure(str(exc)) from exc
    _write_trace(out, trace)
    u = trace.final.u
    pb.write_csv(out / "solution.csv", ["vertex", "x", "y", "u"],
                 ([k, float(mesh.vertices[k, 0]), float(mesh.vertices[k, 1]), float(u[k])]
                  for k in range(mesh.n_vertices)))
    ver = verify_solution(u, g, rhs, ops, basis, j, tol)
    ver.update({"steps": len(trace.steps), "rejected_steps": trace.rejected, "alpha": trace.alpha,
                "beta": trace.beta, "delta": trace.delta, "bound_violations": trace.bound_violations(),
                "linear_bound_violations": trace.linear_bound_violations(),
                "perp_norm": trace.final.perp_norm, "zero_norm": trace.final.zero_norm})
    if problem.get("picard", True):
        try:
            pic = picard_reference_solve(g, rhs, basis, j, ops, delta, tol=tol.newton)
        except OracleError as exc:
            ver["picard"] = {"converged": False, "detail": str(exc)}
        else:
            red = ops.reduction
            diff = red.norm(pic.u[red.bnd] - u[red.bnd])
            ver["picard"] = {"converged": True, "iterations": pic.iterations, "residual": pic.residual,
                             "difference": diff, "agrees": diff <= 1e-6}
    pb.write_json(out / "verification.json", ver)
    log(f"resonance: lambda = 1 reached in {len(trace.steps) - 1} steps, "
        f"boundary residual {ver['boundary_residual']:.3e}")
    if not (ver["boundary_ok"] and ver["interior_ok"]):
        raise SolverFailure("final solution fails verification")
    return EXIT_OK


def _write_trace(out, trace):
    rows = list(trace.rows())
    keys = list(rows[0]) if rows else ["lambda"]
    pb.write_csv(out / "homotopy_trace.csv", keys, ([r[k] for k in keys] for r in rows))


def cmd_verify(problem, out: Path, tol: Tolerances, seed: int, jobs: int, log) -> int:
    mesh, ops = _setup(problem, tol)
    j = problem.j
    if "basis_file" in problem.raw:
        X = pb.read_basis_csv(problem.path(problem.get("basis_file")), mesh.n_vertices)
        try:
            basis = basis_from_vectors(ops, X, tol)
        except EigenError as exc:
            raise pb.ConfigError(str(exc)) from exc
    else:
        basis = _solve(ops, _count(problem, ops, 16), problem, tol, seed)
    structure = verify_basis(basis, ops, samples=int(problem.get("samples", 100)), seed=seed)
    checks = {k: v.as_dict() for k, v in structure.checks.items()}
    measured = {"mu": basis.mu.tolist(), "gaps": basis.gaps.tolist()}
    if basis.count >= 2:
        sr = check_first_eigenfunction(basis)
        checks["first_eigenfunction_consistent"] = {"passed": sr.consistent, "detail":
                                                    f"simple={sr.simple}, one_signed={sr.one_signed}"}
    try:
        gap = resonance_gap(basis, j)
        gamma = GammaField(ops, pb.gamma_values(problem, ops, float(basis.mu[0]), gap), gap)
        diag = diagnostics_report(basis, j, gamma, ops, samples=int(problem.get("delta_samples", 1000)), seed=seed)
        est = estimate_delta(basis, j, gamma, ops, int(problem.get("delta_samples", 1000)), seed)
        measured.update(diag)
        checks["delta_positive"] = {"passed": diag["delta_dense"] > 0, "detail": f"{diag['delta_dense']:.6g}"}
        checks["delta_sampled_above_dense"] = {"passed": est.delta_hat >= est.delta_dense - 1e-9,
                                               "detail": f"{est.delta_hat:.6g} >= {est.delta_dense:.6g}"}
        checks["eta_positive"] = {"passed": diag["eta_hat"] > 0, "detail": f"{diag['eta_hat']:.6g}"}
    except TraceError as exc:
        checks["coercivity"] = {"passed": False, "detail": str(exc)}
    ok = all(c["passed"] for c in checks.values())
    pb.write_json(out / "invariants.json", {"ok": ok, "checks": checks, "measured": measured,
                                             "failed": [k for k, c in checks.items() if not c["passed"]]})
    if not ok:
        raise HypothesisFailure("invariant checks failed: " + ", ".join(k for k, c in checks.items() if not c["passed"]))
    log(f"verify: {len(checks)} checks passed")
    return EXIT_OK


def cmd_oracle_freeze(problem, out: Path, tol: Tolerances, seed: int, jobs: int, log) -> int:
    from .freeze import freeze
    path = out / "oracle_freeze.json"
    pb.write_json(path, freeze())
    log(f"oracle-freeze: wrote {path}")
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "resonance": cmd_resonance, "verify": cmd_verify,
            "oracle-freeze": cmd_oracle_freeze}


# ----------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="steklov",
        description="Weighted Steklov spectra and resonant nonlinear boundary problems on planar meshes.",
        epilog="Exit codes: 0 success, 2 configuration/IO error, 3 hypothesis or invariant violation, "
               "4 solver non-convergence.")
    p.add_argument("command", choices=sorted(COMMANDS), help="what to run")
    p.add_argument("--config", help="problem definition (JSON); optional for oracle-freeze")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=0, help="seed for random sampling (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for refinement sweeps")
    for f in fields(Tolerances):
        p.add_argument(f"--tol-{f.name.replace('_', '-')}", dest=f"tol_{f.name}", type=float, default=None,
                       metavar="VALUE", help=f"override {f.name} (default {getattr(DEFAULT, f.name):g})")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    def log(msg):
        print(msg, file=sys.stderr)

    try:
        if args.seed < 0 or args.seed >= 2**64:
            raise pb.ConfigError("--seed must be an unsigned 64-bit integer")
        if args.jobs < 1:
            raise pb.ConfigError("--jobs must be at least 1")
        if args.config is None:
            if args.command != "oracle-freeze":
                raise pb.ConfigError(f"{args.command} requires --config")
            problem = pb.Problem({})
        else:
            problem = pb.load_problem(args.config)
        tol = problem.tolerances
        over = {f.name: getattr(args, f"tol_{f.name}") for f in fields(Tolerances)
                if getattr(args, f"tol_{f.name}") is not None}
        if over:
            tol = tol.override(**over)
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise pb.ConfigError(f"cannot create output directory {out}: {exc}") from exc
        return COMMANDS[args.command](problem, out, tol, int(args.seed), args.jobs, log)
    except pb.ConfigError as exc:
        log(f"error: {exc}")
        return EXIT_CONFIG
    except HypothesisFailure as exc:
        log(f"error: {exc}")
        return EXIT_HYPOTHESIS
    except (SolverFailure, ConvergenceError, EigenError, OracleError, ResonanceError) as exc:
        log(f"error: {exc}")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
