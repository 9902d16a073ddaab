"""Resonant boundary problem with a sin^2 nonlinearity on the upper half circle.

The solution is found by homotopy continuation and checked against the
damped fixed-point reference solver.
"""

from steklov.freeze import ex1_problem
from steklov.oracles import picard_reference_solve
from steklov.resonance import homotopy_solve, validate_hypotheses, verify_solution

p = ex1_problem()
ops, basis, g, rhs = p["ops"], p["basis"], p["g"], p["rhs"]
hyp = validate_hypotheses(g, p["gamma"], basis, 1, ops, h=rhs)
for name, check in hyp.checks.items():
    print(f"hypothesis {name}: {'ok' if check.passed else 'FAILED'}  {check.detail}")

trace = homotopy_solve(g, rhs, basis, 1, ops, p["delta"], p["gamma"])
print("\n  lambda     residual   |u_perp|^2  bound")
for s in trace.steps:
    print(f"  {s.lam:8.5f}  {s.boundary_residual:9.2e}  {s.perp_norm**2:10.4e}  {s.bound:.4f}")

ver = verify_solution(trace.final.u, g, rhs, ops, basis, 1)
print("\ninterior residual", f"{ver['interior_residual']:.2e}", " boundary residual", f"{ver['boundary_residual']:.2e}")
ref = picard_reference_solve(g, rhs, basis, 1, ops, p["delta"])
red = ops.reduction
print("fixed-point iterations", ref.iterations, " trace difference",
      f"{red.norm(ref.u[red.bnd] - trace.final.u[red.bnd]):.2e}")
