"""Solver tolerances shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    orth: float = 1e-10          # orthonormality / identity checks
    res: float = 1e-8            # eigenpair residual
    cluster: float = 1e-6        # relative to mu_1: eigenvalues closer than this form a cluster
    xcheck: float = 1e-8         # relative agreement between eigensolvers
    max_iter: int = 500          # inductive eigensolver iterations per locking round
    newton: float = 1e-8         # boundary residual of each continuation step
    newton_step: float = 1e-10   # Newton update size required together with the residual test
    newton_max_iter: int = 25
    pde: float = 1e-8            # interior residual of the extended solution
    dlambda0: float = 0.1
    dlambda_min: float = 1e-4
    fd_step: float = 1e-6        # finite-difference derivative step, scaled by (1 + |u|)

    def cluster_abs(self, mu1: float) -> float:
        return self.cluster * abs(mu1)

    def override(self, **kwargs) -> "Tolerances":
        names = {f.name for f in fields(self)}
        clean = {}
        for key, value in kwargs.items():
            key = key.replace("-", "_")
            if key not in names:
                raise KeyError(f"unknown tolerance {key!r}; known: {sorted(names)}")
            clean[key] = type(getattr(self, key))(value)
        return replace(self, **clean)


DEFAULT = Tolerances()
