"""Steklov eigenvalues of the unit disk against the Bessel closed form.

Run ``python3 demos/disk_convergence.py``. Each halving of the mesh size
should cut the relative error by roughly four.
"""

import numpy as np

from steklov.assembly import assemble_operators
from steklov.eigen import solve_spectrum_schur
from steklov.mesh import generate_disk_mesh
from steklov.oracles import disk_spectrum

ref = np.array(disk_spectrum(1.0, 1.0, 5).eigenvalues)
print("exact:", np.array2string(ref, precision=6))
prev = None
for h in (0.2, 0.1, 0.05, 0.025):
    mu = solve_spectrum_schur(assemble_operators(generate_disk_mesh(1.0, h)), 5).mu
    err = np.abs(mu - ref) / ref
    ratio = "" if prev is None else "  ratio " + np.array2string(prev / err, precision=2)
    print(f"h={h:<6} max rel err {err.max():.3e}{ratio}")
    prev = err
