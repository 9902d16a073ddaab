import json
from pathlib import Path

import numpy as np
import pytest

from steklov.assembly import assemble_operators
from steklov.eigen import solve_spectrum_schur
from steklov.mesh import generate_annulus_mesh, generate_disk_mesh, generate_square_mesh, split_upper_lower

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    with open(DATA / "oracle_freeze.json") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def disk05():
    ops = assemble_operators(split_upper_lower(generate_disk_mesh(1.0, 0.05)))
    return ops, solve_spectrum_schur(ops, ops.reduction.nb)


@pytest.fixture(scope="session")
def disk_coarse():
    ops = assemble_operators(generate_disk_mesh(1.0, 0.2))
    return ops, solve_spectrum_schur(ops, ops.reduction.nb)


@pytest.fixture(scope="session")
def small_meshes():
    return {
        "disk": generate_disk_mesh(1.0, 0.1),
        "square": generate_square_mesh(1.0, 0.08),
        "annulus": generate_annulus_mesh(0.5, 1.0, 0.08),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE = {}


def record_acceptance(number, title, passed, detail):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    print(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
