import numpy as np
import pytest

from fsiprecond.femcore import MaterialParams, apply_dirichlet, assemble_blocks, build_space
from fsiprecond.meshkit import build_two_region_mesh

# flag benchmark data with structure density 10 * rho_f
BENCH = dict(rho_f=1e3, mu_f=1.0, mu_s=1e6, lambda_s=2e6)


def bench_params(k=1e-2, ratio=10.0):
    return MaterialParams(rho_s=ratio * BENCH["rho_f"], k=k, **BENCH)


def reduced(space, params, values=None):
    blocks = assemble_blocks(space, params)
    return apply_dirichlet(blocks, np.zeros(space.n_velocity), space.dirichlet_dofs, values)


@pytest.fixture(scope="session")
def cavity0():
    return build_two_region_mesh("cavity_halves", 0)


@pytest.fixture(scope="session")
def cavity1():
    return build_two_region_mesh("cavity_halves", 1)


@pytest.fixture(scope="session")
def space0(cavity0):
    return build_space(cavity0)


@pytest.fixture(scope="session")
def fluid_space():
    return build_space(build_two_region_mesh("fluid_square", 0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
