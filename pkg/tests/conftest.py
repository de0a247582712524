import warnings

import numpy as np
import pytest

from mepstab.errors import AssumptionASuspect
from mepstab.landscape import DoubleWell, MuellerBrown
from mepstab.mep import find_minimizer, solve_string

MB_SEEDS = ([-0.558, 1.442], [0.623, 0.028])


def dw_exact(alphas):
    return np.column_stack([2.0 * alphas - 1.0, np.zeros_like(alphas)])


@pytest.fixture(scope="session")
def dw10():
    return DoubleWell(10.0)


@pytest.fixture(scope="session")
def dw10_sol(dw10):
    return solve_string(dw10, [-1.0, 0.0], [1.0, 0.0], n=201, tol=1e-10)


@pytest.fixture(scope="session")
def dw10_sol_coarse(dw10):
    return solve_string(dw10, [-1.0, 0.0], [1.0, 0.0], n=101, tol=1e-10)


@pytest.fixture(scope="session")
def mb():
    return MuellerBrown()


@pytest.fixture(scope="session")
def mb_minima(mb):
    return tuple(find_minimizer(mb, s) for s in MB_SEEDS)


@pytest.fixture(scope="session")
def mb_sol(mb, mb_minima):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionASuspect)
        return solve_string(mb, *mb_minima, n=201, tol=1e-10)


def dw_solution(kappa, n=201):
    return solve_string(DoubleWell(kappa), [-1.0, 0.0], [1.0, 0.0], n=n, tol=1e-10)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def record(number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} [{number:>2}] {title}: {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
