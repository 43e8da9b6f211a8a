import time

import numpy as np
import pytest

from plasmafb.config import ProblemConfig
from plasmafb.grid import build_grid
from plasmafb.solver import continuation_solve

# wall-clock seconds of the session solves, read by the acceptance suite
TIMINGS = {}
# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def _solve(name, **kw):
    cfg = ProblemConfig(**kw)
    grid = build_grid(cfg.shape, cfg.extent, cfg.n)
    t0 = time.perf_counter()
    u, trace = continuation_solve(cfg, grid)
    TIMINGS[name] = time.perf_counter() - t0
    return grid, u, trace, cfg


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def disk129():
    return build_grid("disk", 1.0, 129)


@pytest.fixture(scope="session")
def square65():
    return build_grid("square", 1.0, 65)


@pytest.fixture(scope="session")
def solved129():
    return _solve("solved129", n=129)


@pytest.fixture(scope="session")
def solved257():
    return _solve("solved257", n=257)


def random_field(grid, rng, amp=1.0):
    u = amp * rng.standard_normal((grid.n, grid.n))
    u[~grid.interior] = 0.0
    return u


@pytest.fixture(scope="session")
def solved257_fine():
    """n = 257 with the 2h epsilon floor, max(2h, 0.003)."""
    return _solve("solved257_fine", n=257, eps_min_cells=2.0)
