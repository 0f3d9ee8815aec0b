import warnings

import numpy as np
import pytest

from lorenzmix.invariant_measure import stationary_density, ulam_matrix
from lorenzmix.lorenz_map import LorenzLikeMap, sanity_map
from lorenzmix.roof import default_roof

warnings.filterwarnings("ignore", message=".*TBB threading layer.*")


@pytest.fixture(scope="session")
def fmap():
    return LorenzLikeMap()


@pytest.fixture(scope="session")
def smap():
    return sanity_map()


@pytest.fixture(scope="session")
def roof():
    return default_roof()


@pytest.fixture(scope="session")
def density(fmap):
    P, cells = ulam_matrix(fmap, 4096)
    return stationary_density(P, cells.src_edges)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(n: int, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        print(line)
        request.config.stash[_VERDICTS].append((n, line))
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
