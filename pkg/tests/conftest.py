import pytest

from polypuzzle.bhpuzzle import BHConfig, bh_build
from polypuzzle.dyncore import PolynomialMap
from polypuzzle.puzzle import ChainCache, build_tower
from polypuzzle.tableau import tableau_from_orbit


def fig14_map() -> PolynomialMap:
    """Cubic x (x - 0.76)^2 / (1 - 0.76)^2: one bounded critical orbit."""
    c0 = 0.76
    s = (1 - c0) ** 2
    return PolynomialMap((0.0, c0**2 / s, -2 * c0 / s, 1.0 / s))


def fig15_map() -> PolynomialMap:
    """Cubic x (2x - 1)(5x - 4): the interval [0, 1/2] lies in K."""
    return PolynomialMap((0.0, 4.0, -13.0, 10.0))


def fig17_map() -> PolynomialMap:
    """z^3 + a z^2 + 1 with a = -1.10692 + 0.63601i."""
    return PolynomialMap((1.0, 0.0, complex(-1.10692, 0.63601), 1.0))


def escaping_cubic() -> PolynomialMap:
    """z^3 + 3z + 3: both critical orbits escape."""
    return PolynomialMap((3.0, 3.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def tower_i():
    return build_tower(PolynomialMap.quadratic(1j), 2)


@pytest.fixture(scope="session")
def cache_i(tower_i):
    return ChainCache(tower_i)


@pytest.fixture(scope="session")
def tab_i(tower_i, cache_i):
    return tableau_from_orbit(tower_i, 0.0, width=22, depth=20, chains=cache_i)


@pytest.fixture(scope="session")
def tower_fib():
    return build_tower(PolynomialMap.quadratic(-1.8705286), 2)


@pytest.fixture(scope="session")
def cache_fib(tower_fib):
    return ChainCache(tower_fib)


@pytest.fixture(scope="session")
def tower_m1():
    return build_tower(PolynomialMap.quadratic(-1.0), 1)


@pytest.fixture(scope="session")
def tower_16():
    return build_tower(PolynomialMap.quadratic(-1.6), 1)


@pytest.fixture(scope="session")
def cache_16(tower_16):
    return ChainCache(tower_16)


@pytest.fixture(scope="session")
def tab_16(tower_16, cache_16):
    return tableau_from_orbit(tower_16, 0.0, width=14, depth=11, chains=cache_16)


ACCEPT_BH14 = BHConfig(base_cells=300, min_piece_cells=80, max_local_cells=900)
ACCEPT_BH15 = BHConfig(base_cells=300, min_piece_cells=80, max_local_cells=900)
ACCEPT_BH17 = BHConfig(base_cells=300, min_piece_cells=80, max_local_cells=1800,
                       designated_bounded=0.0)
ACCEPT_ESC = BHConfig(base_cells=300, min_piece_cells=60, max_local_cells=900,
                      thin_deepest=True)


@pytest.fixture(scope="session")
def bh14():
    import time
    t0 = time.time()
    puzzle = bh_build(fig14_map(), ACCEPT_BH14, max_depth=6)
    puzzle.build_seconds = time.time() - t0
    return puzzle


@pytest.fixture(scope="session")
def bh15():
    import time
    t0 = time.time()
    puzzle = bh_build(fig15_map(), ACCEPT_BH15, max_depth=5)
    puzzle.build_seconds = time.time() - t0
    return puzzle


@pytest.fixture(scope="session")
def bh17():
    import time
    t0 = time.time()
    puzzle = bh_build(fig17_map(), ACCEPT_BH17, max_depth=3)
    puzzle.build_seconds = time.time() - t0
    return puzzle


@pytest.fixture(scope="session")
def bh_escaping():
    puzzle = bh_build(escaping_cubic(), ACCEPT_ESC, max_depth=6)
    return puzzle
