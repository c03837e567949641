import numpy as np
import pytest

from mslab.rng import stream
from mslab.spaces import Banach, Euclidean, Heisenberg, HyperbolicPlane, Sector, make_gauge


@pytest.fixture
def rng():
    return stream(12345, 0)


@pytest.fixture(scope="session")
def heisenberg():
    space = Heisenberg()
    space.calibrate_unit_ball(400_000, seed=3)
    return space


def analytic_spaces():
    return [
        Euclidean(1),
        Euclidean(2),
        Euclidean(3),
        Banach(make_gauge(2, {"type": "lq", "q": "inf"})),
        Banach(make_gauge(2, {"type": "lq", "q": 1})),
        Banach(make_gauge(3, {"type": "lq", "q": 3})),
        HyperbolicPlane(),
        Sector(np.pi / 2),
    ]


def random_points(space, n, rng, scale=1.0):
    """Points spread over a ball of radius ``scale`` around the basepoint."""
    if isinstance(space, Sector):
        pts, _ = space.sample_ball(space.basepoint, scale, n, rng)
        return pts
    pts, _ = space.sample_ball(space.basepoint, scale, n, rng)
    return pts


# -- acceptance reporting -----------------------------------------------------------------

ACCEPTANCE = []


def record(criterion, part, passed, detail):
    """Log one acceptance check; the terminal summary prints a line per criterion."""
    ACCEPTANCE.append((int(criterion), part, bool(passed), detail))
    print(f"criterion {criterion} [{part}]: {'PASS' if passed else 'FAIL'} - {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted({c for c, *_ in ACCEPTANCE}):
        parts = [a for a in ACCEPTANCE if a[0] == crit]
        ok = all(a[2] for a in parts)
        tr.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'} ({sum(a[2] for a in parts)}/{len(parts)} parts)")
        for _, part, passed, detail in parts:
            tr.write_line(f"    {'PASS' if passed else 'FAIL'}  {part}: {detail}")
