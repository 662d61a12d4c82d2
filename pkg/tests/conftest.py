import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_swap_spec(rng, d, scale=1.0):
    from bilipext import SwapSpec

    x = rng.normal(size=d) * scale
    y = x + rng.normal(size=d) * scale
    D = float(np.linalg.norm(y - x))
    eta = 0.05 + 0.45 * rng.random()
    return SwapSpec(x, y, eta * D)


def points_outside(rng, n, lo, hi, inside):
    """``n`` uniform points of the box [lo, hi] rejected when ``inside`` says so."""
    out = []
    while sum(len(o) for o in out) < n:
        P = lo + rng.random((2 * n, len(lo))) * (hi - lo)
        out.append(P[~inside(P)])
    return np.vstack(out)[:n]


MOVES = [((0,), (0.4, 1.0)), ((1,), (1.3, 1.1)), ((2,), (2.0, 0.9)), ((3,), (3.2, 1.0))]


def layered_moves(L=2.0):
    """Sources 0..3 at height 1, pushed around by up to 0.4."""
    from bilipext import LayeredPointMap

    return LayeredPointMap(2, 1, L, {1: MOVES}, ((0,), (3,)))


@pytest.fixture(scope="session")
def threaded_moves():
    from bilipext import thread

    data = layered_moves()
    F, info = thread(data, details=True)
    return data, F, info


# criterion label -> (passed, seconds, note); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: (int("".join(c for c in s if c.isdigit())), s)):
        ok, secs, note = ACCEPTANCE[label]
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} ({secs:.1f} s)"
        terminalreporter.write_line(line + (f"  {note}" if note else ""))
