from fractions import Fraction

import numpy as np
import pytest

from regwprg.robp import RegularROBP, gen_regular


@pytest.fixture
def prog8():
    return gen_regular(8, 3, 2)


def with_accept(b, accept, start=None):
    """Same layers, different start/accept states."""
    return RegularROBP(b.n, b.w, b.layers, b.start if start is None else start, frozenset(accept))


def random_rational_vector(rng, w, scale=16):
    return np.array([Fraction(int(x), scale) for x in rng.integers(-scale, scale + 1, size=w)], dtype=object)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
