import numpy as np
import pytest

from handshape import synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def disk(size, center, radius):
    rr, cc = np.mgrid[0:size, 0:size]
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2


def fork_mask(prongs_up=True):
    """Three prongs on a solid base."""
    m = np.zeros((80, 60), dtype=bool)
    m[45:75, 10:50] = True               # palm
    for c in (10, 25, 40):
        m[10:45, c:c + 8] = True         # prongs
    return m if prongs_up else m[::-1].copy()


@pytest.fixture(scope="session")
def hand_mask():
    return synthetic.render_mask(synthetic.TEMPLATES["open"], size=200, scale=1.6)


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(acceptance_log.RESULTS):
        terminalreporter.write_line(acceptance_log.RESULTS[number])
