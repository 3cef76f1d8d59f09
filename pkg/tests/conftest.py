import numpy as np
import pytest

from cosaliency import imagio, superpixel, synthetic


@pytest.fixture(scope="session")
def small_group():
    return synthetic.make_group(1, n_images=3, size=64)


@pytest.fixture(scope="session")
def small_segs(small_group):
    return [superpixel.slic(imagio.rgb_to_lab(im), 60) for im in small_group.rgbs]


@pytest.fixture(scope="session")
def seg(small_segs):
    return small_segs[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.VERDICTS):
        ok, detail = mod.VERDICTS[n]
        terminalreporter.write_line(f"CRITERION {n} {'PASS' if ok else 'FAIL'}: {detail}")
