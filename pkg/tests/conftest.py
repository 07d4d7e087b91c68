import os
import sys

import mpmath as mp
import pytest


@pytest.fixture(autouse=True, scope="session")
def _isolated_cache(tmp_path_factory):
    # keep the moment cache out of the home directory during tests
    d = tmp_path_factory.mktemp("moment-cache")
    old = os.environ.get("BERGPOLY_CACHE_DIR")
    os.environ["BERGPOLY_CACHE_DIR"] = str(d)
    yield d
    if old is None:
        os.environ.pop("BERGPOLY_CACHE_DIR", None)
    else:
        os.environ["BERGPOLY_CACHE_DIR"] = old


@pytest.fixture(autouse=True)
def _default_dps():
    # nothing may depend on (or leak) the global mpmath precision
    mp.mp.dps = 15
    yield
    assert mp.mp.dps == 15


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    RESULTS = getattr(mod, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k].line())
    passed = sum(r.passed for r in RESULTS.values())
    terminalreporter.write_line(f"{passed}/{len(RESULTS)} criteria passed")
