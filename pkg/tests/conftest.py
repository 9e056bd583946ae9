import pytest

from mmladder import ModelParams, build_matrix, value_ladder

BASE = dict(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=600.0, Q=30)


@pytest.fixture(scope="session")
def base_params():
    return ModelParams(**BASE)


@pytest.fixture(scope="session")
def small():
    return ModelParams(sigma=0.3, A=0.9, k=0.3, gamma=0.01, T=60.0, Q=4)


@pytest.fixture(scope="session")
def base_ladder(base_params):
    return value_ladder(build_matrix(base_params))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
