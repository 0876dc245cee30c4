import math

import pytest

from wqedbands import ChainConfig

PI = math.pi

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    log = request.config.stash[_ACCEPTANCE]

    def record(num, title, ok, detail):
        log.append((num, title, ok, detail))
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(_ACCEPTANCE, [])
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(log):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")


@pytest.fixture
def subradiant_dimer():
    return ChainConfig.dimer(6, 0.5, PI / 2, PI)


@pytest.fixture
def zero_reflection_dimer():
    return ChainConfig.dimer(15, 1.5, 1.5 * PI, 2.5 * PI)
