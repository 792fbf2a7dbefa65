import re

import pytest

from unload_rl.env import EnvConfig

_LINES = pytest.StashKey()


@pytest.fixture
def default_config():
    return EnvConfig()


@pytest.fixture
def desk_env():
    return EnvConfig(columns=4, rows=3, obs_resolution=32)


@pytest.fixture
def report(request):
    """``report(ok, detail)`` records the pass/fail line of a ``test_criterion_N_*`` test and asserts."""
    lines = request.config.stash.setdefault(_LINES, [])
    number = int(re.match(r"test_criterion_(\d+)", request.node.name).group(1))
    done = []

    def _report(ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append((number, line))
        done.append(ok)
        print(line)
        assert ok, line

    yield _report
    if not done:
        lines.append((number, f"criterion {number}: FAIL (raised before reporting)"))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
