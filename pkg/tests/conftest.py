import numpy as np
import pytest

from aoimfc import build_config


class ScriptedStream:
    """Stand-in for a Generator that returns prepared exponential draws."""

    def __init__(self, draws):
        self._draws = [np.asarray(d, dtype=float) for d in draws]

    def exponential(self, scale, size):
        d = self._draws.pop(0)
        assert d.shape == (size,)
        return d


def scripted(values):
    it = iter(values)
    return lambda: next(it)


@pytest.fixture
def small_cfg():
    return build_config({"N": 20, "T": 10, "T_e": 10, "P": 20, "S": 4})


# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
