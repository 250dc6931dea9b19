import numpy as np
import pytest

from midair_texture.geometry import build_array


@pytest.fixture(scope="session")
def array():
    return build_array()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Print and record one PASS/FAIL line, then assert it."""
    def report(tag: str, title: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {tag} {title}: {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
