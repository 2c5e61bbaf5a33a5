import numpy as np
import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record(request):
    """Record one acceptance line; returns ``ok`` so tests can assert on it."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def _record(criterion: int, ok: bool, detail: str) -> bool:
        lines.append((criterion, "PASS" if ok else "FAIL", detail))
        return ok

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {criterion:2d}: {status}  {detail}")
