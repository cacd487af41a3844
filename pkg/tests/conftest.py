import time
from contextlib import contextmanager

import pytest

_LINES = pytest.StashKey[list]()


class _Record:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def acceptance(request):
    """Context manager that times one acceptance criterion and logs a PASS/FAIL line."""
    lines = request.config.stash.setdefault(_LINES, [])

    @contextmanager
    def criterion(name, budget):
        rec = _Record()
        t0 = time.perf_counter()
        ok = False
        try:
            yield rec
            ok = True
        finally:
            took = time.perf_counter() - t0
            within = took <= budget
            status = "PASS" if ok and within else "FAIL"
            extra = "" if within else f"; over budget {budget:g} s"
            line = f"{status}  {name}  [{took:.1f} s{extra}]  {rec.detail}"
            lines.append(line)
            print(line)
        assert within, f"{name}: {took:.1f} s exceeds the {budget:g} s budget"

    return criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
