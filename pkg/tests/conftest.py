import pytest

from surfbath.lattice import build_lattice
from surfbath.spinmodel import build_ensemble

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


class Recorder:
    def __call__(self, number: int, title: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return bool(passed)


@pytest.fixture
def record():
    """Log one pass/fail line per acceptance criterion (printed at the end)."""
    return Recorder()


@pytest.fixture(scope="session")
def lattices():
    return {n: build_lattice((n, n)) for n in (1, 2, 3, 4)}


@pytest.fixture(scope="session")
def ensembles(lattices):
    return {n: build_ensemble(lat) for n, lat in lattices.items()}


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[k]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {k}. {title}" + (f": {detail}" if detail else ""))
