import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_row_sparse(rng: np.random.Generator, n_rows: int, n_cols: int,
                      density: float = 0.7) -> np.ndarray:
    """Complex matrix with at most one nonzero per row."""
    h = np.zeros((n_rows, n_cols), dtype=complex)
    for i in range(n_rows):
        if rng.random() < density:
            k = rng.integers(n_cols)
            mag = rng.uniform(0.1, 3.0)
            h[i, k] = mag * np.exp(1j * rng.uniform(0, 2 * np.pi))
    return h


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, title: str, ok: bool, detail: str = "") -> str:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
