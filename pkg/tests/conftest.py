import numpy as np
import pytest

from viscobeam.beam import BeamConfig


@pytest.fixture
def short_cfg():
    """Clamped beam over one second with a coarse step."""
    return BeamConfig(T=1.0, dt=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(n: int, ok: bool, detail: str) -> bool:
        request.config.acceptance_lines.append((n, f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
