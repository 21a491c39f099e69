import pytest

from homodyne_ml import _fallback
from homodyne_ml.channel_model import ChannelConfig, Gains, ProbeState
from homodyne_ml.homodyne import sample_dataset

try:
    from homodyne_ml import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

BACKENDS = [pytest.param(_fallback, id="numpy")]
if _kernels is not None:
    BACKENDS.append(pytest.param(_kernels, id="cython"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def table_row1():
    """Table 1 first row settings: G=(3, 1), alpha0=4, eta=0.6, t=1."""
    return ProbeState(4.0), ChannelConfig(Gains(3.0, 1.0), 1.0, 0.6)


@pytest.fixture
def small_dataset(table_row1):
    probe, config = table_row1
    return sample_dataset(probe, config, 1000, seed=3)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip())
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
