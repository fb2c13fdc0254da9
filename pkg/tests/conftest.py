import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from protoisi.channel import parse_channel
from protoisi.pexit import ExitSurface, standard_surface

settings.register_profile("protoisi", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("protoisi")

# Standard surface parameters used for every threshold table in the suite.
SURFACE_KW = dict(seed=0, n_symbols=200_000, lo=-4.0, hi=6.0, step=0.25)


def _cached_surface(config, channel: str) -> ExitSurface:
    """Measure the standard surface once and keep it in the pytest cache;
    the file name hashes the measurement parameters."""
    key = hashlib.sha256(json.dumps([channel, SURFACE_KW], sort_keys=True).encode()).hexdigest()[:16]
    root = Path(config.cache.mkdir("protoisi-surfaces"))
    path = root / f"{channel}-{key}.csv"
    if path.exists():
        return ExitSurface.load(path)
    s = standard_surface(parse_channel(channel), **SURFACE_KW)
    s.save(path)
    return ExitSurface.load(path)


@pytest.fixture(scope="session")
def dicode_surface(request):
    return _cached_surface(request.config, "dicode")


@pytest.fixture(scope="session")
def epr4_surface(request):
    return _cached_surface(request.config, "epr4")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# One summary line per acceptance criterion, printed after the run.
_ACCEPTANCE_LINES = []


@pytest.fixture
def record():
    def _record(criterion, ok, detail):
        line = f"{criterion} {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
