import time
from contextlib import contextmanager

import numpy as np
import pytest

from casimir_metrology import builtin_gold_table
from casimir_metrology.lifshitz import LifshitzSettings, PressureInterpolant
from casimir_metrology.optics import DRUDE, PLASMA, PermittivityModel

R_SPHERE = 60.8e-6


@pytest.fixture(scope="session")
def au_table():
    return builtin_gold_table()


@pytest.fixture(scope="session")
def plasma_model(au_table):
    return PermittivityModel(PLASMA, au_table)


@pytest.fixture(scope="session")
def drude_model(au_table):
    return PermittivityModel(DRUDE, au_table)


@pytest.fixture(scope="session")
def settings():
    return LifshitzSettings()


@pytest.fixture(scope="session")
def plasma_interp(plasma_model, settings):
    return PressureInterpolant.from_model(plasma_model, settings, 200e-9, 800e-9, 31)


@pytest.fixture(scope="session")
def drude_interp(drude_model, settings):
    return PressureInterpolant.from_model(drude_model, settings, 200e-9, 800e-9, 31)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance bookkeeping ------------------------------------------------------
ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


@pytest.fixture
def criterion(request):
    """Context manager recording PASS/FAIL and runtime of one acceptance criterion."""
    results = request.config.stash[ACCEPTANCE]

    @contextmanager
    def run(number, title, budget_s):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            results[number] = ("FAIL", title, time.perf_counter() - t0, budget_s)
            raise
        elapsed = time.perf_counter() - t0
        ok = elapsed < budget_s
        results[number] = ("PASS" if ok else "FAIL", title, elapsed, budget_s)
        assert ok, f"runtime {elapsed:.2f} s exceeds the {budget_s} s budget"

    return run


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(results):
        status, title, elapsed, budget = results[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}  [{elapsed:.2f} s of {budget} s]")
