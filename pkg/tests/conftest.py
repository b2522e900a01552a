"""Shared fixtures. The expensive tuning sweep is session-scoped and only
built when a test actually asks for it."""

import time

import pytest

from dosplatoon import (
    Gains,
    PerformanceSpec,
    PlatoonParams,
    TuningConfig,
    estimate_mansd,
    tune,
)

TABLE_H = (0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1)


@pytest.fixture(scope="session")
def params():
    return PlatoonParams(h=0.7, tau_d=0.1, Ts=0.05, m=10)


@pytest.fixture(scope="session")
def perf():
    return PerformanceSpec(lambda_M=-0.367, zeta_m=0.7)


@pytest.fixture(scope="session")
def baseline_gains():
    return Gains(kp=0.2, kd=0.7)


@pytest.fixture(scope="session")
def tuned_gains():
    return Gains(kp=0.82, kd=2.6)


@pytest.fixture(scope="session")
def baseline_mansd(baseline_gains, params):
    return estimate_mansd(baseline_gains, params, TuningConfig())


@pytest.fixture(scope="session")
def tuned_mansd(tuned_gains, params):
    return estimate_mansd(tuned_gains, params, TuningConfig())


@pytest.fixture(scope="session")
def table_sweep(perf):
    """Full-resolution tuning run per time gap, with total wall time."""
    reports = {}
    t0 = time.perf_counter()
    for h in TABLE_H:
        p = PlatoonParams(h=h, tau_d=0.1, Ts=0.05, m=10)
        reports[h] = tune(p, perf)
    elapsed = time.perf_counter() - t0
    return reports, elapsed
