import numpy as np
import pytest

from imflux.machine import Measurement, MeasurementFault, corrupt


def drive(est, trace, fault=None, seed=0):
    """Feed a trace through an estimator; returns (psi_s_hat, psi_r_hat) arrays."""
    fault = fault or MeasurementFault()
    rng = np.random.default_rng(seed)
    n = len(trace)
    psi_s = np.empty(n, dtype=complex)
    psi_r = np.full(n, np.nan, dtype=complex)
    for k in range(n):
        m = corrupt(trace[k], fault, rng)
        e = est.prime(m) if k == 0 else est.step(m)
        psi_s[k] = e.psi_s_hat
        if e.psi_r_hat is not None:
            psi_r[k] = e.psi_r_hat
    return psi_s, psi_r


def constant_measurements(n, dt, u_s=0j, i_s=0j, omega=0.0):
    return [Measurement(k * dt, u_s, i_s, omega) for k in range(n)]


def relative_rms(estimate, truth, mask):
    err = np.abs(estimate[mask] - truth[mask])
    return float(np.sqrt(np.mean(err**2)) / np.sqrt(np.mean(np.abs(truth[mask]) ** 2)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str, float]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail, seconds = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key} ({seconds:.1f} s): {detail}")
