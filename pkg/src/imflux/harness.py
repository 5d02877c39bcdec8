"""
Scenario runner, error metrics and parameter/frequency sweeps.

A run simulates the true machine, corrupts each sample into a
:class:`~imflux.machine.Measurement`, feeds it to one estimator and scores
``|psi_s_hat - psi_s|`` over the window ``t >= settle``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from imflux.estimators import EstimatorKind, EstimatorParams, FluxEstimate, make_estimator
from imflux.machine import (
    DEFAULT_MACHINE,
    ConstantSpeed,
    InputProfile,
    MachineParams,
    MachineState,
    Measurement,
    MeasurementFault,
    SinusoidVoltage,
    StepVoltage,
    Trace,
    corrupt,
    simulate,
    steady_state,
    synchronous_speed,
)
from imflux.numerics import IntegrationMethod, NonFiniteError

DIVERGENCE_FACTOR = 10.0
FINAL_FRACTION = 0.1
START_MODES = ("zero", "steady")
MISMATCH_NAMES = ("r_se", "r_re", "l_me", "l_le")


@dataclass(frozen=True)
class Mismatch:
    """Estimator parameter = machine parameter x factor."""

    r_se: float = 1.0
    r_re: float = 1.0
    l_me: float = 1.0
    l_le: float = 1.0

    def __post_init__(self):
        for name in MISMATCH_NAMES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"mismatch factor {name} must be positive, got {value!r}")

    @classmethod
    def uniform(cls, factor: float) -> "Mismatch":
        return cls(factor, factor, factor, factor)


@dataclass(frozen=True)
class Scenario:
    """One estimator run against the reference machine.

    ``start="steady"`` begins the machine in its periodic steady state (only
    for constant speed and a non-ramped input); estimators always start at
    zero, so open-loop integrators then carry the initial flux as an error.
    """

    name: str
    estimator: EstimatorKind
    machine: MachineParams = DEFAULT_MACHINE
    mismatch: Mismatch = field(default_factory=Mismatch)
    profile: InputProfile = field(default_factory=InputProfile)
    fault: MeasurementFault = field(default_factory=MeasurementFault)
    dt: float = 1e-4
    t_end: float = 5.0
    settle: float = 1.0
    method: IntegrationMethod = IntegrationMethod.RK4
    estimator_method: IntegrationMethod = IntegrationMethod.RK4
    start: str = "zero"
    crossover: Optional[float] = None
    clamp: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "estimator", EstimatorKind(self.estimator))
        object.__setattr__(self, "method", IntegrationMethod.parse(self.method))
        object.__setattr__(self, "estimator_method", IntegrationMethod.parse(self.estimator_method))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least one step")
        if not 0 <= self.settle < self.t_end:
            raise ValueError(f"settle must lie in [0, t_end), got {self.settle!r}")
        if self.start not in START_MODES:
            raise ValueError(f"start must be one of {START_MODES}, got {self.start!r}")

    def estimator_params(self) -> EstimatorParams:
        m = self.mismatch
        return EstimatorParams.from_machine(self.machine, m.r_se, m.r_re, m.l_me, m.l_le)

    def initial_state(self) -> MachineState:
        if self.start == "steady":
            return steady_state(self.machine, self.profile)
        return MachineState()

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ErrorMetrics:
    """Statistics of ``|psi_s_hat - psi_s|`` over the scoring window.

    ``rel_rms`` divides ``rms`` by the RMS of ``|psi_s|`` over the same window;
    ``ac_amplitude`` is the RMS of the error vector about its window mean, i.e.
    the amplitude of a rotating error with any constant offset removed.
    """

    rms: float
    max_abs: float
    final_offset: float
    drift_slope: float
    diverged: bool
    rel_rms: float
    ac_amplitude: float

    FIELDS = ("rms", "rel_rms", "max_abs", "final_offset", "drift_slope", "ac_amplitude", "diverged")

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


@dataclass
class ScenarioResult:
    scenario: Scenario
    truth: Trace
    psi_s_hat: np.ndarray
    psi_r_hat: Optional[np.ndarray]
    i_s_hat: Optional[np.ndarray]
    metrics: ErrorMetrics
    seed: int = 0

    @property
    def error(self) -> np.ndarray:
        return self.psi_s_hat - self.truth.psi_s

    def estimate(self, k: int) -> FluxEstimate:
        return FluxEstimate(
            complex(self.psi_s_hat[k]),
            None if self.psi_r_hat is None else complex(self.psi_r_hat[k]),
            None if self.i_s_hat is None else complex(self.i_s_hat[k]),
        )

    @property
    def estimates(self) -> list[FluxEstimate]:
        return [self.estimate(k) for k in range(len(self.psi_s_hat))]


def least_squares_slope(t: np.ndarray, y: np.ndarray) -> float:
    tc = t - t.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(tc, y - y.mean()) / denom)


def compute_metrics(truth: Trace, psi_s_hat: np.ndarray, settle: float) -> ErrorMetrics:
    psi_s_hat = np.asarray(psi_s_hat, dtype=complex)
    if psi_s_hat.shape != truth.psi_s.shape:
        raise ValueError(f"estimate length {psi_s_hat.shape} does not match truth {truth.psi_s.shape}")
    err_vec = psi_s_hat - truth.psi_s
    err = np.abs(err_vec)
    # half a step of slack so settle = k*dt includes sample k
    window = truth.t >= settle - 0.5 * truth.dt
    if not window.any():
        raise ValueError(f"empty metrics window: settle={settle} is past the end of the trace")

    peak = float(np.max(np.abs(truth.psi_s)))
    with np.errstate(invalid="ignore"):
        diverged = bool(np.any(~np.isfinite(err)) or np.any(err > DIVERGENCE_FACTOR * peak))

    ew, tw, vw = err[window], truth.t[window], err_vec[window]
    rms = float(np.sqrt(np.mean(ew**2)))
    ref = float(np.sqrt(np.mean(np.abs(truth.psi_s[window]) ** 2)))
    if ref > 0:
        rel_rms = rms / ref
    else:
        rel_rms = 0.0 if rms == 0 else math.inf
    n_final = max(1, int(round(FINAL_FRACTION * len(ew))))
    return ErrorMetrics(
        rms=rms,
        max_abs=float(np.max(ew)),
        final_offset=float(np.mean(ew[-n_final:])),
        drift_slope=least_squares_slope(tw, ew),
        diverged=diverged,
        rel_rms=rel_rms,
        ac_amplitude=float(np.sqrt(np.mean(np.abs(vw - vw.mean()) ** 2))),
    )


def _check_sensorless(m: Measurement) -> None:
    if not isinstance(m, Measurement):
        raise TypeError(f"estimators only accept Measurement, got {type(m).__name__}")


# fixed at import: a Measurement must never grow a flux or rotor-current field
assert set(Measurement.__slots__) == {"t", "u_s", "i_s", "omega"}


@functools.lru_cache(maxsize=8)
def _truth(
    p: MachineParams, profile: InputProfile, dt: float, t_end: float, method: IntegrationMethod, initial: MachineState
) -> Trace:
    # scenarios that differ only in the estimator share one plant run
    trace = simulate(p, profile, dt, t_end, method, initial)
    for arr in (trace.t, trace.u_s, trace.i_s, trace.i_r, trace.omega, trace.psi_s, trace.psi_r):
        arr.flags.writeable = False
    return trace


def run_scenario(s: Scenario, seed: int = 0) -> ScenarioResult:
    truth = _truth(s.machine, s.profile, s.dt, s.t_end, s.method, s.initial_state())
    est = make_estimator(
        s.estimator, s.estimator_params(), s.dt, s.estimator_method, crossover=s.crossover, clamp=s.clamp
    )
    rng = np.random.default_rng(seed)
    n = len(truth)
    psi_s_hat = np.full(n, np.nan, dtype=complex)
    psi_r_hat = np.full(n, np.nan, dtype=complex)
    i_s_hat = np.full(n, np.nan, dtype=complex)
    has_r = has_i = False
    for k in range(n):
        m = corrupt(truth[k], s.fault, rng)
        _check_sensorless(m)
        try:
            e = est.prime(m) if k == 0 else est.step(m)
        except NonFiniteError:
            # estimator blow-up is an outcome, not a failure; the NaNs mark it diverged
            break
        psi_s_hat[k] = e.psi_s_hat
        if e.psi_r_hat is not None:
            psi_r_hat[k] = e.psi_r_hat
            has_r = True
        if e.i_s_hat is not None:
            i_s_hat[k] = e.i_s_hat
            has_i = True
    metrics = compute_metrics(truth, psi_s_hat, s.settle)
    return ScenarioResult(
        s, truth, psi_s_hat, psi_r_hat if has_r else None, i_s_hat if has_i else None, metrics, seed
    )


# --- canned scenarios -------------------------------------------------------


def flux_amplitude_voltage(psi: float, frequency: float, p: MachineParams) -> float:
    """Voltage amplitude that gives stator flux amplitude ``psi`` at zero rotor current."""
    return psi * abs(complex(p.r_s / p.l_m, 2.0 * math.pi * frequency))


def sinusoid_profile(
    frequency: float,
    p: MachineParams = DEFAULT_MACHINE,
    psi: float = 1.0,
    ramp: float = 0.5,
    slip: float = 0.0,
) -> InputProfile:
    """Rotating voltage sized for flux ``psi``, rotor at (1 - slip) x synchronous speed."""
    return InputProfile(
        SinusoidVoltage(flux_amplitude_voltage(psi, frequency, p), frequency, 0.0, ramp),
        ConstantSpeed((1.0 - slip) * synchronous_speed(frequency, p.z_p)),
    )


def canned_scenarios(machine: MachineParams = DEFAULT_MACHINE) -> dict[str, Scenario]:
    vm = EstimatorKind.VOLTAGE_MODEL
    five = sinusoid_profile(5.0, machine)
    five_steady = sinusoid_profile(5.0, machine, ramp=0.0)
    r_5pct = Mismatch(r_se=1.05)
    return {
        "fig2": Scenario(
            "fig2",
            vm,
            machine,
            r_5pct,
            InputProfile(StepVoltage(6.0, 0.0), ConstantSpeed(0.0)),
            t_end=20.0,
        ),
        "fig3": Scenario("fig3", vm, machine, r_5pct, five),
        "fig5": Scenario(
            "fig5", EstimatorKind.CURRENT_MODEL_SIMPLE, machine, Mismatch(l_me=1.05), five_steady, start="steady"
        ),
        "fig8": Scenario(
            "fig8", EstimatorKind.STATOR_CURRENT_ESTIMATION, machine, r_5pct, five_steady, start="steady"
        ),
        "blend5": Scenario("blend5", EstimatorKind.BLENDED, machine, Mismatch.uniform(1.05), five),
        "blend50": Scenario(
            "blend50", EstimatorKind.BLENDED, machine, Mismatch.uniform(1.05), sinusoid_profile(50.0, machine)
        ),
    }


# --- sweeps -----------------------------------------------------------------

SWEEP_AXES = ("freq", "offset") + MISMATCH_NAMES


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: float
    metrics: Optional[ErrorMetrics]
    error: Optional[str] = None


def with_frequency(s: Scenario, frequency: float) -> Scenario:
    """Move a sinusoidal scenario to ``frequency`` at constant flux and slip.

    The voltage amplitude is rescaled so the zero-rotor-current flux (and so
    the magnetizing current) keeps its amplitude; a constant rotor speed is
    scaled with the frequency so the slip is unchanged.
    """
    v = s.profile.voltage
    if not isinstance(v, SinusoidVoltage):
        raise ValueError("frequency sweeps need a sinusoidal voltage profile")
    if frequency < 0:
        raise ValueError(f"frequency must be >= 0, got {frequency!r}")
    p = s.machine
    old = abs(complex(p.r_s / p.l_m, v.omega_e))
    new = abs(complex(p.r_s / p.l_m, 2.0 * math.pi * frequency))
    voltage = dataclasses.replace(v, amplitude=v.amplitude * new / old, frequency=frequency)
    speed = s.profile.speed
    if isinstance(speed, ConstantSpeed) and v.frequency > 0:
        speed = ConstantSpeed(speed.omega * frequency / v.frequency)
    return s.replace(profile=InputProfile(voltage, speed))


def apply_axis(s: Scenario, axis: str, value: float) -> Scenario:
    if axis == "freq":
        return with_frequency(s, value)
    if axis == "offset":
        return s.replace(fault=dataclasses.replace(s.fault, current_offset=complex(value, 0.0)))
    if axis in MISMATCH_NAMES:
        return s.replace(mismatch=dataclasses.replace(s.mismatch, **{axis: value}))
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")


def _run_cell(args) -> SweepRow:
    base, axis, value, seed = args
    try:
        result = run_scenario(apply_axis(base, axis, value), seed)
    except Exception as exc:  # recorded per cell, remaining cells still run
        return SweepRow(axis, value, None, f"{type(exc).__name__}: {exc}")
    return SweepRow(axis, value, result.metrics)


def sweep(
    base: Scenario, axis: str, values: Sequence[float], seed: int = 0, workers: int = 1
) -> list[SweepRow]:
    """One run per axis value with everything else held fixed.

    Rows come back in the order of ``values`` whatever ``workers`` is.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(SWEEP_AXES)}")
    values = [float(v) for v in values]
    if not values:
        raise ValueError("sweep needs at least one axis value")
    cells = [(base, axis, v, seed) for v in values]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]
