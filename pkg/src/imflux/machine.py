"""
Reference induction machine in the stationary two-axis frame.

The model keeps all leakage on the rotor side::

    psi_s = l_m (i_s + i_r)
    psi_r = psi_s + l_l i_r
    d psi_s / dt = u_s - r_s i_s
    d psi_r / dt = j z_p omega psi_r - r_r i_r

Rotor speed is an exogenous input; there is no mechanical equation.
Estimators only ever see :class:`Measurement` values produced by
:func:`corrupt`, which carry no flux and no rotor current.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from imflux.numerics import IntegrationMethod, NonFiniteError, SpaceVector, integrate_step

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class MachineParams:
    r_s: float
    r_r: float
    l_m: float
    l_l: float
    z_p: int = 2

    def __post_init__(self):
        for name in ("r_s", "r_r", "l_m", "l_l"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.z_p) != self.z_p or self.z_p < 1:
            raise ValueError(f"z_p must be a positive integer, got {self.z_p!r}")


# small squirrel-cage test machine
DEFAULT_MACHINE = MachineParams(r_s=0.435, r_r=0.816, l_m=0.0693, l_l=0.004, z_p=2)


@dataclass(frozen=True)
class MachineState:
    psi_s: complex = 0j
    psi_r: complex = 0j


# --- input profiles ---------------------------------------------------------


@dataclass(frozen=True)
class ZeroVoltage:
    def __call__(self, t: float) -> complex:
        return 0j


@dataclass(frozen=True)
class StepVoltage:
    """x-axis step of ``amplitude`` volts switched on at ``start``."""

    amplitude: float
    start: float = 0.0

    def __call__(self, t: float) -> complex:
        return complex(self.amplitude) if t >= self.start else 0j


@dataclass(frozen=True)
class SinusoidVoltage:
    """Balanced rotating voltage ``A exp(j(2 pi f t + phase))``.

    ``ramp`` > 0 fades the amplitude in with a raised cosine over that many
    seconds. A hard switch-on leaves a DC component in the stator current,
    which an open-loop integrator with a resistance error turns into a
    permanent flux offset; the fade keeps that offset negligible.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0
    ramp: float = 0.0

    def __post_init__(self):
        if self.frequency < 0:
            raise ValueError(f"frequency must be >= 0, got {self.frequency!r}")
        if self.ramp < 0:
            raise ValueError(f"ramp must be >= 0, got {self.ramp!r}")

    @property
    def omega_e(self) -> float:
        return TWO_PI * self.frequency

    def envelope(self, t: float) -> float:
        if t >= self.ramp:
            return 1.0
        if t <= 0.0:
            return 0.0
        return 0.5 - 0.5 * math.cos(math.pi * t / self.ramp)

    def __call__(self, t: float) -> complex:
        theta = TWO_PI * self.frequency * t + self.phase
        a = self.amplitude * self.envelope(t)
        return complex(a * math.cos(theta), a * math.sin(theta))


@dataclass(frozen=True)
class ConstantSpeed:
    omega: float = 0.0

    def __call__(self, t: float) -> float:
        return self.omega


@dataclass(frozen=True)
class RampSpeed:
    omega0: float
    slope: float

    def __call__(self, t: float) -> float:
        return self.omega0 + self.slope * t


Voltage = Union[ZeroVoltage, StepVoltage, SinusoidVoltage]
Speed = Union[ConstantSpeed, RampSpeed]


@dataclass(frozen=True)
class InputProfile:
    voltage: Voltage = field(default_factory=ZeroVoltage)
    speed: Speed = field(default_factory=ConstantSpeed)

    def u_s(self, t: float) -> complex:
        return self.voltage(t)

    def omega(self, t: float) -> float:
        return self.speed(t)


def synchronous_speed(frequency: float, z_p: int) -> float:
    """Mechanical speed (rad/s) at which the rotor turns with the field."""
    return TWO_PI * frequency / z_p


# --- machine equations ------------------------------------------------------


def currents_from_fluxes(state: MachineState, p: MachineParams) -> tuple[complex, complex]:
    i_r = (state.psi_r - state.psi_s) / p.l_l
    i_s = state.psi_s / p.l_m - i_r
    return SpaceVector.of(i_s), SpaceVector.of(i_r)


def fluxes_from_currents(i_s: complex, i_r: complex, p: MachineParams) -> MachineState:
    psi_s = p.l_m * (i_s + i_r)
    return MachineState(psi_s, psi_s + p.l_l * i_r)


def machine_derivatives(state: MachineState, u_s: complex, omega: float, p: MachineParams) -> MachineState:
    i_s, i_r = currents_from_fluxes(state, p)
    dpsi_s = u_s - p.r_s * i_s
    dpsi_r = 1j * (p.z_p * omega) * state.psi_r - p.r_r * i_r
    return MachineState(SpaceVector.of(dpsi_s), SpaceVector.of(dpsi_r))


def steady_state(p: MachineParams, profile: InputProfile) -> MachineState:
    """Periodic steady state at t = 0 for a constant speed.

    Solves the 2x2 complex system for the flux phasors; a step that is already
    on at t = 0 is treated as DC. Ramped amplitudes have no steady state.
    """
    if not isinstance(profile.speed, ConstantSpeed):
        raise ValueError("steady state needs a constant speed profile")
    v = profile.voltage
    if isinstance(v, ZeroVoltage):
        return MachineState()
    if isinstance(v, StepVoltage):
        if v.start > 0:
            raise ValueError("steady state needs the step to be on at t = 0")
        s, u = 0.0, complex(v.amplitude)
    elif isinstance(v, SinusoidVoltage):
        if v.ramp > 0:
            raise ValueError("steady state is undefined while the amplitude is ramping")
        s, u = 1j * v.omega_e, v(0.0)
    else:
        raise TypeError(f"unsupported voltage profile {v!r}")
    w = p.z_p * profile.speed.omega
    a11 = -p.r_s * (1.0 / p.l_m + 1.0 / p.l_l)
    a12 = p.r_s / p.l_l
    a21 = p.r_r / p.l_l
    a22 = 1j * w - p.r_r / p.l_l
    # (s I - A) X = [u, 0]
    m11, m12, m21, m22 = s - a11, -a12, -a21, s - a22
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise ValueError("no unique steady state for this operating point")
    return MachineState(SpaceVector.of(u * m22 / det), SpaceVector.of(-u * m21 / det))


# --- simulation -------------------------------------------------------------


class SimulationError(RuntimeError):
    """The plant integration produced a non-finite state."""

    def __init__(self, step: int, dt: float, method: IntegrationMethod, component: int):
        self.step = step
        self.dt = dt
        self.method = method
        super().__init__(
            f"machine state became non-finite at step {step} "
            f"(state component {component}, dt={dt:g} s, method={method.value}); "
            "reduce dt or switch to rk4"
        )


@dataclass(frozen=True)
class TraceRecord:
    t: float
    u_s: complex
    i_s: complex
    i_r: complex
    omega: float
    psi_s: complex
    psi_r: complex


@dataclass
class Trace:
    """True (uncorrupted) machine signals on a uniform time grid."""

    t: np.ndarray
    u_s: np.ndarray
    i_s: np.ndarray
    i_r: np.ndarray
    omega: np.ndarray
    psi_s: np.ndarray
    psi_r: np.ndarray
    dt: float
    params: MachineParams

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, k: int) -> TraceRecord:
        return TraceRecord(
            float(self.t[k]),
            complex(self.u_s[k]),
            complex(self.i_s[k]),
            complex(self.i_r[k]),
            float(self.omega[k]),
            complex(self.psi_s[k]),
            complex(self.psi_r[k]),
        )

    def __iter__(self):
        return (self[k] for k in range(len(self)))


def step_count(t_end: float, dt: float) -> int:
    # tolerate t_end/dt landing a hair below an integer
    return int(math.floor(t_end / dt + 1e-9))


def simulate(
    p: MachineParams,
    profile: InputProfile,
    dt: float,
    t_end: float,
    method: IntegrationMethod = IntegrationMethod.RK4,
    initial: Optional[MachineState] = None,
) -> Trace:
    """Integrate the machine from ``initial`` and record every step."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if not t_end >= dt:
        raise ValueError(f"t_end must be >= dt, got t_end={t_end!r}, dt={dt!r}")
    method = IntegrationMethod.parse(method)
    initial = initial or MachineState()
    n = step_count(t_end, dt) + 1

    u_fn, w_fn = profile.voltage, profile.speed
    r_s, r_r, l_m, l_l, z_p = p.r_s, p.r_r, p.l_m, p.l_l, p.z_p
    inv_lm, inv_ll = 1.0 / l_m, 1.0 / l_l

    def deriv(t, x):
        psi_s, psi_r = x
        i_r = (psi_r - psi_s) * inv_ll
        i_s = psi_s * inv_lm - i_r
        return (u_fn(t) - r_s * i_s, 1j * (z_p * w_fn(t)) * psi_r - r_r * i_r)

    ts = np.arange(n) * dt
    psi_s = np.empty(n, dtype=complex)
    psi_r = np.empty(n, dtype=complex)
    x = (complex(initial.psi_s), complex(initial.psi_r))
    psi_s[0], psi_r[0] = x
    for k in range(1, n):
        try:
            x = integrate_step(x, deriv, ts[k - 1], dt, method)
        except NonFiniteError as exc:
            raise SimulationError(k, dt, method, exc.index) from exc
        psi_s[k], psi_r[k] = x

    i_r = (psi_r - psi_s) * inv_ll
    i_s = psi_s * inv_lm - i_r
    u_s = np.array([u_fn(t) for t in ts], dtype=complex)
    omega = np.array([w_fn(t) for t in ts], dtype=float)
    return Trace(ts, u_s, i_s, i_r, omega, psi_s, psi_r, dt, p)


# --- measurement boundary ---------------------------------------------------


@dataclass(frozen=True)
class MeasurementFault:
    current_offset: complex = 0j
    current_noise_std: float = 0.0
    voltage_offset: complex = 0j
    voltage_noise_std: float = 0.0

    def __post_init__(self):
        if self.current_noise_std < 0 or self.voltage_noise_std < 0:
            raise ValueError("noise standard deviations must be >= 0")

    @property
    def is_clean(self) -> bool:
        return (
            self.current_offset == 0
            and self.voltage_offset == 0
            and self.current_noise_std == 0
            and self.voltage_noise_std == 0
        )


@dataclass(frozen=True, slots=True)
class Measurement:
    """What a sensorless estimator may observe: stator voltage, stator current, speed."""

    t: float
    u_s: complex
    i_s: complex
    omega: float


def corrupt(record: TraceRecord, fault: MeasurementFault, rng: np.random.Generator) -> Measurement:
    """Apply offsets and seeded Gaussian noise; speed passes through exactly.

    Noise is drawn as (u_x, u_y) then (i_x, i_y), and only for channels with a
    nonzero standard deviation.
    """
    u = record.u_s + fault.voltage_offset
    i = record.i_s + fault.current_offset
    if fault.voltage_noise_std > 0:
        nx, ny = rng.normal(0.0, fault.voltage_noise_std, 2)
        u += complex(nx, ny)
    if fault.current_noise_std > 0:
        nx, ny = rng.normal(0.0, fault.current_noise_std, 2)
        i += complex(nx, ny)
    return Measurement(record.t, complex(u), complex(i), record.omega)
