"""
Stator-flux estimators driven by sampled stator measurements.

Every estimator consumes :class:`~imflux.machine.Measurement` values one
sample at a time and returns a :class:`FluxEstimate` for that sample's
instant. Internal integrals run over the interval between the previous and
the current sample; with RK4 the measurement is interpolated linearly across
the interval, with Euler it is held at the previous sample.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, Optional

from imflux.machine import MachineParams, Measurement
from imflux.numerics import (
    FirstOrderFilterState,
    IntegrationMethod,
    SpaceVector,
    highpass_step,
    integrate_step,
    lowpass_step,
)


class EstimatorKind(str, enum.Enum):
    VOLTAGE_MODEL = "voltage_model"
    CURRENT_MODEL_SIMPLE = "current_model_simple"
    CURRENT_MODEL_FULL = "current_model_full"
    STATOR_CURRENT_ESTIMATION = "stator_current_estimation"
    BLENDED = "blended"


@dataclass(frozen=True)
class EstimatorParams:
    """The estimator's copy of the machine parameters."""

    r_se: float
    r_re: float
    l_me: float
    l_le: float
    z_p: int = 2

    def __post_init__(self):
        for name in ("r_se", "r_re", "l_me", "l_le"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        if int(self.z_p) != self.z_p or self.z_p < 1:
            raise ValueError(f"z_p must be a positive integer, got {self.z_p!r}")

    @classmethod
    def from_machine(
        cls,
        p: MachineParams,
        r_se: float = 1.0,
        r_re: float = 1.0,
        l_me: float = 1.0,
        l_le: float = 1.0,
    ) -> "EstimatorParams":
        """Copy ``p`` scaled by relative factors (1.05 means +5 %)."""
        return cls(p.r_s * r_se, p.r_r * r_re, p.l_m * l_me, p.l_l * l_le, p.z_p)


@dataclass(frozen=True)
class FluxEstimate:
    psi_s_hat: complex
    psi_r_hat: Optional[complex] = None
    i_s_hat: Optional[complex] = None


ZERO_ESTIMATE = FluxEstimate(SpaceVector())


class FluxEstimator:
    """Common stepping machinery. Subclasses implement ``_advance``."""

    kind: EstimatorKind

    def __init__(self, params: EstimatorParams, dt: float, method=IntegrationMethod.RK4):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        if not isinstance(params, EstimatorParams):
            raise TypeError(f"expected EstimatorParams, got {type(params).__name__}")
        self.params = params
        self.dt = dt
        self.method = IntegrationMethod.parse(method)
        self._prev: Optional[Measurement] = None

    def prime(self, m: Measurement) -> FluxEstimate:
        """Register the sample at the initial instant without integrating."""
        self._prev = m
        return self.estimate(m)

    def step(self, m: Measurement) -> FluxEstimate:
        prev = self._prev if self._prev is not None else m
        out = self._advance(prev, m)
        self._prev = m
        return out

    def estimate(self, m: Measurement) -> FluxEstimate:
        """Output for the current internal state at sample ``m``."""
        raise NotImplementedError

    def _advance(self, prev: Measurement, m: Measurement) -> FluxEstimate:
        raise NotImplementedError

    def _integrate(
        self,
        x: complex,
        f: Callable[[complex, complex, complex, float], complex],
        prev: Measurement,
        m: Measurement,
    ) -> complex:
        """Integrate ``dx/dt = f(x, u_s, i_s, omega)`` across one sample interval."""
        dt = self.dt
        u0, i0, w0 = prev.u_s, prev.i_s, prev.omega
        du, di, dw = m.u_s - u0, m.i_s - i0, m.omega - w0

        def deriv(tau, state):
            a = tau / dt
            return (f(state[0], u0 + a * du, i0 + a * di, w0 + a * dw),)

        return integrate_step((x,), deriv, 0.0, dt, self.method)[0]


class VoltageModelEstimator(FluxEstimator):
    """Open-loop integral of ``u_s - r_se i_s``.

    ``clamp`` limits each axis of the integrator to +/- clamp Wb, the way an
    integrator block with saturation would.
    """

    kind = EstimatorKind.VOLTAGE_MODEL

    def __init__(self, params, dt, method=IntegrationMethod.RK4, clamp: Optional[float] = None):
        super().__init__(params, dt, method)
        if clamp is not None and not clamp > 0:
            raise ValueError(f"clamp must be positive, got {clamp!r}")
        self.clamp = clamp
        self.psi_s = 0j

    def estimate(self, m):
        return FluxEstimate(SpaceVector.of(self.psi_s))

    def _advance(self, prev, m):
        r_se = self.params.r_se
        psi = self._integrate(self.psi_s, lambda x, u, i, w: u - r_se * i, prev, m)
        if self.clamp is not None:
            c = self.clamp
            psi = complex(min(max(psi.real, -c), c), min(max(psi.imag, -c), c))
        self.psi_s = psi
        return self.estimate(m)


class CurrentModelSimpleEstimator(FluxEstimator):
    """``l_me i_s``; valid only while the rotor current is zero."""

    kind = EstimatorKind.CURRENT_MODEL_SIMPLE

    def estimate(self, m):
        return FluxEstimate(SpaceVector.of(self.params.l_me * m.i_s))

    def _advance(self, prev, m):
        return self.estimate(m)


class CurrentModelFullEstimator(FluxEstimator):
    """Rotor-flux model driven by stator current and speed."""

    kind = EstimatorKind.CURRENT_MODEL_FULL

    def __init__(self, params, dt, method=IntegrationMethod.RK4):
        super().__init__(params, dt, method)
        self.psi_r = 0j

    def estimate(self, m):
        p = self.params
        l_sum = p.l_le + p.l_me
        psi_s = (p.l_le * m.i_s + self.psi_r) * (p.l_me / l_sum)
        return FluxEstimate(SpaceVector.of(psi_s), SpaceVector.of(self.psi_r))

    def _advance(self, prev, m):
        p = self.params
        l_sum = p.l_le + p.l_me
        gain = p.r_re * p.l_me / l_sum
        decay = p.r_re / l_sum
        z_p = p.z_p

        # the speed term enters with a plus sign, consistent with the machine's rotor equation
        def f(psi_r, u, i, w):
            return gain * i - decay * psi_r + 1j * (z_p * w) * psi_r

        self.psi_r = self._integrate(self.psi_r, f, prev, m)
        return self.estimate(m)


class StatorCurrentEstimator(FluxEstimator):
    """Voltage integral with the resistive drop taken from the estimated current.

    Uses only the stator voltage; the current is reconstructed as
    ``psi_s_hat / l_me``.
    """

    kind = EstimatorKind.STATOR_CURRENT_ESTIMATION

    def __init__(self, params, dt, method=IntegrationMethod.RK4):
        super().__init__(params, dt, method)
        self.psi_s = 0j

    def estimate(self, m):
        return FluxEstimate(
            SpaceVector.of(self.psi_s),
            i_s_hat=SpaceVector.of(self.psi_s / self.params.l_me),
        )

    def _advance(self, prev, m):
        a = self.params.r_se / self.params.l_me
        self.psi_s = self._integrate(self.psi_s, lambda x, u, i, w: u - a * x, prev, m)
        return self.estimate(m)


class BlendedEstimator(FluxEstimator):
    """Low-passed current model plus high-passed voltage model.

    Both constituents advance on every sample. The default crossover is
    ``r_se / l_me``, the corner below which the resistive drop dominates the
    voltage equation.
    """

    kind = EstimatorKind.BLENDED

    def __init__(
        self,
        params,
        dt,
        method=IntegrationMethod.RK4,
        crossover: Optional[float] = None,
        clamp: Optional[float] = None,
    ):
        super().__init__(params, dt, method)
        if crossover is None:
            crossover = params.r_se / params.l_me
        self.crossover = crossover
        self.voltage = VoltageModelEstimator(params, dt, method, clamp=clamp)
        self.current = CurrentModelFullEstimator(params, dt, method)
        self.lp = FirstOrderFilterState(crossover)
        self.hp = FirstOrderFilterState(crossover)
        self.psi_s = 0j

    def prime(self, m):
        self.voltage.prime(m)
        self.current.prime(m)
        return super().prime(m)

    def estimate(self, m):
        return FluxEstimate(SpaceVector.of(self.psi_s), SpaceVector.of(self.current.psi_r))

    def _advance(self, prev, m):
        # plain complex keeps the filter arithmetic off the SpaceVector wrappers
        vm = complex(self.voltage.step(m).psi_s_hat)
        cm = complex(self.current.step(m).psi_s_hat)
        self.psi_s = lowpass_step(self.lp, cm, self.dt) + highpass_step(self.hp, vm, self.dt)
        return self.estimate(m)


_CLASSES = {
    EstimatorKind.VOLTAGE_MODEL: VoltageModelEstimator,
    EstimatorKind.CURRENT_MODEL_SIMPLE: CurrentModelSimpleEstimator,
    EstimatorKind.CURRENT_MODEL_FULL: CurrentModelFullEstimator,
    EstimatorKind.STATOR_CURRENT_ESTIMATION: StatorCurrentEstimator,
    EstimatorKind.BLENDED: BlendedEstimator,
}


def make_estimator(
    kind: "EstimatorKind | str",
    params: EstimatorParams,
    dt: float,
    method: "IntegrationMethod | str" = IntegrationMethod.RK4,
    crossover: Optional[float] = None,
    clamp: Optional[float] = None,
) -> FluxEstimator:
    """Build a zeroed estimator of the given kind.

    ``crossover`` (rad/s) applies to the blended kind only and ``clamp`` (Wb)
    to the voltage-model integrator, including the one inside the blend.
    """
    kind = EstimatorKind(kind)
    if crossover is not None and not crossover > 0:
        raise ValueError(f"crossover must be positive, got {crossover!r}")
    cls = _CLASSES[kind]
    if kind is EstimatorKind.BLENDED:
        return cls(params, dt, method, crossover=crossover, clamp=clamp)
    if kind is EstimatorKind.VOLTAGE_MODEL:
        return cls(params, dt, method, clamp=clamp)
    return cls(params, dt, method)
