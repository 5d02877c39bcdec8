"""
Space-vector arithmetic, fixed-step integration and first-order filters.

Two-axis quantities are carried as Python complex numbers (x on the real
axis, y on the imaginary axis) so that the rotation by 90 degrees that
appears in the rotor equation is a plain multiplication by ``1j``.
:class:`SpaceVector` is a named view over ``complex`` for public APIs; every
function here accepts a bare ``complex`` as well.
"""

from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass
from typing import Callable, Sequence


class NonFiniteError(ArithmeticError):
    """Raised when an integration step produces a NaN or infinite component."""

    def __init__(self, index: int, t: float, message: str | None = None):
        self.index = index
        self.t = t
        super().__init__(message or f"non-finite value in state component {index} at t={t:.6g} s")


class SpaceVector(complex):
    """Complex-valued quantity in the stationary stator frame."""

    __slots__ = ()

    def __new__(cls, x: float = 0.0, y: float = 0.0):
        return super().__new__(cls, x, y)

    @classmethod
    def of(cls, z: complex) -> "SpaceVector":
        return cls(z.real, z.imag)

    @property
    def x(self) -> float:
        return self.real

    @property
    def y(self) -> float:
        return self.imag

    def magnitude(self) -> float:
        return abs(self)

    def rotate90(self) -> "SpaceVector":
        """Multiply by j."""
        return SpaceVector(-self.imag, self.real)

    def scale(self, k: float) -> "SpaceVector":
        return SpaceVector(k * self.real, k * self.imag)

    def __neg__(self):
        return SpaceVector(-self.real, -self.imag)

    def __repr__(self) -> str:
        return f"SpaceVector(x={self.real!r}, y={self.imag!r})"


def _keep_type(name):
    base = getattr(complex, name)

    def op(self, other):
        out = base(self, other)
        # arrays and other foreign operands take over via their reflected op
        return out if out is NotImplemented else SpaceVector.of(out)

    op.__name__ = name
    return op


for _name in ("__add__", "__radd__", "__sub__", "__rsub__", "__mul__", "__rmul__", "__truediv__"):
    setattr(SpaceVector, _name, _keep_type(_name))


def rotate90(v: complex) -> complex:
    return 1j * v


class IntegrationMethod(str, enum.Enum):
    FORWARD_EULER = "euler"
    RK4 = "rk4"

    @classmethod
    def parse(cls, value: "str | IntegrationMethod") -> "IntegrationMethod":
        if isinstance(value, cls):
            return value
        aliases = {"euler": cls.FORWARD_EULER, "forward_euler": cls.FORWARD_EULER, "rk4": cls.RK4}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown integration method {value!r}; expected one of {sorted(aliases)}") from None


State = Sequence[complex]
Derivative = Callable[[float, tuple], Sequence[complex]]


def integrate_step(
    state: State,
    deriv: Derivative,
    t: float,
    dt: float,
    method: IntegrationMethod = IntegrationMethod.RK4,
) -> tuple:
    """Advance ``state`` from ``t`` to ``t + dt``.

    ``deriv(t, state)`` must return a sequence of the same length as
    ``state``. Raises :class:`NonFiniteError` naming the first component
    whose updated value is not finite.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    if method is IntegrationMethod.FORWARD_EULER:
        k1 = deriv(t, state)
        out = [s + dt * d for s, d in zip(state, k1)]
    elif method is IntegrationMethod.RK4:
        h2 = 0.5 * dt
        k1 = deriv(t, state)
        k2 = deriv(t + h2, [s + h2 * d for s, d in zip(state, k1)])
        k3 = deriv(t + h2, [s + h2 * d for s, d in zip(state, k2)])
        k4 = deriv(t + dt, [s + dt * d for s, d in zip(state, k3)])
        h6 = dt / 6.0
        out = [s + h6 * (a + 2.0 * b + 2.0 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4)]
    else:
        raise ValueError(f"unsupported integration method {method!r}")
    # a single sum is cheaper than testing each component on the happy path
    if not cmath.isfinite(sum(out)):
        for i, v in enumerate(out):
            if not cmath.isfinite(v):
                raise NonFiniteError(i, t)
    return tuple(out)


@dataclass
class FirstOrderFilterState:
    """History of a bilinear first-order low-pass section.

    ``highpass_step`` reuses the low-pass recursion, so one instance serves
    as either filter and the pair sums to the input at every step.
    """

    cutoff_rad_s: float
    prev_input: complex = 0j
    prev_output: complex = 0j

    def __post_init__(self):
        if not self.cutoff_rad_s > 0:
            raise ValueError(f"cutoff_rad_s must be positive, got {self.cutoff_rad_s!r}")


def lowpass_step(f: FirstOrderFilterState, x: complex, dt: float) -> complex:
    """One trapezoidal step of ``w_c / (s + w_c)``."""
    k = 0.5 * f.cutoff_rad_s * dt
    y = ((1.0 - k) * f.prev_output + k * (x + f.prev_input)) / (1.0 + k)
    f.prev_input = x
    f.prev_output = y
    return y


def highpass_step(f: FirstOrderFilterState, x: complex, dt: float) -> complex:
    return x - lowpass_step(f, x, dt)
