"""
YAML run configuration: a serializable mirror of :class:`Scenario` plus I/O.

Layout (every section except ``voltage`` and ``speed`` is optional)::

    name: custom
    estimator: voltage_model
    seed: 0
    out: null
    machine:    {r_s, r_r, l_m, l_l, z_p}
    mismatch:   {r_se, r_re, l_me, l_le}
    voltage:    {kind: zero} | {kind: step, amplitude, start}
                | {kind: sinusoid, amplitude, frequency, phase, ramp}
    speed:      {kind: constant, omega} | {kind: ramp, omega0, slope}
    fault:      {current_offset: [x, y], current_noise_std,
                 voltage_offset: [x, y], voltage_noise_std}
    simulation: {dt, t_end, settle, method, estimator_method, start,
                 crossover, clamp}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from imflux.estimators import EstimatorKind
from imflux.harness import Mismatch, Scenario
from imflux.machine import (
    DEFAULT_MACHINE,
    ConstantSpeed,
    InputProfile,
    MachineParams,
    MeasurementFault,
    RampSpeed,
    SinusoidVoltage,
    StepVoltage,
    ZeroVoltage,
)
from imflux.numerics import IntegrationMethod


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


_SECTIONS = ("name", "estimator", "seed", "out", "machine", "mismatch", "voltage", "speed", "fault", "simulation")
_VOLTAGE_FIELDS = {
    "zero": ((), ()),
    "step": (("amplitude",), ("start",)),
    "sinusoid": (("amplitude", "frequency"), ("phase", "ramp")),
}
_SPEED_FIELDS = {
    "constant": (("omega",), ()),
    "ramp": (("omega0", "slope"), ()),
}
_SIMULATION_DEFAULTS = {
    "dt": 1e-4,
    "t_end": 5.0,
    "settle": 1.0,
    "method": "rk4",
    "estimator_method": "rk4",
    "start": "zero",
    "crossover": None,
    "clamp": None,
}


def _number(value: Any, key: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"'{key}' must be a number, got {value!r}", key)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"'{key}' must be a number, got {value!r}", key)


def _optional_number(value: Any, key: str) -> Optional[float]:
    return None if value is None else _number(value, key)


def _vector(value: Any, key: str) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(_number(value[0], key + "[0]"), _number(value[1], key + "[1]"))
    if isinstance(value, (int, float, str)) and not isinstance(value, bool):
        return complex(_number(value, key), 0.0)
    raise ConfigError(f"'{key}' must be a number or an [x, y] pair, got {value!r}", key)


def _section(doc: dict, name: str, allowed, required: bool = False) -> dict:
    if name not in doc or doc[name] is None:
        if required:
            raise ConfigError(f"missing required key '{name}'", name)
        return {}
    sec = doc[name]
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be a mapping", name)
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"unknown key '{name}.{k}'", f"{name}.{k}")
    return sec


def _require(sec: dict, section: str, key: str):
    if key not in sec:
        raise ConfigError(f"missing required key '{section}.{key}'", f"{section}.{key}")
    return sec[key]


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    seed: int = 0
    out: Optional[str] = None

    # --- dict form ----------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a mapping at the top level")
        for k in doc:
            if k not in _SECTIONS:
                raise ConfigError(f"unknown key '{k}'", k)

        m = _section(doc, "machine", ("r_s", "r_r", "l_m", "l_l", "z_p"))
        base = dataclasses.asdict(DEFAULT_MACHINE)
        for k, v in m.items():
            base[k] = _number(v, f"machine.{k}")
        z_p = base["z_p"]
        if z_p != int(z_p):
            raise ConfigError("'machine.z_p' must be an integer", "machine.z_p")
        base["z_p"] = int(z_p)
        try:
            machine = MachineParams(**base)
        except ValueError as exc:
            raise ConfigError(str(exc), "machine") from None

        mm = _section(doc, "mismatch", ("r_se", "r_re", "l_me", "l_le"))
        try:
            mismatch = Mismatch(**{k: _number(v, f"mismatch.{k}") for k, v in mm.items()})
        except ValueError as exc:
            raise ConfigError(str(exc), "mismatch") from None

        profile = InputProfile(_voltage(doc), _speed(doc))

        f = _section(doc, "fault", ("current_offset", "current_noise_std", "voltage_offset", "voltage_noise_std"))
        try:
            fault = MeasurementFault(
                current_offset=_vector(f.get("current_offset", 0.0), "fault.current_offset"),
                current_noise_std=_number(f.get("current_noise_std", 0.0), "fault.current_noise_std"),
                voltage_offset=_vector(f.get("voltage_offset", 0.0), "fault.voltage_offset"),
                voltage_noise_std=_number(f.get("voltage_noise_std", 0.0), "fault.voltage_noise_std"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "fault") from None

        sim = dict(_SIMULATION_DEFAULTS)
        sim.update(_section(doc, "simulation", tuple(_SIMULATION_DEFAULTS)))

        try:
            estimator = EstimatorKind(doc.get("estimator", EstimatorKind.VOLTAGE_MODEL.value))
        except ValueError:
            valid = ", ".join(k.value for k in EstimatorKind)
            raise ConfigError(f"unknown estimator {doc.get('estimator')!r}; expected one of {valid}", "estimator") from None
        try:
            method = IntegrationMethod.parse(sim["method"])
            estimator_method = IntegrationMethod.parse(sim["estimator_method"])
        except ValueError as exc:
            raise ConfigError(str(exc), "simulation.method") from None

        try:
            scenario = Scenario(
                name=str(doc.get("name", "custom")),
                estimator=estimator,
                machine=machine,
                mismatch=mismatch,
                profile=profile,
                fault=fault,
                dt=_number(sim["dt"], "simulation.dt"),
                t_end=_number(sim["t_end"], "simulation.t_end"),
                settle=_number(sim["settle"], "simulation.settle"),
                method=method,
                estimator_method=estimator_method,
                start=str(sim["start"]),
                crossover=_optional_number(sim["crossover"], "simulation.crossover"),
                clamp=_optional_number(sim["clamp"], "simulation.clamp"),
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "simulation") from None

        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError(f"'seed' must be an integer, got {seed!r}", "seed")
        out = doc.get("out")
        return cls(scenario, seed, None if out is None else str(out))

    def to_dict(self) -> dict:
        s = self.scenario
        p = s.profile
        v = p.voltage
        if isinstance(v, ZeroVoltage):
            voltage = {"kind": "zero"}
        elif isinstance(v, StepVoltage):
            voltage = {"kind": "step", "amplitude": v.amplitude, "start": v.start}
        else:
            voltage = {
                "kind": "sinusoid",
                "amplitude": v.amplitude,
                "frequency": v.frequency,
                "phase": v.phase,
                "ramp": v.ramp,
            }
        w = p.speed
        if isinstance(w, ConstantSpeed):
            speed = {"kind": "constant", "omega": w.omega}
        else:
            speed = {"kind": "ramp", "omega0": w.omega0, "slope": w.slope}
        fault = s.fault
        return {
            "name": s.name,
            "estimator": s.estimator.value,
            "seed": self.seed,
            "out": self.out,
            "machine": dataclasses.asdict(s.machine),
            "mismatch": dataclasses.asdict(s.mismatch),
            "voltage": voltage,
            "speed": speed,
            "fault": {
                "current_offset": [fault.current_offset.real, fault.current_offset.imag],
                "current_noise_std": fault.current_noise_std,
                "voltage_offset": [fault.voltage_offset.real, fault.voltage_offset.imag],
                "voltage_noise_std": fault.voltage_noise_std,
            },
            "simulation": {
                "dt": s.dt,
                "t_end": s.t_end,
                "settle": s.settle,
                "method": s.method.value,
                "estimator_method": s.estimator_method.value,
                "start": s.start,
                "crossover": s.crossover,
                "clamp": s.clamp,
            },
        }

    # --- text form ----------------------------------------------------------

    def dumps(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"malformed YAML: {problem}", line=line) from None
        if doc is None:
            raise ConfigError("config is empty")
        return cls.from_dict(doc)


def _voltage(doc: dict):
    allowed = ("kind", "amplitude", "start", "frequency", "phase", "ramp")
    sec = _section(doc, "voltage", allowed, required=True)
    kind = _require(sec, "voltage", "kind")
    if kind not in _VOLTAGE_FIELDS:
        raise ConfigError(f"unknown voltage kind {kind!r}; expected one of {', '.join(_VOLTAGE_FIELDS)}", "voltage.kind")
    required, optional = _VOLTAGE_FIELDS[kind]
    for k in sec:
        if k != "kind" and k not in required + optional:
            raise ConfigError(f"key 'voltage.{k}' does not apply to a {kind} voltage", f"voltage.{k}")
    vals = {k: _number(_require(sec, "voltage", k), f"voltage.{k}") for k in required}
    vals.update({k: _number(sec[k], f"voltage.{k}") for k in optional if k in sec})
    try:
        if kind == "zero":
            return ZeroVoltage()
        if kind == "step":
            return StepVoltage(**vals)
        return SinusoidVoltage(**vals)
    except ValueError as exc:
        raise ConfigError(str(exc), "voltage") from None


def _speed(doc: dict):
    sec = _section(doc, "speed", ("kind", "omega", "omega0", "slope"), required=True)
    kind = _require(sec, "speed", "kind")
    if kind not in _SPEED_FIELDS:
        raise ConfigError(f"unknown speed kind {kind!r}; expected one of {', '.join(_SPEED_FIELDS)}", "speed.kind")
    required, _ = _SPEED_FIELDS[kind]
    for k in sec:
        if k != "kind" and k not in required:
            raise ConfigError(f"key 'speed.{k}' does not apply to a {kind} speed", f"speed.{k}")
    vals = {k: _number(_require(sec, "speed", k), f"speed.{k}") for k in required}
    return ConstantSpeed(**vals) if kind == "constant" else RampSpeed(**vals)


def load_config(path: "str | Path") -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return RunConfig.loads(text)
