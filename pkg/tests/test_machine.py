import dataclasses
import math

import numpy as np
import pytest

from imflux.machine import (
    DEFAULT_MACHINE,
    ConstantSpeed,
    InputProfile,
    MachineParams,
    MachineState,
    Measurement,
    MeasurementFault,
    RampSpeed,
    SimulationError,
    SinusoidVoltage,
    StepVoltage,
    ZeroVoltage,
    corrupt,
    currents_from_fluxes,
    fluxes_from_currents,
    machine_derivatives,
    simulate,
    steady_state,
    synchronous_speed,
)
from imflux.numerics import IntegrationMethod, integrate_step

P = MachineParams(r_s=1.0, r_r=0.8, l_m=0.1, l_l=0.01, z_p=2)


@pytest.mark.parametrize(
    "field,value", [("r_s", 0.0), ("r_r", -1.0), ("l_m", math.nan), ("l_l", 0.0), ("z_p", 0), ("z_p", 1.5)]
)
def test_params_validated(field, value):
    kwargs = dataclasses.asdict(P)
    kwargs[field] = value
    with pytest.raises(ValueError):
        MachineParams(**kwargs)


# --- flux/current relations -----------------------------------------------------


def test_currents_zero_state():
    assert currents_from_fluxes(MachineState(), P) == (0, 0)


def test_equal_fluxes_mean_no_rotor_current():
    i_s, i_r = currents_from_fluxes(MachineState(0.4, 0.4), P)
    assert i_r == 0
    assert i_s == pytest.approx(4.0)


def test_currents_direct_substitution():
    i_s, i_r = currents_from_fluxes(MachineState(0.5, 0.4), P)
    assert i_r == pytest.approx(-10.0)
    assert i_s == pytest.approx(15.0)


def test_flux_current_round_trip():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        p = MachineParams(*rng.uniform(0.05, 5.0, 2), *rng.uniform(1e-3, 1.0, 2), z_p=int(rng.integers(1, 5)))
        z = rng.normal(size=4) * rng.uniform(0.01, 100.0)
        state = MachineState(complex(z[0], z[1]), complex(z[2], z[3]))
        i_s, i_r = currents_from_fluxes(state, p)
        # psi_s = l_m (i_s + i_r), psi_r = psi_s + l_l i_r
        psi_s = p.l_m * (i_s + i_r)
        psi_r = psi_s + p.l_l * i_r
        scale = max(abs(state.psi_s), abs(state.psi_r))
        worst = max(worst, abs(psi_s - state.psi_s) / scale, abs(psi_r - state.psi_r) / scale)
        back = fluxes_from_currents(i_s, i_r, p)
        worst = max(worst, abs(back.psi_s - state.psi_s) / scale)
    assert worst < 1e-12


# --- derivatives ----------------------------------------------------------------


def test_derivatives_zero_equilibrium():
    d = machine_derivatives(MachineState(), 0j, 0.0, P)
    assert d == MachineState(0, 0)


def test_derivatives_zero_state_step_voltage():
    d = machine_derivatives(MachineState(), 100 + 0j, 50.0, P)
    assert d.psi_s == 100
    assert d.psi_r == 0


def test_derivatives_vanish_at_dc_equilibrium():
    # i_r = 0 and u_s = r_s i_s
    psi = 0.7 - 0.2j
    u = P.r_s * psi / P.l_m
    d = machine_derivatives(MachineState(psi, psi), u, 0.0, P)
    assert abs(d.psi_s) < 1e-12
    assert abs(d.psi_r) < 1e-12


def test_rotor_term_rotates_by_j():
    psi = 0.3 + 0.1j
    d = machine_derivatives(MachineState(psi, psi), 0j, 10.0, P)
    # i_r = 0 so d psi_r = j z_p w psi_r
    assert d.psi_r == pytest.approx(1j * P.z_p * 10.0 * psi)


def test_simulate_matches_public_derivatives():
    profile = InputProfile(SinusoidVoltage(50.0, 20.0), ConstantSpeed(40.0))
    trace = simulate(P, profile, 1e-3, 5e-3)

    def deriv(t, x):
        d = machine_derivatives(MachineState(*x), profile.u_s(t), profile.omega(t), P)
        return [d.psi_s, d.psi_r]

    x = (0j, 0j)
    for k in range(5):
        x = integrate_step(x, deriv, k * 1e-3, 1e-3)
    assert trace.psi_s[-1] == pytest.approx(x[0], abs=1e-15)
    assert trace.psi_r[-1] == pytest.approx(x[1], abs=1e-15)


# --- simulate ---------------------------------------------------------------------


def test_zero_input_zero_trace():
    trace = simulate(P, InputProfile(), 1e-3, 0.1)
    for arr in (trace.u_s, trace.i_s, trace.i_r, trace.psi_s, trace.psi_r):
        assert not np.any(arr)


@pytest.mark.parametrize("t_end,dt,n", [(1.0, 0.1, 11), (0.3, 0.1, 4), (5.0, 1e-4, 50001), (0.25, 0.1, 3)])
def test_record_count_and_uniform_time(t_end, dt, n):
    trace = simulate(P, InputProfile(), dt, t_end)
    assert len(trace) == n
    assert trace.t[0] == 0.0
    assert np.allclose(np.diff(trace.t), dt, rtol=0, atol=1e-12)


def test_first_record_is_initial_state():
    init = MachineState(0.1 + 0.2j, 0.3j)
    trace = simulate(P, InputProfile(), 1e-3, 0.01, initial=init)
    assert trace[0].psi_s == init.psi_s
    assert trace[0].psi_r == init.psi_r


def test_bad_time_arguments():
    with pytest.raises(ValueError):
        simulate(P, InputProfile(), 0.0, 1.0)
    with pytest.raises(ValueError):
        simulate(P, InputProfile(), 0.1, 0.05)


def test_dc_step_settles_to_u_over_r():
    profile = InputProfile(StepVoltage(10.0), ConstantSpeed(0.0))
    coarse = simulate(P, profile, 1e-3, 5.0)
    fine = simulate(P, profile, 1e-4, 5.0)
    assert coarse.i_s[-1].real == pytest.approx(10.0, rel=1e-4)
    assert abs((coarse.psi_s[-1] - coarse.psi_s[-2]) / 1e-3) < 1e-3
    assert coarse.psi_s[-1] == pytest.approx(fine.psi_s[-1], rel=1e-6)


def test_default_machine_dc_current_energy_sanity():
    u = 6.0
    trace = simulate(DEFAULT_MACHINE, InputProfile(StepVoltage(u), ConstantSpeed(0.0)), 1e-4, 4.0)
    assert abs(trace.i_s[-1] - u / DEFAULT_MACHINE.r_s) / (u / DEFAULT_MACHINE.r_s) < 1e-4


def test_sinusoid_50hz_amplitude_matches_finer_run():
    profile = InputProfile(SinusoidVoltage(311.0, 50.0), ConstantSpeed(synchronous_speed(50.0, 2)))
    coarse = simulate(DEFAULT_MACHINE, profile, 1e-4, 1.0)
    fine = simulate(DEFAULT_MACHINE, profile, 1e-5, 1.0)
    a_coarse = np.abs(coarse.psi_s[-200:]).mean()
    a_fine = np.abs(fine.psi_s[-2000:]).mean()
    assert a_coarse == pytest.approx(a_fine, rel=1e-3)


def test_step_refinement_convergence_default_machine():
    profile = InputProfile(SinusoidVoltage(32.0, 5.0), ConstantSpeed(0.95 * synchronous_speed(5.0, 2)))
    coarse = simulate(DEFAULT_MACHINE, profile, 1e-4, 1.0)
    fine = simulate(DEFAULT_MACHINE, profile, 1e-5, 1.0)
    for name in ("psi_s", "psi_r"):
        a, b = getattr(coarse, name), getattr(fine, name)[::10]
        assert np.max(np.abs(a - b)) / np.max(np.abs(b)) < 1e-6


def test_blow_up_reports_step_and_method():
    profile = InputProfile(StepVoltage(10.0), ConstantSpeed(0.0))
    with pytest.raises(SimulationError) as info:
        simulate(DEFAULT_MACHINE, profile, 0.1, 200.0, IntegrationMethod.FORWARD_EULER)
    assert info.value.step > 1
    assert "euler" in str(info.value) and "dt=0.1" in str(info.value)


# --- profiles -------------------------------------------------------------------


def test_sinusoid_is_balanced_rotating_vector():
    v = SinusoidVoltage(2.0, 5.0)
    t = 0.013
    assert v(t) == pytest.approx(2.0 * complex(math.cos(2 * math.pi * 5 * t), math.sin(2 * math.pi * 5 * t)))


def test_sinusoid_ramp_envelope():
    v = SinusoidVoltage(1.0, 0.0, ramp=0.5)
    assert v(0.0) == 0
    assert v(0.25).real == pytest.approx(0.5)
    assert v(0.5) == 1
    assert v(3.0) == 1


def test_profile_validation():
    with pytest.raises(ValueError):
        SinusoidVoltage(1.0, -1.0)
    with pytest.raises(ValueError):
        SinusoidVoltage(1.0, 1.0, ramp=-1.0)


def test_step_and_speed_profiles():
    assert StepVoltage(3.0, 0.5)(0.49) == 0
    assert StepVoltage(3.0, 0.5)(0.5) == 3.0
    assert RampSpeed(1.0, 2.0)(3.0) == 7.0
    assert ZeroVoltage()(1.0) == 0


# --- steady state --------------------------------------------------------------


@pytest.mark.parametrize("slip", [0.0, 0.05, 1.0])
def test_steady_state_is_periodic(slip):
    f = 5.0
    profile = InputProfile(SinusoidVoltage(32.0, f, 0.3), ConstantSpeed((1 - slip) * synchronous_speed(f, 2)))
    x0 = steady_state(DEFAULT_MACHINE, profile)
    trace = simulate(DEFAULT_MACHINE, profile, 1e-4, 0.2, initial=x0)
    expected = x0.psi_s * np.exp(2j * math.pi * f * trace.t)
    assert np.max(np.abs(trace.psi_s - expected)) < 1e-8
    if slip == 0.0:
        assert np.max(np.abs(trace.i_r)) < 1e-7


def test_steady_state_dc():
    profile = InputProfile(StepVoltage(6.0), ConstantSpeed(0.0))
    x0 = steady_state(DEFAULT_MACHINE, profile)
    i_s, i_r = currents_from_fluxes(x0, DEFAULT_MACHINE)
    assert i_s == pytest.approx(6.0 / DEFAULT_MACHINE.r_s)
    assert abs(i_r) < 1e-12


def test_steady_state_rejects_ramps():
    with pytest.raises(ValueError):
        steady_state(P, InputProfile(SinusoidVoltage(1.0, 5.0, ramp=0.5)))
    with pytest.raises(ValueError):
        steady_state(P, InputProfile(SinusoidVoltage(1.0, 5.0), RampSpeed(0.0, 1.0)))


# --- measurement boundary --------------------------------------------------------


def _record():
    trace = simulate(P, InputProfile(StepVoltage(5.0), ConstantSpeed(3.0)), 1e-3, 0.01)
    return trace[5]


def test_measurement_exposes_only_sensor_quantities():
    names = {f.name for f in dataclasses.fields(Measurement)}
    assert names == {"t", "u_s", "i_s", "omega"}
    m = corrupt(_record(), MeasurementFault(), np.random.default_rng(0))
    for forbidden in ("psi_s", "psi_r", "i_r"):
        assert not hasattr(m, forbidden)
    with pytest.raises((AttributeError, TypeError)):
        m.psi_s = 1.0


def test_zero_fault_is_identity():
    rec = _record()
    m = corrupt(rec, MeasurementFault(), np.random.default_rng(0))
    assert (m.t, m.u_s, m.i_s, m.omega) == (rec.t, rec.u_s, rec.i_s, rec.omega)


def test_current_offset_shifts_exactly():
    rec = _record()
    m = corrupt(rec, MeasurementFault(current_offset=0.1), np.random.default_rng(0))
    assert m.i_s == rec.i_s + 0.1
    assert m.u_s == rec.u_s


def test_noise_statistics_and_seed_determinism():
    rec = _record()
    fault = MeasurementFault(current_noise_std=0.05, voltage_noise_std=0.05)
    n = 100_000

    def draw(seed):
        rng = np.random.default_rng(seed)
        ms = [corrupt(rec, fault, rng) for _ in range(n)]
        return np.array([m.i_s for m in ms]), np.array([m.u_s for m in ms])

    i_a, u_a = draw(3)
    i_b, u_b = draw(3)
    assert np.array_equal(i_a, i_b) and np.array_equal(u_a, u_b)
    bound = 3 * 0.05 / math.sqrt(n)
    for samples, truth in ((i_a, rec.i_s), (u_a, rec.u_s)):
        err = samples.mean() - truth
        assert abs(err.real) < bound and abs(err.imag) < bound
        assert samples.real.std() == pytest.approx(0.05, rel=0.02)
    assert not np.array_equal(i_a, draw(4)[0])


def test_fault_validation():
    with pytest.raises(ValueError):
        MeasurementFault(current_noise_std=-1.0)
