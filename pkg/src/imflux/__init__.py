"""Induction machine flux estimators and the simulator used to stress them."""

from imflux.numerics import (
    FirstOrderFilterState,
    IntegrationMethod,
    NonFiniteError,
    SpaceVector,
    highpass_step,
    integrate_step,
    lowpass_step,
)
from imflux.machine import (
    DEFAULT_MACHINE,
    InputProfile,
    MachineParams,
    MachineState,
    Measurement,
    MeasurementFault,
    Trace,
    TraceRecord,
    corrupt,
    currents_from_fluxes,
    machine_derivatives,
    simulate,
    steady_state,
)
from imflux.estimators import (
    EstimatorKind,
    EstimatorParams,
    FluxEstimate,
    make_estimator,
)
from imflux.harness import (
    ErrorMetrics,
    Mismatch,
    Scenario,
    ScenarioResult,
    canned_scenarios,
    compute_metrics,
    run_scenario,
    sinusoid_profile,
    sweep,
)

__version__ = "0.1.0"
