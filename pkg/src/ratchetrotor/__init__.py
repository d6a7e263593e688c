"""Kicked-rotor ratchet simulator.

Classical and quantum engines for the periodically kicked rotor with a
parity-breaking cyclic kick-phase sequence, plus the analysis toolkit for
its transport observables: directed ballistic peaks, anomalous diffusion,
dynamical localization, and the universal localized momentum profile.
"""

from .analysis import (
    FitResult,
    PeakResult,
    TimeSeries,
    asymmetry,
    fit_gogolin,
    fit_power_law,
    front_exponent_check,
    gogolin_density,
    moments,
    right_energy,
    track_peak,
)
from .classical import (
    AcceleratorOrbit,
    ClassicalEnsemble,
    ClassicalRunResult,
    PhasePoint,
    PhasePortrait,
    evolve,
    find_accelerator_orbit,
    folded_phase_portrait,
    kick_map_step,
    momentum_histogram,
    run_classical,
    sample_initial_ensemble,
)
from .distribution import MomentumDistribution, deposit, from_weights, symmetric_grid
from .errors import (
    ConfigError,
    FitError,
    GridCapError,
    NumericsError,
    OrbitSearchError,
)
from .model import (
    ExperimentUnits,
    SimParams,
    hbar_eff_from_units,
    params_from_mapping,
    ratchet_phase_sequence,
    validate,
)
from .quantum import (
    DensitySnapshot,
    GridGrowthNeeded,
    QuantumRunResult,
    QuantumState,
    floquet_step,
    grid_size_for,
    grow_state,
    initial_state,
    monte_carlo_distribution,
    propagate,
    run_monte_carlo,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
