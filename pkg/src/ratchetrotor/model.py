"""Physical parameters for the phase-shifted kicked rotor.

Dimensionless convention: the Hamiltonian is p^2/2 + K * cos(x + a_n) summed
over delta kicks at integer times, with [x, p] = i*hbar_eff.  The kick phase
a_n cycles through a finite sequence; the default sequence breaks parity and
produces a directed accelerator mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from scipy import constants

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

# CODATA cesium-133 atomic mass, kg
CESIUM_MASS_KG = 132.905451961 * constants.atomic_mass


def ratchet_phase_sequence() -> tuple[float, float, float]:
    """Return the period-3 kick phase sequence (0, 2*pi/3, 0).

    Kick n of the infinite train uses element n mod 3, with the first
    delivered kick having index n = 0.  A cyclic shift of this sequence
    relabels time and can flip the transport direction; this ordering is the
    one validated against the direction of the ballistic peak (see tests).
    With all phases zero the model reduces to the ordinary kicked rotor.
    """
    return (0.0, TWO_PI / 3.0, 0.0)


@dataclass(frozen=True)
class ExperimentUnits:
    """Laboratory quantities fixing the effective Planck constant.

    Attributes
    ----------
    pulse_period : float
        Time between kicks, seconds.
    wavelength : float
        Optical lattice laser wavelength, meters.
    atom_mass : float
        Atomic mass, kilograms.
    """

    pulse_period: float
    wavelength: float
    atom_mass: float

    def __post_init__(self):
        for name in ("pulse_period", "wavelength", "atom_mass"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"units.{name} must be a positive finite number, got {value!r}")


def hbar_eff_from_units(units: ExperimentUnits) -> float:
    """Dimensionless effective Planck constant 4*hbar*k_L^2*T1/M.

    k_L = 2*pi/wavelength is the laser wavenumber, T1 the pulse period and M
    the atomic mass.  For cesium at 852 nm this gives about 0.8 at
    T1 = 7.67 us and about 1.3 at T1 = 12.46 us.
    """
    k_l = TWO_PI / units.wavelength
    return 4.0 * constants.hbar * k_l**2 * units.pulse_period / units.atom_mass


@dataclass(frozen=True)
class SimParams:
    """Validated physical configuration shared by both engines.

    sigma defaults to 1.65 * hbar_eff (thermal momentum width) when not set.
    Phase access is cyclic: phase(n) = phases[n mod len(phases)].
    """

    kick_strength: float
    hbar_eff: float
    phases: tuple[float, ...] = field(default_factory=ratchet_phase_sequence)
    sigma: float | None = None
    seed: int = 0

    def phase(self, n: int) -> float:
        return self.phases[n % len(self.phases)]

    @property
    def sigma_resolved(self) -> float:
        return 1.65 * self.hbar_eff if self.sigma is None else self.sigma


def validate(params: SimParams) -> SimParams:
    """Check invariants and return params with phases normalized to [0, 2*pi).

    Raises ConfigError naming the offending field.
    """
    if not (isinstance(params.kick_strength, (int, float)) and math.isfinite(params.kick_strength)):
        raise ConfigError(f"kick_strength must be finite, got {params.kick_strength!r}")
    if params.kick_strength < 0:
        raise ConfigError(f"kick_strength must be >= 0, got {params.kick_strength}")
    if not (isinstance(params.hbar_eff, (int, float)) and math.isfinite(params.hbar_eff) and params.hbar_eff > 0):
        raise ConfigError(f"hbar_eff must be > 0 and finite, got {params.hbar_eff!r}")
    if len(params.phases) == 0:
        raise ConfigError("phases must be a nonempty sequence")
    for i, a in enumerate(params.phases):
        if not (isinstance(a, (int, float)) and math.isfinite(a)):
            raise ConfigError(f"phases[{i}] must be finite, got {a!r}")
    if params.sigma is not None:
        if not (isinstance(params.sigma, (int, float)) and math.isfinite(params.sigma) and params.sigma >= 0):
            raise ConfigError(f"sigma must be >= 0 and finite, got {params.sigma!r}")
    if not isinstance(params.seed, int) or isinstance(params.seed, bool):
        raise ConfigError(f"seed must be an integer, got {params.seed!r}")
    if not (0 <= params.seed < 2**64):
        raise ConfigError(f"seed must fit in 64 bits, got {params.seed}")
    normalized = tuple(float(a) % TWO_PI for a in params.phases)
    return replace(params, phases=normalized)


_PARAM_KEYS = {"kick_strength", "hbar_eff", "units", "phases", "sigma", "seed"}
_UNIT_KEYS = {"pulse_period", "wavelength", "atom_mass"}


def params_from_mapping(mapping: dict) -> SimParams:
    """Build validated SimParams from a parsed configuration section.

    Exactly one of hbar_eff or a units block must be present.  Unknown keys
    are an error so silent typos cannot change the physics.
    """
    if not isinstance(mapping, dict):
        raise ConfigError(f"params section must be a mapping, got {type(mapping).__name__}")
    unknown = set(mapping) - _PARAM_KEYS
    if unknown:
        raise ConfigError(f"unknown params key(s): {', '.join(sorted(unknown))}")
    if "kick_strength" not in mapping:
        raise ConfigError("params.kick_strength is required")

    has_hbar = "hbar_eff" in mapping
    has_units = "units" in mapping
    if has_hbar == has_units:
        raise ConfigError("exactly one of params.hbar_eff or params.units must be given")
    if has_units:
        block = mapping["units"]
        if not isinstance(block, dict):
            raise ConfigError("params.units must be a mapping")
        unknown = set(block) - _UNIT_KEYS
        if unknown:
            raise ConfigError(f"unknown params.units key(s): {', '.join(sorted(unknown))}")
        missing = _UNIT_KEYS - set(block)
        if missing:
            raise ConfigError(f"params.units missing key(s): {', '.join(sorted(missing))}")
        hbar_eff = hbar_eff_from_units(ExperimentUnits(**block))
    else:
        hbar_eff = mapping["hbar_eff"]

    kwargs = {"kick_strength": mapping["kick_strength"], "hbar_eff": hbar_eff}
    if "phases" in mapping:
        phases = mapping["phases"]
        if not isinstance(phases, (list, tuple)):
            raise ConfigError("params.phases must be a list of radians")
        kwargs["phases"] = tuple(phases)
    if "sigma" in mapping:
        kwargs["sigma"] = mapping["sigma"]
    if "seed" in mapping:
        kwargs["seed"] = mapping["seed"]
    return validate(SimParams(**kwargs))
