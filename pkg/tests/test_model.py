"""Parameter handling, kick-phase sequencing and unit conversion."""
import math

import numpy as np
import pytest

from ratchetrotor.errors import ConfigError
from ratchetrotor.model import (
    CESIUM_MASS_KG,
    TWO_PI,
    ExperimentUnits,
    SimParams,
    hbar_eff_from_units,
    params_from_mapping,
    ratchet_phase_sequence,
    validate,
)


def base_params(**overrides):
    kwargs = {"kick_strength": 3.1, "hbar_eff": 0.8}
    kwargs.update(overrides)
    return validate(SimParams(**kwargs))


def test_ratchet_phase_sequence_values():
    assert ratchet_phase_sequence() == (0.0, TWO_PI / 3.0, 0.0)


def test_phase_access_is_cyclic():
    params = base_params()
    assert params.phase(3) == params.phase(0) == 0.0
    assert params.phase(4) == pytest.approx(TWO_PI / 3.0)
    rng = np.random.default_rng(1)
    for n in rng.integers(0, 10**9, size=500):
        n = int(n)
        assert params.phase(n) == params.phases[n % len(params.phases)]


def test_all_zero_phases_reduce_to_plain_rotor():
    params = base_params(phases=(0.0,))
    assert params.phase(17) == 0.0


def test_hbar_eff_cesium_short_pulse_period():
    units = ExperimentUnits(pulse_period=7.67e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    assert hbar_eff_from_units(units) == pytest.approx(0.8, abs=0.01)


def test_hbar_eff_cesium_long_pulse_period():
    units = ExperimentUnits(pulse_period=12.46e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    assert hbar_eff_from_units(units) == pytest.approx(1.3, abs=0.015)


def test_hbar_eff_linear_in_pulse_period():
    short = ExperimentUnits(pulse_period=7.67e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    double = ExperimentUnits(pulse_period=2 * 7.67e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    assert hbar_eff_from_units(double) == pytest.approx(2 * hbar_eff_from_units(short), rel=1e-12)


def test_calibration_points_mutually_consistent():
    # the two pulse periods must map to effective Planck constants in the
    # same ratio as the periods themselves
    h_short = hbar_eff_from_units(
        ExperimentUnits(pulse_period=7.67e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    )
    h_long = hbar_eff_from_units(
        ExperimentUnits(pulse_period=12.46e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    )
    assert h_long / h_short == pytest.approx(12.46 / 7.67, rel=1e-12)
    assert h_long / h_short == pytest.approx(1.3 / 0.8, rel=5e-3)


def test_hbar_eff_monotone_in_wavenumber_and_mass():
    base = ExperimentUnits(pulse_period=7.67e-6, wavelength=852e-9, atom_mass=CESIUM_MASS_KG)
    shorter_wavelength = ExperimentUnits(
        pulse_period=7.67e-6, wavelength=500e-9, atom_mass=CESIUM_MASS_KG
    )
    heavier = ExperimentUnits(
        pulse_period=7.67e-6, wavelength=852e-9, atom_mass=2 * CESIUM_MASS_KG
    )
    assert hbar_eff_from_units(shorter_wavelength) > hbar_eff_from_units(base)
    assert hbar_eff_from_units(heavier) < hbar_eff_from_units(base)


@pytest.mark.parametrize("field", ["pulse_period", "wavelength", "atom_mass"])
def test_units_validation_names_offending_field(field):
    kwargs = {"pulse_period": 7.67e-6, "wavelength": 852e-9, "atom_mass": CESIUM_MASS_KG}
    kwargs[field] = -1.0
    with pytest.raises(ConfigError, match=field):
        ExperimentUnits(**kwargs)


def test_sigma_defaults_to_thermal_width():
    assert base_params().sigma_resolved == pytest.approx(1.65 * 0.8)
    assert base_params(hbar_eff=1.3).sigma_resolved == pytest.approx(1.65 * 1.3)
    assert base_params(sigma=0.5).sigma_resolved == 0.5
    assert base_params(sigma=0.0).sigma_resolved == 0.0


@pytest.mark.parametrize(
    "overrides, field",
    [
        ({"kick_strength": -1.0}, "kick_strength"),
        ({"kick_strength": math.nan}, "kick_strength"),
        ({"hbar_eff": 0.0}, "hbar_eff"),
        ({"hbar_eff": -0.8}, "hbar_eff"),
        ({"phases": ()}, "phases"),
        ({"phases": (0.0, math.inf)}, "phases"),
        ({"sigma": -0.1}, "sigma"),
        ({"seed": -1}, "seed"),
        ({"seed": 2**64}, "seed"),
        ({"seed": 1.5}, "seed"),
        ({"seed": True}, "seed"),
    ],
)
def test_validate_rejects_and_names_field(overrides, field):
    kwargs = {"kick_strength": 3.1, "hbar_eff": 0.8}
    kwargs.update(overrides)
    with pytest.raises(ConfigError, match=field):
        validate(SimParams(**kwargs))


def test_validate_normalizes_phases():
    params = base_params(phases=(TWO_PI + 1.0, -math.pi / 2.0, 0.0))
    assert params.phases[0] == pytest.approx(1.0)
    assert params.phases[1] == pytest.approx(1.5 * math.pi)
    assert params.phases[2] == 0.0
    assert all(0.0 <= a < TWO_PI for a in params.phases)


def test_mapping_requires_exactly_one_planck_source():
    with pytest.raises(ConfigError, match="exactly one"):
        params_from_mapping({"kick_strength": 3.1})
    with pytest.raises(ConfigError, match="exactly one"):
        params_from_mapping(
            {
                "kick_strength": 3.1,
                "hbar_eff": 0.8,
                "units": {
                    "pulse_period": 7.67e-6,
                    "wavelength": 852e-9,
                    "atom_mass": CESIUM_MASS_KG,
                },
            }
        )


def test_mapping_rejects_unknown_keys_by_name():
    with pytest.raises(ConfigError, match="kick_strenght"):
        params_from_mapping({"kick_strenght": 3.1, "hbar_eff": 0.8})
    with pytest.raises(ConfigError, match="atom_weight"):
        params_from_mapping(
            {
                "kick_strength": 3.1,
                "units": {
                    "pulse_period": 7.67e-6,
                    "wavelength": 852e-9,
                    "atom_weight": CESIUM_MASS_KG,
                },
            }
        )


def test_mapping_reports_missing_units_keys():
    with pytest.raises(ConfigError, match="atom_mass"):
        params_from_mapping(
            {
                "kick_strength": 3.1,
                "units": {"pulse_period": 7.67e-6, "wavelength": 852e-9},
            }
        )


def test_mapping_builds_params_from_units_block():
    params = params_from_mapping(
        {
            "kick_strength": 3.1,
            "units": {
                "pulse_period": 7.67e-6,
                "wavelength": 852e-9,
                "atom_mass": CESIUM_MASS_KG,
            },
            "seed": 11,
        }
    )
    assert params.hbar_eff == pytest.approx(0.8, abs=0.01)
    assert params.seed == 11
    assert params.phases == ratchet_phase_sequence()


def test_mapping_passes_through_explicit_fields():
    params = params_from_mapping(
        {
            "kick_strength": 2.0,
            "hbar_eff": 1.0,
            "phases": [0.0, TWO_PI + 0.5],
            "sigma": 0.7,
            "seed": 3,
        }
    )
    assert params.kick_strength == 2.0
    assert params.phases[1] == pytest.approx(0.5)
    assert params.sigma == 0.7
    assert params.seed == 3
