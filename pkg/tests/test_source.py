"""Temperature calibration of the pair source and its emitted mixture."""

import math

import numpy as np
import pytest

from biphoton.circuits import bell_circuit, mixture_pair_probabilities
from biphoton.errors import CalibrationRangeError, ConfigurationError
from biphoton.quantum import ModeBasis
from biphoton.source import (
    DEFAULT_BASE_PAIR_RATE,
    CalibrationAnchor,
    PhaseMatchingModel,
    SourceCalibration,
    SourceEnsemble,
    diagonal_correlation_curve,
    source_state,
    validate_qpm,
)

DEFAULT = SourceCalibration.default()

# (temperature C, diagonal-basis correlation) at every calibration anchor
ANCHOR_CORRELATIONS = (
    (21.8, +1.0),
    (23.4, -1.0),
    (25.0, +1.0),
    (26.8, -1.0),
    (28.6, +0.90),
    (31.0, -0.40),
    (35.1, -1.0),
)


def _single_anchor(phase: float, weight: float, rate: float = 100.0):
    return SourceCalibration([CalibrationAnchor(25.0, phase, weight, rate)])


def _bell_correlation(ensemble: SourceEnsemble, alpha: float, beta: float) -> float:
    circuit = bell_circuit(alpha, beta)
    pairs = mixture_pair_probabilities(ensemble.components, circuit)
    pp = pairs.get((0, 2), 0.0)
    pm = pairs.get((0, 3), 0.0)
    mp = pairs.get((1, 2), 0.0)
    mm = pairs.get((1, 3), 0.0)
    return (pp + mm - pm - mp) / (pp + mm + pm + mp)


# ---------------------------------------------------------------------------
# interpolation


def test_interpolation_is_exact_at_anchors():
    for anchor in DEFAULT.anchors:
        phase, weight, rate = DEFAULT.interpolate(anchor.temperature_c)
        assert phase == pytest.approx(anchor.exchange_phase, abs=1e-12)
        assert weight == pytest.approx(anchor.degeneracy_weight, abs=1e-12)
        assert rate == pytest.approx(anchor.pair_rate, abs=1e-9)


def test_interpolation_midpoints_are_linear():
    phase, weight, rate = DEFAULT.interpolate(25.9)  # midway 25.0 -> 26.8
    assert phase == pytest.approx(2.5 * math.pi)
    assert weight == pytest.approx(0.0)
    assert rate == pytest.approx(0.06 * DEFAULT_BASE_PAIR_RATE)
    phase, weight, rate = DEFAULT.interpolate(33.05)  # midway 31.0 -> 35.1
    assert phase == pytest.approx(0.25 * math.pi)
    assert weight == pytest.approx(0.70)
    assert rate == pytest.approx(0.675 * DEFAULT_BASE_PAIR_RATE)


def test_phase_decreases_and_rate_increases_with_temperature():
    temps = np.linspace(21.8, 35.1, 200)
    phases = [DEFAULT.interpolate(t)[0] for t in temps]
    rates = [DEFAULT.interpolate(t)[2] for t in temps]
    assert all(p2 <= p1 + 1e-12 for p1, p2 in zip(phases, phases[1:]))
    assert all(r2 >= r1 - 1e-9 for r1, r2 in zip(rates, rates[1:]))


def test_out_of_range_temperatures_rejected():
    with pytest.raises(CalibrationRangeError):
        DEFAULT.interpolate(21.7)
    with pytest.raises(CalibrationRangeError):
        DEFAULT.interpolate(35.2)


def test_temperature_range_property():
    assert DEFAULT.temperature_range == (21.8, 35.1)


def test_calibration_validation():
    with pytest.raises(ConfigurationError):
        SourceCalibration([])
    a = CalibrationAnchor(25.0, 0.0, 0.5, 1.0)
    b = CalibrationAnchor(24.0, 0.0, 0.5, 1.0)
    with pytest.raises(ConfigurationError):
        SourceCalibration([a, b])
    with pytest.raises(ConfigurationError):
        CalibrationAnchor(25.0, 0.0, 1.5, 1.0)
    with pytest.raises(ConfigurationError):
        CalibrationAnchor(25.0, 0.0, 0.5, -1.0)


# ---------------------------------------------------------------------------
# emitted mixture structure


def test_optimal_temperature_emits_single_exchange_symmetric_pair():
    basis = ModeBasis.from_paths(["c"])
    ensemble = source_state(DEFAULT, 35.1, basis)
    assert len(ensemble.components) == 1
    weight, state = ensemble.components[0]
    assert weight == pytest.approx(1.0)
    assert not state.labeled
    assert ensemble.pair_rate == pytest.approx(DEFAULT_BASE_PAIR_RATE)


def test_detuned_temperature_emits_single_tagged_pair():
    basis = ModeBasis.from_paths(["c"])
    ensemble = source_state(DEFAULT, 25.0, basis)
    assert len(ensemble.components) == 1
    weight, state = ensemble.components[0]
    assert weight == pytest.approx(1.0)
    assert state.labeled
    # exchange phase 3 pi: the two ordered terms carry opposite signs
    a = state.amplitudes
    idx_hv = (0, 1)
    idx_vh = (1, 0)
    assert a[idx_hv] == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    assert a[idx_vh] == pytest.approx(-1.0 / math.sqrt(2.0), abs=1e-12)


def test_intermediate_temperature_mixes_both_components():
    basis = ModeBasis.from_paths(["c"])
    ensemble = source_state(DEFAULT, 31.0, basis)
    weights = sorted(w for w, _ in ensemble.components)
    assert weights == pytest.approx([0.4, 0.6])
    labels = {state.labeled for _, state in ensemble.components}
    assert labels == {True, False}


def test_ensemble_validation():
    basis = ModeBasis.from_paths(["c"])
    ensemble = source_state(DEFAULT, 35.1, basis)
    state = ensemble.components[0][1]
    with pytest.raises(ConfigurationError):
        SourceEnsemble((), 10.0)
    with pytest.raises(ConfigurationError):
        SourceEnsemble(((0.5, state),), 10.0)
    with pytest.raises(ConfigurationError):
        SourceEnsemble(((1.0, state),), -1.0)


# ---------------------------------------------------------------------------
# correlation through the full analyzer pipeline


def test_diagonal_correlation_at_every_anchor():
    temps = [t for t, _ in ANCHOR_CORRELATIONS]
    curve = diagonal_correlation_curve(DEFAULT, temps)
    for (t, e), (_, expected) in zip(curve, ANCHOR_CORRELATIONS):
        assert e == pytest.approx(expected, abs=1e-10), f"T={t}"


def test_rectilinear_correlation_is_pinned_at_every_anchor():
    basis_settings = (0.0, 0.0)
    for anchor in DEFAULT.anchors:
        ensemble = source_state(
            DEFAULT, anchor.temperature_c, bell_circuit(0.0, 0.0).basis
        )
        e = _bell_correlation(ensemble, *basis_settings)
        assert e == pytest.approx(-1.0, abs=1e-10), f"T={anchor.temperature_c}"


@pytest.mark.parametrize("weight", [0.0, 0.25, 0.5, 0.75, 1.0])
@pytest.mark.parametrize("phase_steps", range(0, 9))
def test_diagonal_correlation_closed_form(weight, phase_steps):
    """Diagonal correlation of the two-component mixture follows
    ``-(w + (1 - w) cos phi)`` exactly."""
    phase = phase_steps * math.pi / 4.0
    calibration = _single_anchor(phase, weight)
    (_, e), = diagonal_correlation_curve(calibration, [25.0])
    assert e == pytest.approx(-(weight + (1.0 - weight) * math.cos(phase)), abs=1e-10)


def test_opposite_phase_tagged_pair_never_bunches():
    """At exchange phase pi the tagged pair is antisymmetric; the diagonal
    correlation stays +1 however far the calibration is scaled."""
    for rate in (1.0, 1e4):
        calibration = _single_anchor(math.pi, 0.0, rate)
        (_, e), = diagonal_correlation_curve(calibration, [25.0])
        assert e == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# phase-matching bookkeeping


def test_qpm_vacuous_when_fields_missing():
    assert validate_qpm(PhaseMatchingModel())
    assert validate_qpm(PhaseMatchingModel(pump_omega=2.0, signal_omega=1.0))
    # wave numbers without a poling period leave momentum unchecked
    assert validate_qpm(PhaseMatchingModel(pump_k=5.0, signal_k=1.0, idler_k=1.0))


def test_qpm_energy_balance():
    good = PhaseMatchingModel(pump_omega=2.0e15, signal_omega=1.2e15, idler_omega=0.8e15)
    assert validate_qpm(good)
    bad = PhaseMatchingModel(pump_omega=2.0e15, signal_omega=1.2e15, idler_omega=0.9e15)
    assert not validate_qpm(bad)


def test_qpm_momentum_balance_includes_grating():
    period = 46.1e-6
    ks, ki = 9.0e6, 8.5e6
    kp = ks + ki + 2.0 * math.pi / period
    good = PhaseMatchingModel(
        pump_k=kp, signal_k=ks, idler_k=ki, poling_period_m=period
    )
    assert validate_qpm(good)
    bad = PhaseMatchingModel(
        pump_k=kp * (1.0 + 1e-3), signal_k=ks, idler_k=ki, poling_period_m=period
    )
    assert not validate_qpm(bad)
