"""Crystal-temperature calibration of the collinear pair source.

A type-II downconversion source emits one horizontally and one vertically
polarized photon into a common path.  How the pair behaves under exchange
depends on the spectral overlap of the two photons, which tracks the crystal
temperature.  The model reduces this to a two-component mixture per
temperature:

* with weight ``degeneracy_weight`` the photons are spectrally identical and
  the state is the plain symmetric pair ``a_H^dag a_V^dag |0>``;
* with weight ``1 - degeneracy_weight`` the photons are distinguishable by a
  hidden spectral label and the state is
  ``(|H>_+ |V>_- + e^{i phi} |V>_+ |H>_-) / sqrt(2)`` with the exchange
  phase ``phi`` set by the calibration.

At a diagonal analyzer setting the correlation of the mixture is
``E = -(w + (1 - w) cos phi)``, so sweeping ``phi`` with temperature makes
``E`` oscillate between the extremes while the rectilinear correlation stays
pinned at -1.  Calibration anchors store the *unwrapped* phase so that
piecewise-linear interpolation advances it monotonically through the sweep.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuits import SOURCE_PATH, bell_circuit, mixture_pair_probabilities
from .errors import CalibrationRangeError, ConfigurationError
from .quantum import Mode, ModeBasis, TwoPhotonState, make_pair_state, superpose

__all__ = [
    "CalibrationAnchor",
    "SourceCalibration",
    "SourceEnsemble",
    "PhaseMatchingModel",
    "source_state",
    "diagonal_correlation_curve",
    "validate_qpm",
    "DEFAULT_BASE_PAIR_RATE",
]

DEFAULT_BASE_PAIR_RATE = 2.0e4  # emitted pairs per second at the optimal point

# (temperature C, unwrapped exchange phase, degeneracy weight, relative rate).
# The phase advances by pi every ~1.6-1.8 C below the optimum, which makes the
# diagonal correlation swing between its sign extremes; the degeneracy weight
# collapses quickly once the photons detune, and the emitted-pair rate falls
# by roughly thirtyfold across the range.
_DEFAULT_ANCHORS = (
    (21.8, 5.0 * math.pi, 0.00, 0.03),
    (23.4, 4.0 * math.pi, 0.00, 0.04),
    (25.0, 3.0 * math.pi, 0.00, 0.05),
    (26.8, 2.0 * math.pi, 0.00, 0.07),
    (28.6, 1.0 * math.pi, 0.05, 0.10),
    (31.0, 0.5 * math.pi, 0.40, 0.35),
    (35.1, 0.0, 1.00, 1.00),
)


@dataclass(frozen=True)
class CalibrationAnchor:
    """Source behavior pinned at one crystal temperature."""

    temperature_c: float
    exchange_phase: float
    degeneracy_weight: float
    pair_rate: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.degeneracy_weight <= 1.0:
            raise ConfigurationError(
                f"degeneracy weight {self.degeneracy_weight!r} outside [0, 1]"
            )
        if self.pair_rate < 0.0:
            raise ConfigurationError(f"negative pair rate {self.pair_rate!r}")


class SourceCalibration:
    """Piecewise-linear interpolation between temperature anchors."""

    def __init__(self, anchors: Sequence[CalibrationAnchor]):
        anchors = tuple(anchors)
        if not anchors:
            raise ConfigurationError("calibration needs at least one anchor")
        temps = [a.temperature_c for a in anchors]
        if any(t2 <= t1 for t1, t2 in zip(temps, temps[1:])):
            raise ConfigurationError(
                "calibration anchor temperatures must be strictly increasing"
            )
        self.anchors = anchors
        self._temps = np.array(temps)
        self._phases = np.array([a.exchange_phase for a in anchors])
        self._weights = np.array([a.degeneracy_weight for a in anchors])
        self._rates = np.array([a.pair_rate for a in anchors])

    @classmethod
    def default(
        cls, base_pair_rate: float = DEFAULT_BASE_PAIR_RATE
    ) -> "SourceCalibration":
        return cls(
            CalibrationAnchor(t, phi, w, rel * base_pair_rate)
            for t, phi, w, rel in _DEFAULT_ANCHORS
        )

    @property
    def temperature_range(self) -> tuple[float, float]:
        return float(self._temps[0]), float(self._temps[-1])

    def interpolate(self, temperature_c: float) -> tuple[float, float, float]:
        """``(exchange_phase, degeneracy_weight, pair_rate)`` at a temperature."""
        lo, hi = self.temperature_range
        if not lo <= temperature_c <= hi:
            raise CalibrationRangeError(
                f"temperature {temperature_c} C outside calibrated range "
                f"[{lo}, {hi}] C"
            )
        t = float(temperature_c)
        return (
            float(np.interp(t, self._temps, self._phases)),
            float(np.interp(t, self._temps, self._weights)),
            float(np.interp(t, self._temps, self._rates)),
        )


@dataclass(frozen=True)
class SourceEnsemble:
    """Statistical mixture the source emits, plus its emitted-pair rate."""

    components: tuple[tuple[float, TwoPhotonState], ...]
    pair_rate: float

    def __post_init__(self) -> None:
        if not self.components:
            raise ConfigurationError("source ensemble has no components")
        total = sum(w for w, _ in self.components)
        if any(w < 0.0 for w, _ in self.components) or abs(total - 1.0) > 1e-12:
            raise ConfigurationError(
                f"component weights must be nonnegative and sum to 1, got {total!r}"
            )
        if self.pair_rate < 0.0:
            raise ConfigurationError(f"negative pair rate {self.pair_rate!r}")


def source_state(
    calibration: SourceCalibration,
    temperature_c: float,
    basis: ModeBasis,
    path: str = SOURCE_PATH,
) -> SourceEnsemble:
    """Emitted two-photon mixture at a crystal temperature, on ``basis``."""
    phase, weight, rate = calibration.interpolate(temperature_c)
    h, v = Mode(path, "H"), Mode(path, "V")
    components: list[tuple[float, TwoPhotonState]] = []
    if weight > 0.0:
        components.append((weight, make_pair_state(basis, h, v, labeled=False)))
    if weight < 1.0:
        hv = make_pair_state(basis, h, v, labeled=True)
        vh = make_pair_state(basis, v, h, labeled=True)
        detuned = superpose([(1.0, hv), (cmath.exp(1j * phase), vh)])
        components.append((1.0 - weight, detuned))
    return SourceEnsemble(tuple(components), rate)


def diagonal_correlation_curve(
    calibration: SourceCalibration, temperatures: Sequence[float]
) -> list[tuple[float, float]]:
    """Correlation at diagonal analyzer settings for each temperature.

    Runs the full pipeline — source mixture, splitter, half-wave plates at
    22.5 degrees on both arms, polarizing splitters — and forms the
    correlation from the four cross-arm click probabilities.
    """
    circuit = bell_circuit(math.pi / 8.0, math.pi / 8.0)
    curve: list[tuple[float, float]] = []
    for t in temperatures:
        ensemble = source_state(calibration, t, circuit.basis)
        pairs = mixture_pair_probabilities(ensemble.components, circuit)
        pp = pairs.get((0, 2), 0.0)
        pm = pairs.get((0, 3), 0.0)
        mp = pairs.get((1, 2), 0.0)
        mm = pairs.get((1, 3), 0.0)
        curve.append((float(t), (pp + mm - pm - mp) / (pp + mm + pm + mp)))
    return curve


@dataclass(frozen=True)
class PhaseMatchingModel:
    """Energy and momentum bookkeeping for the downconversion process.

    Angular frequencies are in rad/s and wave numbers in rad/m; any field
    may be left ``None`` when unknown.  ``poling_period_m`` is the grating
    period whose ``2 pi / period`` contribution closes the momentum balance.
    """

    pump_omega: float | None = None
    signal_omega: float | None = None
    idler_omega: float | None = None
    pump_k: float | None = None
    signal_k: float | None = None
    idler_k: float | None = None
    poling_period_m: float | None = None


def validate_qpm(model: PhaseMatchingModel) -> bool:
    """Check energy conservation and, when wave numbers are given, momentum.

    Energy: ``pump_omega = signal_omega + idler_omega`` within 1e-9
    relative.  Momentum (only checked when all three wave numbers and the
    poling period are provided): ``pump_k = signal_k + idler_k +
    2 pi / period`` within 1e-6 relative.  Missing fields make the
    corresponding check vacuous.
    """
    omegas = (model.pump_omega, model.signal_omega, model.idler_omega)
    if all(w is not None for w in omegas):
        wp, ws, wi = omegas
        if abs(wp - (ws + wi)) > 1e-9 * abs(wp):
            return False
    ks = (model.pump_k, model.signal_k, model.idler_k)
    if all(k is not None for k in ks) and model.poling_period_m is not None:
        kp, k_s, k_i = ks
        target = k_s + k_i + 2.0 * math.pi / model.poling_period_m
        if abs(kp - target) > 1e-6 * abs(kp):
            return False
    return True
