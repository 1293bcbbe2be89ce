"""End-to-end experiment runners: angle scans, temperature sweeps, and
pair-coalescence scans.

Each runner expands an :class:`ExperimentConfig` into a list of scan
points and produces a :class:`ScanSeries`.  Two execution modes share one
model path:

``mc``
    Sample a click stream per point (seeded per point, so points are
    independent of execution order) and run it through the coincidence
    engine.
``analytic``
    Skip sampling and report expected rates computed from the exact
    outcome distribution: pattern probability times pair rate times the
    efficiencies of the channels involved.  Dark counts appear in the
    expected singles; accidental coincidences, timing jitter, and dead
    time are not modeled in this mode.

Imperfect interference contrast is injected by damping each emitted
pair's channel-pattern distribution toward its setting-independent
average, separately for cross-arm patterns (controlled by the
basis-dependent ``rect``/``diag`` visibilities) and same-arm double
counts (controlled by ``doubles``), leaving the per-class probability
mass intact.  The damped distribution feeds both execution modes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence, TextIO

import numpy as np

from .analytic import VisibilityPair, chsh_from_correlations, effective_visibility
from .circuits import Circuit, bell_circuit, coalescence_circuit, mixture_pair_probabilities
from .engine import (
    AnalysisConfig,
    BELL_CORRELATION_NAMES,
    BELL_PAIRS,
    COALESCENCE_PAIRS,
    CoincidenceReport,
    VisibilityFit,
    count_coincidences,
    fit_fringe,
)
from .errors import (
    CalibrationRangeError,
    ConfigurationError,
    InsufficientDataError,
)
from .source import (
    DEFAULT_BASE_PAIR_RATE,
    SourceCalibration,
    SourceEnsemble,
    source_state,
)
from .timetags import (
    PICOSECONDS_PER_SECOND,
    DetectorModel,
    PairDistribution,
    SimRun,
    TimeTagStream,
    generate_stream,
    read_ttag,
)

__all__ = [
    "SCHEMA_VERSION",
    "EXPERIMENT_KINDS",
    "DEFAULT_CHSH_SETTINGS_DEG",
    "VisibilityModel",
    "bell_damper",
    "ScanGrid",
    "ExperimentConfig",
    "ScanPoint",
    "ScanSeries",
    "run_fixed_scan",
    "run_twin_scan",
    "run_temperature_sweep",
    "run_coalescence_scan",
    "run_experiment",
    "ChshResult",
    "run_chsh",
    "fit_scan_visibility",
    "point_context",
    "simulate_point",
    "analyze_file",
    "write_series_json",
    "write_points_csv",
    "write_series_bins_csv",
]

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("fixed", "twin", "temperature", "coalescence")
EXECUTION_MODES = ("mc", "analytic")

# Analyzer-pair settings (degrees) that maximize the Bell sum for the
# difference-angle correlation: one arm at 0/22.5, the other at 11.25/33.75.
DEFAULT_CHSH_SETTINGS_DEG = (
    (0.0, 11.25),
    (0.0, 33.75),
    (22.5, 11.25),
    (22.5, 33.75),
)

_CROSS_PATTERNS = ((0, 2), (0, 3), (1, 2), (1, 3))
_STATIONS = ((0, 1), (2, 3))
_DIAGONAL_ANGLE = math.pi / 8.0


@dataclass(frozen=True)
class VisibilityModel:
    """Interference-contrast knobs for the two-arm analyzer circuit.

    ``rect`` and ``diag`` damp the cross-arm correlation fringe as seen
    with the first analyzer in the rectilinear (0) or diagonal (22.5 deg)
    basis; in between they blend smoothly.  ``doubles`` damps the same-arm
    double-count fringe.  All default to 1 (ideal contrast).
    """

    rect: float = 1.0
    diag: float = 1.0
    doubles: float = 1.0

    def __post_init__(self) -> None:
        for name in ("rect", "diag", "doubles"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(
                    f"visibility {name}={value!r} outside [0, 1]"
                )

    @property
    def pair(self) -> VisibilityPair:
        return VisibilityPair(v_rect=self.rect, v_diag=self.diag)

    def cross_visibility(self, alpha_rad: float) -> float:
        return effective_visibility(self.pair, alpha_rad)

    @property
    def is_ideal(self) -> bool:
        return self.rect == 1.0 and self.diag == 1.0 and self.doubles == 1.0

    def to_dict(self) -> dict:
        return {"rect": self.rect, "diag": self.diag, "doubles": self.doubles}


def bell_damper(
    vis: VisibilityModel, alpha_rad: float
) -> Callable[[PairDistribution], PairDistribution] | None:
    """Pattern-distribution damper for the two-arm analyzer circuit.

    Cross-arm patterns are pulled toward their uniform share of the
    cross-arm mass; each arm's double-count pattern is pulled toward half
    of that arm's mass, with the complement moved onto the arm's
    single-channel patterns (proportionally, or evenly when those carry
    no mass).  Class masses are angle independent, so total probability
    is conserved and the effect is purely a fringe-contrast reduction.
    Returns ``None`` when the model is ideal.
    """
    if vis.is_ideal:
        return None
    v_cross = vis.cross_visibility(alpha_rad)
    v_doubles = vis.doubles

    def damp(pairs: PairDistribution) -> PairDistribution:
        out = dict(pairs)
        cross_mass = sum(pairs.get(p, 0.0) for p in _CROSS_PATTERNS)
        for p in _CROSS_PATTERNS:
            out[p] = v_cross * pairs.get(p, 0.0) + (1.0 - v_cross) * cross_mass / 4.0
        for low, high in _STATIONS:
            split = (low, high)
            bunched = ((low, low), (high, high))
            split_p = pairs.get(split, 0.0)
            mass = split_p + sum(pairs.get(b, 0.0) for b in bunched)
            damped = v_doubles * split_p + (1.0 - v_doubles) * mass / 2.0
            moved = split_p - damped
            out[split] = damped
            bunch_mass = sum(pairs.get(b, 0.0) for b in bunched)
            if bunch_mass > 1e-15:
                for b in bunched:
                    out[b] = pairs.get(b, 0.0) * (1.0 + moved / bunch_mass)
            else:
                for b in bunched:
                    out[b] = pairs.get(b, 0.0) + moved / 2.0
        return out

    return damp


@dataclass(frozen=True)
class ScanGrid:
    """Strictly increasing scan settings (degrees, or degrees Celsius)."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ConfigurationError("scan grid is empty")
        arr = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError("scan grid contains non-finite values")
        if arr.size > 1 and not np.all(np.diff(arr) > 0.0):
            raise ConfigurationError("scan grid must be strictly increasing")
        object.__setattr__(self, "values", tuple(float(v) for v in arr))

    @classmethod
    def linear(cls, start: float, stop: float, points: int) -> "ScanGrid":
        if points < 1:
            raise ConfigurationError(f"scan needs at least 1 point, got {points}")
        if points == 1:
            return cls((float(start),))
        return cls(tuple(np.linspace(float(start), float(stop), int(points))))

    @classmethod
    def from_config(cls, obj) -> "ScanGrid":
        if isinstance(obj, (list, tuple)):
            return cls(tuple(float(v) for v in obj))
        if isinstance(obj, Mapping):
            keys = set(obj)
            if keys == {"values"}:
                return cls(tuple(float(v) for v in obj["values"]))
            if keys == {"start", "stop", "points"}:
                return cls.linear(obj["start"], obj["stop"], int(obj["points"]))
            raise ConfigurationError(
                "scan must have keys {start, stop, points} or {values}, "
                f"got {sorted(keys)}"
            )
        raise ConfigurationError(f"cannot interpret scan grid from {type(obj).__name__}")

    def to_dict(self) -> dict:
        return {"values": list(self.values)}

    def __len__(self) -> int:
        return len(self.values)


_TOP_LEVEL_KEYS = {
    "schema_version",
    "kind",
    "mode",
    "seed",
    "duration_s",
    "temperature_c",
    "alpha_deg",
    "scan",
    "base_pair_rate",
    "pair_rate",
    "window_ps",
    "bin_ps",
    "offsets_ps",
    "detectors",
    "visibility",
    "hwp_convention",
    "waveplate",
}
_DETECTOR_KEYS = {"efficiency", "dark_rate", "jitter_sigma_ps", "dead_time_ps"}


def _parse_detectors(obj):
    if obj is None:
        return DetectorModel()
    if obj == "noiseless":
        return DetectorModel.noiseless()
    if isinstance(obj, Mapping):
        extra = set(obj) - _DETECTOR_KEYS
        if extra:
            raise ConfigurationError(f"unknown detector keys {sorted(extra)}")
        return DetectorModel(**obj)
    if isinstance(obj, Sequence):
        return tuple(_parse_detectors(entry) for entry in obj)
    raise ConfigurationError(f"cannot interpret detectors from {type(obj).__name__}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to run one experiment series.

    ``scan`` holds the swept setting: analyzer angle in degrees for
    ``fixed`` (second arm), ``twin``, and ``coalescence`` scans, crystal
    temperature in Celsius for ``temperature`` sweeps.  ``pair_rate``
    overrides the calibration-curve emission rate when set;
    ``base_pair_rate`` scales that curve.
    """

    kind: str
    scan: ScanGrid
    mode: str = "mc"
    seed: int = 0
    duration_s: float = 1.0
    temperature_c: float = 35.1
    alpha_deg: float = 0.0
    base_pair_rate: float = DEFAULT_BASE_PAIR_RATE
    pair_rate: float | None = None
    window_ps: int = 2000
    bin_ps: int = PICOSECONDS_PER_SECOND
    offsets_ps: tuple[int, ...] | None = None
    detectors: "DetectorModel | tuple[DetectorModel, ...]" = field(
        default_factory=DetectorModel
    )
    visibility: VisibilityModel = field(default_factory=VisibilityModel)
    hwp_convention: str = "rotation"
    waveplate: str = "hwp"

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigurationError(
                f"unknown experiment kind {self.kind!r}; expected one of "
                f"{EXPERIMENT_KINDS}"
            )
        if self.mode not in EXECUTION_MODES:
            raise ConfigurationError(
                f"unknown mode {self.mode!r}; expected one of {EXECUTION_MODES}"
            )
        if self.duration_s <= 0.0:
            raise ConfigurationError(f"duration {self.duration_s!r} must be positive")
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        if self.base_pair_rate < 0.0 or (
            self.pair_rate is not None and self.pair_rate < 0.0
        ):
            raise ConfigurationError("pair rates must be nonnegative")
        if self.offsets_ps is not None:
            object.__setattr__(
                self, "offsets_ps", tuple(int(v) for v in self.offsets_ps)
            )

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ExperimentConfig":
        if not isinstance(raw, Mapping):
            raise ConfigurationError("experiment config must be a JSON object")
        extra = set(raw) - _TOP_LEVEL_KEYS
        if extra:
            raise ConfigurationError(f"unknown config keys {sorted(extra)}")
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigurationError(
                f"unsupported schema_version {version!r}; this build reads "
                f"version {SCHEMA_VERSION}"
            )
        for required in ("kind", "scan"):
            if required not in raw:
                raise ConfigurationError(f"config is missing {required!r}")
        vis_raw = raw.get("visibility") or {}
        extra = set(vis_raw) - {"rect", "diag", "doubles"}
        if extra:
            raise ConfigurationError(f"unknown visibility keys {sorted(extra)}")
        kwargs = dict(
            kind=raw["kind"],
            scan=ScanGrid.from_config(raw["scan"]),
            detectors=_parse_detectors(raw.get("detectors")),
            visibility=VisibilityModel(**vis_raw),
        )
        for key in (
            "mode",
            "seed",
            "duration_s",
            "temperature_c",
            "alpha_deg",
            "base_pair_rate",
            "pair_rate",
            "window_ps",
            "bin_ps",
            "hwp_convention",
            "waveplate",
        ):
            if key in raw:
                kwargs[key] = raw[key]
        if raw.get("offsets_ps") is not None:
            kwargs["offsets_ps"] = tuple(int(v) for v in raw["offsets_ps"])
        return cls(**kwargs)

    @classmethod
    def from_json_file(cls, path: "str | Path") -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        if isinstance(self.detectors, DetectorModel):
            det = {k: getattr(self.detectors, k) for k in sorted(_DETECTOR_KEYS)}
        else:
            det = [
                {k: getattr(d, k) for k in sorted(_DETECTOR_KEYS)}
                for d in self.detectors
            ]
        out = {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "mode": self.mode,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "temperature_c": self.temperature_c,
            "alpha_deg": self.alpha_deg,
            "scan": self.scan.to_dict(),
            "base_pair_rate": self.base_pair_rate,
            "pair_rate": self.pair_rate,
            "window_ps": self.window_ps,
            "bin_ps": self.bin_ps,
            "offsets_ps": list(self.offsets_ps) if self.offsets_ps else None,
            "detectors": det,
            "visibility": self.visibility.to_dict(),
            "hwp_convention": self.hwp_convention,
            "waveplate": self.waveplate,
        }
        return out

    def analysis(self, pairs: Mapping[str, tuple[int, int]]) -> AnalysisConfig:
        return AnalysisConfig(
            window_ps=self.window_ps,
            bin_ps=self.bin_ps,
            offsets_ps=self.offsets_ps,
            pairs=pairs,
        )

    def resolved_detectors(self, channel_count: int) -> tuple[DetectorModel, ...]:
        if isinstance(self.detectors, DetectorModel):
            return (self.detectors,) * channel_count
        if len(self.detectors) != channel_count:
            raise ConfigurationError(
                f"{len(self.detectors)} detectors configured but the circuit "
                f"has {channel_count} channels"
            )
        return tuple(self.detectors)


@dataclass(frozen=True)
class ScanPoint:
    """Result of one scan setting."""

    index: int
    setting: dict[str, float]
    seed: int | None
    duration_s: float
    singles_rates: tuple[float, ...]
    rates: dict[str, float]
    totals: dict[str, float]
    correlation: float | None
    error: str | None = None

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "setting": dict(self.setting),
            "seed": self.seed,
            "duration_s": self.duration_s,
            "singles_rates": list(self.singles_rates),
            "rates": dict(self.rates),
            "totals": dict(self.totals),
        }
        if self.correlation is not None:
            out["correlation"] = self.correlation
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass
class ScanSeries:
    """An ordered collection of scan points plus their engine reports."""

    kind: str
    mode: str
    config: ExperimentConfig
    points: list[ScanPoint]
    reports: list[CoincidenceReport | None]

    @property
    def pair_names(self) -> tuple[str, ...]:
        for point in self.points:
            if point.rates:
                return tuple(point.rates)
        return ()

    def settings(self, key: str) -> np.ndarray:
        return np.array([p.setting[key] for p in self.points])

    def rates_of(self, name: str) -> np.ndarray:
        return np.array(
            [p.rates.get(name, math.nan) for p in self.points]
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "mode": self.mode,
            "config": self.config.to_dict(),
            "points": [p.to_dict() for p in self.points],
        }


def _derive_point_seed(seed: int, index: int) -> int:
    """Stable per-point stream seed, independent of scheduling order."""
    return int(
        np.random.SeedSequence((seed, index)).generate_state(1, np.uint64)[0]
    )


def _resolved_rate(cfg: ExperimentConfig, ensemble: SourceEnsemble) -> float:
    return cfg.pair_rate if cfg.pair_rate is not None else ensemble.pair_rate


def _click_expectation(pattern: tuple[int, int], channel: int, eff: float) -> float:
    i, j = pattern
    if i == j == channel:
        return 1.0 - (1.0 - eff) ** 2
    if channel in (i, j):
        return eff
    return 0.0


def _expected_point(
    cfg: ExperimentConfig,
    index: int,
    setting: dict[str, float],
    ensemble: SourceEnsemble,
    circuit: Circuit,
    damper,
    pair_names: Mapping[str, tuple[int, int]],
    correlate: bool,
) -> ScanPoint:
    patterns = mixture_pair_probabilities(ensemble.components, circuit)
    if damper is not None:
        patterns = damper(patterns)
    detectors = cfg.resolved_detectors(circuit.channel_count)
    rate = _resolved_rate(cfg, ensemble)
    rates = {
        name: rate
        * patterns.get((min(i, j), max(i, j)), 0.0)
        * detectors[i].efficiency
        * detectors[j].efficiency
        for name, (i, j) in pair_names.items()
    }
    singles = tuple(
        rate
        * sum(
            p * _click_expectation(pattern, c, detectors[c].efficiency)
            for pattern, p in patterns.items()
        )
        + detectors[c].dark_rate
        for c in range(circuit.channel_count)
    )
    correlation = None
    if correlate:
        quad = [rates[name] for name in BELL_CORRELATION_NAMES]
        total = sum(quad)
        if total > 0.0:
            correlation = (quad[0] + quad[3] - quad[1] - quad[2]) / total
    return ScanPoint(
        index=index,
        setting=setting,
        seed=None,
        duration_s=cfg.duration_s,
        singles_rates=singles,
        rates=rates,
        totals={name: r * cfg.duration_s for name, r in rates.items()},
        correlation=correlation,
        error=None,
    )


def _sampled_point(
    cfg: ExperimentConfig,
    index: int,
    setting: dict[str, float],
    ensemble: SourceEnsemble,
    circuit: Circuit,
    damper,
    pair_names: Mapping[str, tuple[int, int]],
    correlate: bool,
) -> tuple[ScanPoint, CoincidenceReport, TimeTagStream]:
    stream = simulate_point(cfg, index, ensemble, circuit, damper)
    report = count_coincidences(stream, cfg.analysis(pair_names))
    duration = report.duration_s if report.n_bins else cfg.duration_s
    rates = {
        name: (report.pair_total(name) / duration if duration > 0.0 else 0.0)
        for name in pair_names
    }
    singles = tuple(
        float(v) / duration if duration > 0.0 else 0.0
        for v in report.singles_totals
    )
    point = ScanPoint(
        index=index,
        setting=setting,
        seed=_derive_point_seed(cfg.seed, index),
        duration_s=cfg.duration_s,
        singles_rates=singles,
        rates=rates,
        totals={name: report.pair_total(name) for name in pair_names},
        correlation=report.correlation() if correlate else None,
        error=None,
    )
    return point, report, stream


def simulate_point(
    cfg: ExperimentConfig,
    index: int,
    ensemble: SourceEnsemble,
    circuit: Circuit,
    damper=None,
) -> TimeTagStream:
    """Generate the click stream scan point ``index`` would analyze."""
    run = SimRun(
        duration_s=cfg.duration_s,
        seed=_derive_point_seed(cfg.seed, index),
        pair_rate=_resolved_rate(cfg, ensemble),
        channel_map=circuit.channel_map,
    )
    detectors = cfg.resolved_detectors(circuit.channel_count)
    return generate_stream(ensemble, circuit.unitary, run, detectors, damper)


def _error_point(
    cfg: ExperimentConfig, index: int, setting: dict[str, float], message: str
) -> ScanPoint:
    return ScanPoint(
        index=index,
        setting=setting,
        seed=None,
        duration_s=cfg.duration_s,
        singles_rates=(),
        rates={},
        totals={},
        correlation=None,
        error=message,
    )


def _run_bell_series(
    cfg: ExperimentConfig,
    calibration: SourceCalibration | None,
    settings: Sequence[tuple[int, dict[str, float], float, float]],
    kind: str,
    catch_range_errors: bool = False,
) -> ScanSeries:
    """Shared driver: each entry is (index, setting, alpha_rad, beta_rad)."""
    calibration = calibration or SourceCalibration.default(cfg.base_pair_rate)
    points: list[ScanPoint] = []
    reports: list[CoincidenceReport | None] = []
    for index, setting, alpha_rad, beta_rad in settings:
        temperature = setting.get("temperature_c", cfg.temperature_c)
        circuit = bell_circuit(alpha_rad, beta_rad, cfg.hwp_convention)
        try:
            ensemble = source_state(calibration, temperature, circuit.basis)
        except CalibrationRangeError as exc:
            if not catch_range_errors:
                raise
            points.append(_error_point(cfg, index, setting, str(exc)))
            reports.append(None)
            continue
        damper = bell_damper(cfg.visibility, alpha_rad)
        if cfg.mode == "analytic":
            points.append(
                _expected_point(
                    cfg, index, setting, ensemble, circuit, damper, BELL_PAIRS, True
                )
            )
            reports.append(None)
        else:
            point, report, _ = _sampled_point(
                cfg, index, setting, ensemble, circuit, damper, BELL_PAIRS, True
            )
            points.append(point)
            reports.append(report)
    return ScanSeries(kind=kind, mode=cfg.mode, config=cfg, points=points, reports=reports)


def _require_kind(cfg: ExperimentConfig, kind: str) -> None:
    if cfg.kind != kind:
        raise ConfigurationError(
            f"config kind {cfg.kind!r} does not match requested {kind!r} run"
        )


def _bell_settings(
    cfg: ExperimentConfig,
) -> list[tuple[int, dict[str, float], float, float]]:
    if cfg.kind == "fixed":
        alpha = math.radians(cfg.alpha_deg)
        return [
            (
                i,
                {"alpha_deg": cfg.alpha_deg, "beta_deg": beta_deg},
                alpha,
                math.radians(beta_deg),
            )
            for i, beta_deg in enumerate(cfg.scan.values)
        ]
    if cfg.kind == "twin":
        return [
            (
                i,
                {"theta_deg": theta_deg},
                math.radians(theta_deg),
                math.radians(theta_deg),
            )
            for i, theta_deg in enumerate(cfg.scan.values)
        ]
    if cfg.kind == "temperature":
        return [
            (i, {"temperature_c": temperature}, _DIAGONAL_ANGLE, _DIAGONAL_ANGLE)
            for i, temperature in enumerate(cfg.scan.values)
        ]
    raise ConfigurationError(f"{cfg.kind!r} is not a two-arm analyzer experiment")


def run_fixed_scan(
    cfg: ExperimentConfig, calibration: SourceCalibration | None = None
) -> ScanSeries:
    """Hold the first analyzer at ``alpha_deg``; sweep the second."""
    _require_kind(cfg, "fixed")
    return _run_bell_series(cfg, calibration, _bell_settings(cfg), "fixed")


def run_twin_scan(
    cfg: ExperimentConfig, calibration: SourceCalibration | None = None
) -> ScanSeries:
    """Rotate both analyzers together; doubles fringes live here."""
    _require_kind(cfg, "twin")
    return _run_bell_series(cfg, calibration, _bell_settings(cfg), "twin")


def run_temperature_sweep(
    cfg: ExperimentConfig, calibration: SourceCalibration | None = None
) -> ScanSeries:
    """Sweep crystal temperature with both analyzers at 22.5 degrees.

    Points whose temperature falls outside the calibrated range are kept
    in the series with an ``error`` note instead of aborting the sweep.
    """
    _require_kind(cfg, "temperature")
    return _run_bell_series(
        cfg, calibration, _bell_settings(cfg), "temperature", catch_range_errors=True
    )


def point_context(
    cfg: ExperimentConfig,
    index: int,
    calibration: SourceCalibration | None = None,
) -> tuple[dict[str, float], SourceEnsemble, Circuit, object]:
    """Setting, source ensemble, circuit, and damper for one scan point.

    This is what :func:`simulate_point` and the scan runners agree on, so
    a stream simulated here analyzes to the matching scan point.
    """
    calibration = calibration or SourceCalibration.default(cfg.base_pair_rate)
    if not 0 <= index < len(cfg.scan):
        raise ConfigurationError(
            f"point index {index} outside the {len(cfg.scan)}-point scan"
        )
    if cfg.kind == "coalescence":
        theta_deg = cfg.scan.values[index]
        setting = {"theta_deg": theta_deg}
        circuit = coalescence_circuit(math.radians(theta_deg), cfg.waveplate)
        damper = None
        temperature = cfg.temperature_c
    else:
        _, setting, alpha_rad, beta_rad = _bell_settings(cfg)[index]
        circuit = bell_circuit(alpha_rad, beta_rad, cfg.hwp_convention)
        damper = bell_damper(cfg.visibility, alpha_rad)
        temperature = setting.get("temperature_c", cfg.temperature_c)
    ensemble = source_state(calibration, temperature, circuit.basis)
    return setting, ensemble, circuit, damper


def run_coalescence_scan(
    cfg: ExperimentConfig, calibration: SourceCalibration | None = None
) -> ScanSeries:
    """Sweep the single-arm waveplate in front of the splitter stack."""
    _require_kind(cfg, "coalescence")
    calibration = calibration or SourceCalibration.default(cfg.base_pair_rate)
    points: list[ScanPoint] = []
    reports: list[CoincidenceReport | None] = []
    for index, theta_deg in enumerate(cfg.scan.values):
        setting = {"theta_deg": theta_deg}
        circuit = coalescence_circuit(math.radians(theta_deg), cfg.waveplate)
        ensemble = source_state(calibration, cfg.temperature_c, circuit.basis)
        if cfg.mode == "analytic":
            points.append(
                _expected_point(
                    cfg, index, setting, ensemble, circuit, None,
                    COALESCENCE_PAIRS, False,
                )
            )
            reports.append(None)
        else:
            point, report, _ = _sampled_point(
                cfg, index, setting, ensemble, circuit, None,
                COALESCENCE_PAIRS, False,
            )
            points.append(point)
            reports.append(report)
    return ScanSeries(
        kind="coalescence", mode=cfg.mode, config=cfg, points=points, reports=reports
    )


_RUNNERS = {
    "fixed": run_fixed_scan,
    "twin": run_twin_scan,
    "temperature": run_temperature_sweep,
    "coalescence": run_coalescence_scan,
}


def run_experiment(
    cfg: ExperimentConfig, calibration: SourceCalibration | None = None
) -> ScanSeries:
    """Dispatch to the runner matching ``cfg.kind``."""
    return _RUNNERS[cfg.kind](cfg, calibration)


@dataclass(frozen=True)
class ChshResult:
    """Bell-sum evaluation at four analyzer setting pairs."""

    settings_deg: tuple[tuple[float, float], ...]
    correlations: tuple[float, ...]
    s_value: float
    mode: str


def run_chsh(
    cfg: ExperimentConfig,
    settings_deg: Sequence[tuple[float, float]] = DEFAULT_CHSH_SETTINGS_DEG,
    calibration: SourceCalibration | None = None,
) -> ChshResult:
    """Measure E at four setting pairs and form the Bell sum.

    Uses ``cfg`` for everything but the scan grid; each setting pair gets
    its own derived seed.  Raises
    :class:`~biphoton.errors.InsufficientDataError` if any setting yields
    no cross coincidences.
    """
    if len(settings_deg) != 4:
        raise ConfigurationError(
            f"expected 4 analyzer setting pairs, got {len(settings_deg)}"
        )
    settings = [
        (
            i,
            {"alpha_deg": float(a), "beta_deg": float(b)},
            math.radians(a),
            math.radians(b),
        )
        for i, (a, b) in enumerate(settings_deg)
    ]
    series = _run_bell_series(cfg, calibration, settings, "chsh")
    correlations = []
    for point in series.points:
        if point.correlation is None:
            raise InsufficientDataError(
                "no cross coincidences at analyzer setting "
                f"{point.setting['alpha_deg']}/{point.setting['beta_deg']} deg"
            )
        correlations.append(point.correlation)
    lookup = {
        (math.radians(a), math.radians(b)): e
        for (a, b), e in zip(settings_deg, correlations)
    }
    s_value = chsh_from_correlations(
        lambda a, b: lookup[(a, b)], tuple(lookup)
    )
    return ChshResult(
        settings_deg=tuple((float(a), float(b)) for a, b in settings_deg),
        correlations=tuple(correlations),
        s_value=s_value,
        mode=cfg.mode,
    )


def fit_scan_visibility(
    series: ScanSeries,
    pair_name: str = "r_pm",
    harmonic: int | None = None,
) -> VisibilityFit:
    """Fit the fringe of one rate column against the swept angle.

    The harmonic defaults to 8 for double-count columns and 4 otherwise.
    Error points are skipped; temperature sweeps have no angle axis and
    are rejected.
    """
    if series.kind == "temperature":
        raise ConfigurationError("temperature sweeps have no angle to fit against")
    if harmonic is None:
        harmonic = 8 if pair_name.startswith("doubles") else 4
    key = "beta_deg" if series.kind == "fixed" else "theta_deg"
    angles = []
    rates = []
    for point in series.points:
        if point.error is not None or pair_name not in point.rates:
            continue
        angles.append(math.radians(point.setting[key]))
        rates.append(point.rates[pair_name])
    return fit_fringe(angles, rates, harmonic=harmonic)


def analyze_file(
    path: "str | Path", config: AnalysisConfig | None = None
) -> CoincidenceReport:
    """Count coincidences in a stored stream file."""
    return count_coincidences(read_ttag(path), config)


def write_series_json(series: ScanSeries, dest: "str | Path | TextIO") -> None:
    """Write the series summary (config plus one object per point)."""
    payload = json.dumps(series.to_dict(), indent=2, sort_keys=False)
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(payload + "\n")
    else:
        dest.write(payload + "\n")


def write_points_csv(series: ScanSeries, dest: "str | Path | TextIO") -> None:
    """Write one CSV row per scan point, in scan order.

    Columns: index, the setting keys, seed, duration, per-channel singles
    rates, one rate and one total column per named pair, correlation
    (blank where undefined), error (blank where none).
    """
    import csv as _csv

    setting_keys = list(series.points[0].setting) if series.points else []
    pair_names = list(series.pair_names)
    n_singles = max((len(p.singles_rates) for p in series.points), default=0)
    header = (
        ["index"]
        + setting_keys
        + ["seed", "duration_s"]
        + [f"singles_c{c}" for c in range(n_singles)]
        + [f"rate_{name}" for name in pair_names]
        + [f"total_{name}" for name in pair_names]
        + ["correlation", "error"]
    )

    def _emit(fh) -> None:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for p in series.points:
            row = [str(p.index)]
            row += [f"{p.setting[k]:.10g}" for k in setting_keys]
            row += ["" if p.seed is None else str(p.seed), f"{p.duration_s:.10g}"]
            row += [
                f"{p.singles_rates[c]:.10g}" if c < len(p.singles_rates) else ""
                for c in range(n_singles)
            ]
            row += [
                f"{p.rates[name]:.10g}" if name in p.rates else ""
                for name in pair_names
            ]
            row += [
                f"{p.totals[name]:.10g}" if name in p.totals else ""
                for name in pair_names
            ]
            row.append("" if p.correlation is None else f"{p.correlation:.10g}")
            row.append(p.error or "")
            writer.writerow(row)

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _emit(fh)
    else:
        _emit(dest)


def write_series_bins_csv(series: ScanSeries, dest: "str | Path | TextIO") -> bool:
    """Write every point's per-bin counts, prefixed by the point index.

    Returns False (writing nothing) when the series carries no engine
    reports, as in analytic mode.
    """
    import csv as _csv

    indexed = [
        (point.index, report)
        for point, report in zip(series.points, series.reports)
        if report is not None
    ]
    if not indexed:
        return False
    first = indexed[0][1]
    pair_names = list(first.pairs)
    header = (
        ["point_index", "bin_index", "time_s"]
        + [f"singles_c{c}" for c in range(first.channel_count)]
        + pair_names
    )

    def _emit(fh) -> None:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for point_index, report in indexed:
            edges = report.bin_left_edges_s
            for k in range(report.n_bins):
                row = [str(point_index), str(report.bin_start + k), f"{edges[k]:.6f}"]
                row += [
                    f"{report.singles[c, k]:.10g}"
                    for c in range(report.channel_count)
                ]
                row += [f"{report.pairs[name][k]:.10g}" for name in pair_names]
                writer.writerow(row)

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _emit(fh)
    else:
        _emit(dest)
    return True
