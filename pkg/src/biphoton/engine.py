"""Coincidence counting and fringe fitting on time-tag streams.

Two clicks on different channels coincide when their offset-corrected
timestamps differ by at most half the full coincidence window:
``|(t_i + o_i) - (t_j + o_j)| <= window_ps // 2``.  Every qualifying pair
of clicks is counted (no pruning after a match), and each counted pair is
attributed to the time bin of its earlier offset-corrected click (a tied
pair lands in the shared bin).  Singles are binned the same way.

Counting runs as a compiled two-pointer sweep over the time-sorted record
array when numba is installed (work proportional to records plus matches,
well past ten million records per second).  Without numba, a vectorized
fallback does the same job with binary searches and per-channel cumulative
counts at a few million records per second; both routes produce identical
counts and are exercised against the same brute-force reference.

Counts are kept as float arrays so that reports built from expected values
(rather than sampled clicks) flow through the same code paths.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InsufficientDataError
from .timetags import PICOSECONDS_PER_SECOND, TimeTagStream

try:  # pragma: no cover - exercised indirectly via the kernel dispatch
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

__all__ = [
    "BELL_PAIRS",
    "BELL_CORRELATION_NAMES",
    "COALESCENCE_PAIRS",
    "MIN_FRINGE_POINTS",
    "AnalysisConfig",
    "CoincidenceReport",
    "count_coincidences",
    "VisibilityFit",
    "fit_fringe",
    "write_bins_csv",
]

# Channel-pair names for the four-detector polarization correlation setup:
# channels 0/1 are the +/- analyzer outputs at station A, channels 2/3 the
# same at station B.  Cross pairs carry the correlation fringe; the
# doubles pairs count both photons surfacing at one station.
BELL_PAIRS: dict[str, tuple[int, int]] = {
    "r_pp": (0, 2),
    "r_pm": (0, 3),
    "r_mp": (1, 2),
    "r_mm": (1, 3),
    "doubles_a": (0, 1),
    "doubles_b": (2, 3),
}
BELL_CORRELATION_NAMES = ("r_pp", "r_pm", "r_mp", "r_mm")

# Channel-pair names for the three-detector coalescence setup: channels
# 0/1 watch the two splitter outputs fed by one polarizer port, channel 2
# the other polarizer port.
COALESCENCE_PAIRS: dict[str, tuple[int, int]] = {
    "r20_tr": (0, 1),
    "r11_t": (0, 2),
    "r11_r": (1, 2),
}

MIN_FRINGE_POINTS = 5


@dataclass(frozen=True)
class AnalysisConfig:
    """Coincidence window, binning, per-channel offsets, and named pairs.

    ``pairs`` maps result names to unordered channel pairs; ``None`` counts
    every pair of distinct channels under generated names ``c{i}x{j}``.
    """

    window_ps: int = 2000
    bin_ps: int = PICOSECONDS_PER_SECOND
    offsets_ps: tuple[int, ...] | None = None
    pairs: Mapping[str, tuple[int, int]] | None = None

    def __post_init__(self) -> None:
        if self.window_ps < 1:
            raise ConfigurationError(f"window {self.window_ps!r} ps must be >= 1")
        if self.bin_ps < 1:
            raise ConfigurationError(f"bin width {self.bin_ps!r} ps must be >= 1")
        if self.pairs is not None:
            norm = {}
            for name, pair in self.pairs.items():
                i, j = (int(pair[0]), int(pair[1]))
                if i == j:
                    raise ConfigurationError(
                        f"pair {name!r} uses channel {i} twice"
                    )
                norm[str(name)] = (min(i, j), max(i, j))
            object.__setattr__(self, "pairs", norm)

    def resolved_pairs(self, channel_count: int) -> dict[str, tuple[int, int]]:
        if self.pairs is None:
            pairs = {
                f"c{i}x{j}": (i, j)
                for i in range(channel_count)
                for j in range(i + 1, channel_count)
            }
        else:
            pairs = dict(self.pairs)
        for name, (i, j) in pairs.items():
            if not 0 <= i < channel_count or not 0 <= j < channel_count:
                raise ConfigurationError(
                    f"pair {name!r} references channel {max(i, j)} but the "
                    f"stream has {channel_count} channels"
                )
        return pairs

    def resolved_offsets(self, channel_count: int) -> np.ndarray:
        if self.offsets_ps is None:
            return np.zeros(channel_count, dtype=np.int64)
        if len(self.offsets_ps) != channel_count:
            raise ConfigurationError(
                f"{len(self.offsets_ps)} offsets given for "
                f"{channel_count} channels"
            )
        return np.asarray(self.offsets_ps, dtype=np.int64)


@dataclass(eq=False, frozen=True)
class CoincidenceReport:
    """Binned singles and pair-coincidence counts for one stream."""

    channel_count: int
    window_ps: int
    bin_ps: int
    bin_start: int
    singles: np.ndarray  # (channel_count, n_bins)
    pairs: dict[str, np.ndarray] = field(default_factory=dict)
    pair_channels: dict[str, tuple[int, int]] = field(default_factory=dict)

    @property
    def n_bins(self) -> int:
        return int(self.singles.shape[1])

    @property
    def duration_s(self) -> float:
        return self.n_bins * self.bin_ps / PICOSECONDS_PER_SECOND

    @property
    def bin_left_edges_s(self) -> np.ndarray:
        return (
            (self.bin_start + np.arange(self.n_bins))
            * (self.bin_ps / PICOSECONDS_PER_SECOND)
        )

    @property
    def singles_totals(self) -> np.ndarray:
        return self.singles.sum(axis=1)

    def pair_total(self, name: str) -> float:
        return float(self.pairs[name].sum())

    @property
    def pair_totals(self) -> dict[str, float]:
        return {name: float(counts.sum()) for name, counts in self.pairs.items()}

    def pair_rate(self, name: str) -> float:
        duration = self.duration_s
        if duration <= 0.0:
            return 0.0
        return self.pair_total(name) / duration

    def correlation(
        self, names: Sequence[str] = BELL_CORRELATION_NAMES
    ) -> float | None:
        """Normalized correlation ``(pp + mm - pm - mp) / total``.

        Returns ``None`` when a named pair is missing or the four totals
        sum to zero, so callers can leave the value out of reports instead
        of writing a spurious 0.
        """
        if len(names) != 4:
            raise ConfigurationError("correlation needs exactly four pair names")
        if any(name not in self.pairs for name in names):
            return None
        pp, pm, mp, mm = (self.pair_total(name) for name in names)
        total = pp + pm + mp + mm
        if total <= 0.0:
            return None
        return (pp + mm - pm - mp) / total

    def to_dict(self) -> dict:
        summary = {
            "schema_version": 1,
            "kind": "coincidence_report",
            "channel_count": self.channel_count,
            "window_ps": self.window_ps,
            "bin_ps": self.bin_ps,
            "bin_start": self.bin_start,
            "n_bins": self.n_bins,
            "duration_s": self.duration_s,
            "singles_totals": [float(v) for v in self.singles_totals],
            "pair_channels": {
                name: list(self.pair_channels[name]) for name in self.pairs
            },
            "pair_totals": self.pair_totals,
        }
        duration = self.duration_s
        if duration > 0.0:
            summary["singles_rates"] = [
                float(v) / duration for v in self.singles_totals
            ]
            summary["pair_rates"] = {
                name: total / duration for name, total in self.pair_totals.items()
            }
        corr = self.correlation()
        if corr is not None:
            summary["correlation"] = corr
        summary["per_bin"] = {
            "bin_index": [self.bin_start + k for k in range(self.n_bins)],
            "singles": [
                [float(v) for v in self.singles[c]]
                for c in range(self.channel_count)
            ],
            "pairs": {
                name: [float(v) for v in counts]
                for name, counts in self.pairs.items()
            },
        }
        return summary


# Timestamps above this would risk int64 overflow once offsets and the
# window are added; that is over a month of picoseconds, far beyond any
# realistic acquisition.
_MAX_TIMESTAMP = 2**62

# The compiled sweep accumulates a dense (channel, channel, bin) array;
# past this many cells the numpy route is used instead to bound memory.
_SWEEP_CELL_LIMIT = 4_000_000

if _numba is not None:

    @_numba.njit(cache=True)
    def _sweep_kernel(times, channels, n_ch, half_window, bin_start, bin_ps):
        """Count singles and ordered channel pairs per bin in one pass.

        ``pair_bins[a, b, k]`` counts pairs whose earlier member is on
        channel ``a`` (channel ``b`` later or tied), attributed to the
        earlier member's bin ``k``.
        """
        n_bins = times[-1] // bin_ps - bin_start + 1
        singles = np.zeros((n_ch, n_bins), dtype=np.int64)
        pair_bins = np.zeros((n_ch, n_ch, n_bins), dtype=np.int64)
        n = times.size
        for k in range(n):
            anchor = times[k]
            limit = anchor + half_window
            c = channels[k]
            b = anchor // bin_ps - bin_start
            singles[c, b] += 1
            for m in range(k + 1, n):
                if times[m] > limit:
                    break
                pair_bins[c, channels[m], b] += 1
        return singles, pair_bins

else:
    _sweep_kernel = None


def count_coincidences(
    stream: TimeTagStream, config: AnalysisConfig | None = None
) -> CoincidenceReport:
    """Bin singles and count pairwise coincidences in one sweep.

    See the module docstring for the matching rule.  All channel-pair
    combinations requested in ``config.pairs`` are counted independently;
    a click may therefore contribute to several pair counters.
    """
    config = config or AnalysisConfig()
    n_ch = stream.channel_count
    pairs = config.resolved_pairs(n_ch)
    offsets = config.resolved_offsets(n_ch)
    bin_ps = config.bin_ps
    half_window = config.window_ps // 2

    if len(stream) and int(stream.timestamps[-1]) >= _MAX_TIMESTAMP:
        raise ConfigurationError(
            f"timestamps beyond {_MAX_TIMESTAMP} ps are not supported"
        )
    times = np.asarray(stream.timestamps, dtype=np.int64)
    channels = stream.channels
    if offsets.any():
        times = times + offsets[channels]
        if np.any(offsets != offsets[0]):
            # Per-channel offsets can reorder records; restore time order.
            order = np.argsort(times, kind="stable")
            times = times[order]
            channels = channels[order]

    n = times.size
    if n:
        bin_start = int(times[0]) // bin_ps
        n_bins = int(times[-1]) // bin_ps - bin_start + 1
    else:
        bin_start = 0
        n_bins = 0

    singles = np.zeros((n_ch, n_bins))
    pair_counts: dict[str, np.ndarray] = {name: np.zeros(n_bins) for name in pairs}
    if (
        n
        and _sweep_kernel is not None
        and n_ch * n_ch * n_bins <= _SWEEP_CELL_LIMIT
    ):
        singles_counts, pair_bins = _sweep_kernel(
            times, channels, n_ch, half_window, bin_start, bin_ps
        )
        singles[:] = singles_counts
        for name, (i, j) in pairs.items():
            pair_counts[name][:] = pair_bins[i, j] + pair_bins[j, i]
        return CoincidenceReport(
            channel_count=n_ch,
            window_ps=config.window_ps,
            bin_ps=bin_ps,
            bin_start=bin_start,
            singles=singles,
            pairs=pair_counts,
            pair_channels=pairs,
        )

    channel_masks = [channels == c for c in range(n_ch)]
    if n and n_bins == 1:
        # Everything lands in one bin, so attribution is moot and each
        # cross pair can be counted once from one side's look-around.
        channel_times = [times[mask] for mask in channel_masks]
        for c in range(n_ch):
            singles[c, 0] = channel_times[c].size
        for name, (i, j) in pairs.items():
            anchors = channel_times[i]
            others = channel_times[j]
            in_window = np.searchsorted(
                others, anchors + half_window, side="right"
            ) - np.searchsorted(others, anchors - half_window, side="left")
            pair_counts[name][0] = in_window.sum()
    elif n:
        # horizon[k]: first record index past k's look-ahead window, so
        # records k+1 .. horizon[k]-1 are k's partners.  Counting only
        # partners later in sort order counts each unordered pair once,
        # at its earlier member.
        horizon = np.searchsorted(times, times + half_window, side="right")
        # ahead[c][k]: how many channel-c records are among k's partners.
        cumulative = [
            np.concatenate(([0], np.cumsum(mask, dtype=np.int64)))
            for mask in channel_masks
        ]
        ahead = [cumulative[c][horizon] - cumulative[c][1:] for c in range(n_ch)]
        bins = times // bin_ps - bin_start
        channel_index = [np.flatnonzero(mask) for mask in channel_masks]
        channel_bins = [bins[idx] for idx in channel_index]
        for c in range(n_ch):
            if channel_bins[c].size:
                singles[c] = np.bincount(channel_bins[c], minlength=n_bins)
        for name, (i, j) in pairs.items():
            pair_counts[name] += np.bincount(
                channel_bins[i],
                weights=ahead[j][channel_index[i]],
                minlength=n_bins,
            )
            pair_counts[name] += np.bincount(
                channel_bins[j],
                weights=ahead[i][channel_index[j]],
                minlength=n_bins,
            )

    return CoincidenceReport(
        channel_count=n_ch,
        window_ps=config.window_ps,
        bin_ps=bin_ps,
        bin_start=bin_start,
        singles=singles,
        pairs=pair_counts,
        pair_channels=pairs,
    )


def write_bins_csv(report: CoincidenceReport, dest: "str | Path | io.TextIOBase") -> None:
    """Write the per-bin table: bin index, left edge, singles, pair counts."""
    pair_names = list(report.pairs)
    header = (
        ["bin_index", "time_s"]
        + [f"singles_c{c}" for c in range(report.channel_count)]
        + pair_names
    )
    edges = report.bin_left_edges_s

    def _emit(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(report.n_bins):
            row = [str(report.bin_start + k), f"{edges[k]:.6f}"]
            row += [f"{report.singles[c, k]:.10g}" for c in range(report.channel_count)]
            row += [f"{report.pairs[name][k]:.10g}" for name in pair_names]
            writer.writerow(row)

    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            _emit(fh)
    else:
        _emit(dest)


@dataclass(frozen=True)
class VisibilityFit:
    """Least-squares fit of ``r(x) = (r0/2) * (1 + V cos(harmonic*x + phase))``."""

    base_rate: float
    visibility: float
    phase_rad: float
    residual_rms: float
    harmonic: int = 4

    @property
    def mean_rate(self) -> float:
        return self.base_rate / 2.0


def fit_fringe(
    angles_rad: Sequence[float] | np.ndarray,
    rates: Sequence[float] | np.ndarray,
    harmonic: int = 4,
    min_points: int = MIN_FRINGE_POINTS,
) -> VisibilityFit:
    """Fit a sinusoidal fringe of the given angular harmonic to rates.

    Polarization-correlation fringes repeat four times per analyzer turn
    (``harmonic=4``); both-photons-at-one-station fringes go as the square
    of that and repeat eight times (``harmonic=8``).  The model is linear
    in ``(offset, in-phase, quadrature)``, so the fit is a single
    least-squares solve.  Raises
    :class:`~biphoton.errors.InsufficientDataError` when fewer than
    ``min_points`` samples are given, the design matrix is degenerate
    (for example all angles equal), or the fitted mean rate is not
    positive.
    """
    x = np.asarray(angles_rad, dtype=float).ravel()
    y = np.asarray(rates, dtype=float).ravel()
    if x.size != y.size:
        raise ConfigurationError("angle and rate arrays differ in length")
    if harmonic < 1:
        raise ConfigurationError(f"harmonic {harmonic!r} must be >= 1")
    if x.size < min_points:
        raise InsufficientDataError(
            f"fringe fit needs at least {min_points} points, got {x.size}"
        )
    design = np.column_stack(
        [np.ones_like(x), np.cos(harmonic * x), np.sin(harmonic * x)]
    )
    solution, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise InsufficientDataError(
            "fringe fit is degenerate; sample more distinct angles"
        )
    mean, in_phase, quadrature = (float(v) for v in solution)
    if mean <= 0.0:
        raise InsufficientDataError("fitted mean rate is not positive")
    amplitude = math.hypot(in_phase, quadrature)
    visibility = min(amplitude / mean, 1.0)
    phase = math.atan2(-quadrature, in_phase)
    residual_rms = float(np.sqrt(np.mean((design @ solution - y) ** 2)))
    return VisibilityFit(
        base_rate=2.0 * mean,
        visibility=visibility,
        phase_rad=phase,
        residual_rms=residual_rms,
        harmonic=harmonic,
    )
