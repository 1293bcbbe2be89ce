"""Monte Carlo click-stream generation and the TTAG binary time-tag format.

File format, version 1, little endian throughout:

========  ====  =====================================
offset    size  field
========  ====  =====================================
0         4     magic ``b"TTAG"``
4         2     u16 format version (1)
6         2     u16 channel count
8         8     u64 timestamp resolution in ps (1)
16        16*N  records
========  ====  =====================================

Each record is 16 bytes: a u64 timestamp in picoseconds, a u8 channel
index, and 7 zero padding bytes.  Records are stored sorted by timestamp.

Simulation pipeline, per emitted pair: draw the emission time from a
Poisson process, pick a mixture component, sample which detector channels
the two photons reach from the evolved two-photon outcome distribution,
apply per-photon detection efficiency, add per-click Gaussian timing
jitter, and fold both photons landing on one threshold detector into a
single click (the earlier of the two jittered times).  Dark counts are
superimposed per channel, everything is merged into timestamp order, and a
non-paralyzable dead time then drops any click closer than
``dead_time_ps`` to the previously kept click on the same channel.

Randomness is drawn from PCG64 generators with a fixed stream-splitting
rule so identical inputs give byte-identical files and time slices could be
generated in parallel: emission slice ``s`` (1 s long) uses
``SeedSequence((seed, 2, s))`` and the dark counts of channel ``c`` use
``SeedSequence((seed, 1, c))``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from io import BufferedIOBase
from pathlib import Path
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, FormatError, StreamError
from .quantum import (
    Mode,
    ModeUnitary,
    apply_unitary,
    channel_pair_distribution,
    outcome_distribution,
)
from .source import SourceEnsemble

__all__ = [
    "TTAG_MAGIC",
    "TTAG_VERSION",
    "TTAG_HEADER_SIZE",
    "TTAG_RECORD_SIZE",
    "DetectorModel",
    "TimeTagRecord",
    "TimeTagStream",
    "SimRun",
    "generate_stream",
    "write_ttag",
    "read_ttag",
    "read_ttag_bytes",
]

TTAG_MAGIC = b"TTAG"
TTAG_VERSION = 1
TTAG_HEADER_SIZE = 16
TTAG_RECORD_SIZE = 16
_HEADER = struct.Struct("<4sHHQ")
_RECORD_DTYPE = np.dtype(
    [("timestamp_ps", "<u8"), ("channel", "u1"), ("pad", "u1", (7,))]
)

PICOSECONDS_PER_SECOND = 10**12
_SLICE_PS = PICOSECONDS_PER_SECOND  # emission is generated in 1 s slices

# dict mapping unordered channel pairs (c1 <= c2) to probabilities; the hook
# lets an experiment reshape the sampled pattern mix before detection.
PairDistribution = dict[tuple[int, int], float]


@dataclass(frozen=True)
class DetectorModel:
    """Threshold single-photon detector parameters for one channel.

    Defaults describe a typical silicon avalanche photodiode: 60% detection
    efficiency, 25 dark counts per second, 350 ps timing jitter, and 22 ns
    dead time.
    """

    efficiency: float = 0.6
    dark_rate: float = 25.0
    jitter_sigma_ps: float = 350.0
    dead_time_ps: float = 22000.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ConfigurationError(f"efficiency {self.efficiency!r} outside [0, 1]")
        for name in ("dark_rate", "jitter_sigma_ps", "dead_time_ps"):
            if getattr(self, name) < 0.0:
                raise ConfigurationError(f"negative {name}: {getattr(self, name)!r}")

    @classmethod
    def noiseless(cls) -> "DetectorModel":
        return cls(efficiency=1.0, dark_rate=0.0, jitter_sigma_ps=0.0, dead_time_ps=0.0)


@dataclass(frozen=True)
class TimeTagRecord:
    """A single detector click."""

    timestamp_ps: int
    channel: int


class TimeTagStream:
    """A time-ordered array of clicks on a fixed set of channels."""

    __slots__ = ("timestamps", "channels", "channel_count")

    def __init__(
        self,
        timestamps: np.ndarray,
        channels: np.ndarray,
        channel_count: int,
    ):
        ts = np.ascontiguousarray(timestamps, dtype=np.uint64)
        ch = np.ascontiguousarray(channels, dtype=np.uint8)
        if ts.shape != ch.shape or ts.ndim != 1:
            raise ConfigurationError("timestamps and channels must be equal-length 1-d")
        if channel_count < 1 or channel_count > 256:
            raise ConfigurationError(f"channel count {channel_count} outside [1, 256]")
        if ch.size and int(ch.max()) >= channel_count:
            raise StreamError(
                f"channel {int(ch.max())} outside the declared "
                f"{channel_count} channels"
            )
        if ts.size > 1 and np.any(ts[1:] < ts[:-1]):
            first = int(np.argmax(ts[1:] < ts[:-1]))
            raise StreamError(
                f"timestamps not sorted at record {first + 1}"
            )
        ts.setflags(write=False)
        ch.setflags(write=False)
        self.timestamps = ts
        self.channels = ch
        self.channel_count = int(channel_count)

    @classmethod
    def empty(cls, channel_count: int) -> "TimeTagStream":
        return cls(np.empty(0, np.uint64), np.empty(0, np.uint8), channel_count)

    def __len__(self) -> int:
        return int(self.timestamps.size)

    def records(self) -> Iterator[TimeTagRecord]:
        for t, c in zip(self.timestamps, self.channels):
            yield TimeTagRecord(int(t), int(c))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TimeTagStream)
            and self.channel_count == other.channel_count
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.channels, other.channels)
        )


@dataclass(frozen=True)
class SimRun:
    """One acquisition: duration, seed, emission rate, and channel wiring."""

    duration_s: float
    seed: int
    pair_rate: float
    channel_map: Mapping[Mode, int]

    def __post_init__(self) -> None:
        if self.duration_s <= 0.0:
            raise ConfigurationError(f"duration {self.duration_s!r} must be positive")
        if self.pair_rate < 0.0:
            raise ConfigurationError(f"negative pair rate {self.pair_rate!r}")
        if self.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")


def _component_tables(
    ensemble: SourceEnsemble,
    circuit: ModeUnitary,
    channel_map: Mapping[Mode, int],
    channel_count: int,
    pair_damper: Callable[[PairDistribution], PairDistribution] | None,
) -> list[tuple[np.ndarray, np.ndarray]]:
    tables = []
    for _, state in ensemble.components:
        evolved = apply_unitary(state, circuit)
        pairs = channel_pair_distribution(outcome_distribution(evolved), channel_map)
        if pair_damper is not None:
            pairs = pair_damper(pairs)
        keys = sorted(pairs)
        probs = np.maximum(np.array([pairs[k] for k in keys]), 0.0)
        total = probs.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise ConfigurationError("outcome distribution vanished after damping")
        probs /= total
        ch_pairs = np.array(keys, dtype=np.int64).reshape(-1, 2)
        if ch_pairs.size and ch_pairs.max() >= channel_count:
            raise ConfigurationError(
                f"channel map routes photons to channel {int(ch_pairs.max())} "
                f"but only {channel_count} detectors are defined"
            )
        tables.append((ch_pairs, probs))
    return tables


def _dead_time_keep(times: np.ndarray, dead_ps: float) -> np.ndarray:
    keep = np.ones(times.size, dtype=bool)
    last = None
    for i, t in enumerate(times):
        if last is not None and t - last < dead_ps:
            keep[i] = False
        else:
            last = t
    return keep


def generate_stream(
    ensemble: SourceEnsemble,
    circuit: ModeUnitary,
    run: SimRun,
    detectors: Sequence[DetectorModel],
    pair_damper: Callable[[PairDistribution], PairDistribution] | None = None,
) -> TimeTagStream:
    """Simulate one acquisition and return the sorted click stream.

    ``detectors`` gives one :class:`DetectorModel` per channel and fixes the
    channel count.  ``pair_damper``, if given, reshapes each component's
    channel-pair distribution before sampling (used for visibility
    injection).  Output is byte-reproducible for fixed inputs; see the
    module docstring for the stream-splitting rule.
    """
    n_channels = len(detectors)
    if n_channels == 0:
        raise ConfigurationError("need at least one detector")
    if any(c < 0 or c >= n_channels for c in run.channel_map.values()):
        raise ConfigurationError("channel map references an undefined channel")

    tables = _component_tables(
        ensemble, circuit, run.channel_map, n_channels, pair_damper
    )
    weights = np.array([w for w, _ in ensemble.components])
    weights /= weights.sum()

    eff = np.array([d.efficiency for d in detectors])
    sigma = np.array([d.jitter_sigma_ps for d in detectors])

    total_ps = int(round(run.duration_s * PICOSECONDS_PER_SECOND))
    if total_ps <= 0:
        raise ConfigurationError("duration shorter than the 1 ps resolution")

    chunks_t: list[np.ndarray] = []
    chunks_c: list[np.ndarray] = []

    n_slices = -(-total_ps // _SLICE_PS)
    for s in range(n_slices):
        start = s * _SLICE_PS
        end = min(total_ps, start + _SLICE_PS)
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((run.seed, 2, s)))
        )
        n = int(rng.poisson(run.pair_rate * (end - start) / PICOSECONDS_PER_SECOND))
        if n == 0:
            continue
        emit = np.sort(rng.integers(start, end, size=n, dtype=np.int64))
        if len(tables) == 1:
            comp = np.zeros(n, dtype=np.intp)
        else:
            comp = rng.choice(len(tables), size=n, p=weights)
        chans = np.empty((n, 2), dtype=np.int64)
        for k, (ch_pairs, probs) in enumerate(tables):
            mask = comp == k
            m = int(mask.sum())
            if m == 0:
                continue
            oi = rng.choice(len(probs), size=m, p=probs)
            chans[mask] = ch_pairs[oi]
        survive = rng.random(size=(n, 2)) < eff[chans]
        jitter = rng.standard_normal(size=(n, 2))
        clicks = emit[:, None] + np.rint(jitter * sigma[chans]).astype(np.int64)
        np.maximum(clicks, 0, out=clicks)
        # Threshold fold: both photons on one detector make one click, at
        # the earlier of the two candidate times.
        both_same = survive.all(axis=1) & (chans[:, 0] == chans[:, 1])
        if both_same.any():
            rows = np.nonzero(both_same)[0]
            drop = np.where(clicks[rows, 0] <= clicks[rows, 1], 1, 0)
            survive[rows, drop] = False
        chunks_t.append(clicks[survive])
        chunks_c.append(chans[survive])

    for c in range(n_channels):
        dark = detectors[c].dark_rate
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((run.seed, 1, c)))
        )
        nd = int(rng.poisson(dark * run.duration_s))
        if nd == 0:
            continue
        chunks_t.append(rng.integers(0, total_ps, size=nd, dtype=np.int64))
        chunks_c.append(np.full(nd, c, dtype=np.int64))

    if not chunks_t:
        return TimeTagStream.empty(n_channels)

    times = np.concatenate(chunks_t)
    chans = np.concatenate(chunks_c)
    order = np.lexsort((chans, times))
    times = times[order]
    chans = chans[order]

    if any(d.dead_time_ps > 0.0 for d in detectors):
        keep = np.ones(times.size, dtype=bool)
        for c in range(n_channels):
            dead = detectors[c].dead_time_ps
            if dead <= 0.0:
                continue
            idx = np.nonzero(chans == c)[0]
            if idx.size:
                keep[idx] = _dead_time_keep(times[idx], dead)
        times = times[keep]
        chans = chans[keep]

    return TimeTagStream(times.astype(np.uint64), chans.astype(np.uint8), n_channels)


def write_ttag(stream: TimeTagStream, path: "str | Path | BufferedIOBase") -> None:
    """Write a stream to a TTAG v1 file or binary file object."""
    header = _HEADER.pack(TTAG_MAGIC, TTAG_VERSION, stream.channel_count, 1)
    records = np.zeros(len(stream), dtype=_RECORD_DTYPE)
    records["timestamp_ps"] = stream.timestamps
    records["channel"] = stream.channels
    if isinstance(path, BufferedIOBase):
        path.write(header)
        path.write(records.tobytes())
        return
    with open(path, "wb") as f:
        f.write(header)
        records.tofile(f)


def read_ttag_bytes(data: bytes) -> TimeTagStream:
    """Parse TTAG v1 bytes, validating structure, channels, and ordering."""
    if len(data) < TTAG_HEADER_SIZE:
        raise FormatError("truncated header", byte_offset=len(data))
    magic, version, channel_count, resolution = _HEADER.unpack_from(data)
    if magic != TTAG_MAGIC:
        raise FormatError(f"bad magic {magic!r}", byte_offset=0)
    if version != TTAG_VERSION:
        raise FormatError(f"unsupported format version {version}", byte_offset=4)
    if channel_count < 1:
        raise FormatError("channel count must be at least 1", byte_offset=6)
    if resolution != 1:
        raise FormatError(
            f"unsupported timestamp resolution {resolution} ps", byte_offset=8
        )
    body = data[TTAG_HEADER_SIZE:]
    extra = len(body) % TTAG_RECORD_SIZE
    if extra:
        raise FormatError(
            "truncated record", byte_offset=TTAG_HEADER_SIZE + len(body) - extra
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    channels = records["channel"]
    timestamps = records["timestamp_ps"]
    bad = np.nonzero(channels >= channel_count)[0]
    if bad.size:
        raise FormatError(
            f"channel {int(channels[bad[0]])} outside the declared "
            f"{channel_count} channels",
            byte_offset=TTAG_HEADER_SIZE + TTAG_RECORD_SIZE * int(bad[0]) + 8,
        )
    if timestamps.size > 1:
        viol = np.nonzero(timestamps[1:] < timestamps[:-1])[0]
        if viol.size:
            raise FormatError(
                "timestamps not sorted",
                byte_offset=TTAG_HEADER_SIZE + TTAG_RECORD_SIZE * (int(viol[0]) + 1),
            )
    return TimeTagStream(
        timestamps.copy(), channels.copy(), channel_count
    )


def read_ttag(path: "str | Path") -> TimeTagStream:
    """Read and validate a TTAG v1 file."""
    return read_ttag_bytes(Path(path).read_bytes())
