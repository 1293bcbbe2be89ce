"""Independent reference implementations the tests compare the package against.

Everything here is deliberately written from the ground rules rather than by
calling into the package, so that agreement is evidence and not tautology:

* two-photon detection weights are aggregated by expanding the coefficient
  matrix over all *ordered* mode pairs and applying the amplitude-sum or
  probability-sum rule term by term;
* unitary evolution is applied slot by slot with an explicit einsum over
  basis kets instead of the packaged matrix sandwich;
* coincidence counting enumerates every unordered record pair: the
  quadratic counter literally materializes all pairs, and the two-pointer
  counter walks a sorted stream with an advancing partner cursor.  A unit
  test pins the two counters to each other so the fast one can stand in for
  the quadratic one on large streams.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is an optional accelerator
    njit = None

PS_PER_SECOND = 10**12


# ---------------------------------------------------------------------------
# two-photon state algebra


def brute_apply(amplitudes: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Evolve a coefficient matrix by expanding over ordered basis pairs.

    ``|psi> = sum A[m,n] |m>|n>`` and each ket evolves as
    ``|m> -> sum_p U[p,m] |p>``, so the evolved coefficient of ``|p>|q>``
    is ``sum_{m,n} U[p,m] A[m,n] U[q,n]``.
    """
    return np.einsum("pm,mn,qn->pq", matrix, amplitudes, matrix)


def brute_outcome_weights(amplitudes: np.ndarray, labeled: bool) -> dict:
    """Unnormalized weight of each unordered index pair, slot by slot."""
    n = amplitudes.shape[0]
    weights: dict[tuple[int, int], float] = {}
    for m in range(n):
        for p in range(n):
            key = (min(m, p), max(m, p))
            amp = amplitudes[m, p]
            if labeled:
                weights[key] = weights.get(key, 0.0) + abs(amp) ** 2
            elif m == p:
                # both photons in one mode: coherent, bosonic factor 2
                weights[key] = weights.get(key, 0.0) + 2.0 * abs(amp) ** 2
            elif m < p:
                weights[key] = weights.get(key, 0.0) + abs(amp + amplitudes[p, m]) ** 2
    return weights


def brute_outcome_probabilities(amplitudes: np.ndarray, labeled: bool) -> dict:
    weights = brute_outcome_weights(amplitudes, labeled)
    total = sum(weights.values())
    return {key: w / total for key, w in weights.items() if w > 0.0}


def symmetric_overlap(a: np.ndarray, b: np.ndarray) -> complex:
    """Physical inner product of two identical-photon coefficient matrices."""
    n = a.shape[0]
    total = 0.0 + 0.0j
    for m in range(n):
        total += 2.0 * np.conj(a[m, m]) * b[m, m]
        for p in range(m + 1, n):
            total += np.conj(a[m, p] + a[p, m]) * (b[m, p] + b[p, m])
    return complex(total)


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-ish random unitary from the QR decomposition of a Ginibre matrix."""
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


# ---------------------------------------------------------------------------
# coincidence counting

# Matching rule under test: after adding the per-channel offset, two records
# coincide when their shifted times differ by at most window // 2, every
# unordered record pair is counted once, and a coincidence belongs to the
# bin of its earlier shifted timestamp.


def _shifted(timestamps, channels, offsets):
    t = np.asarray(timestamps, dtype=np.int64)
    c = np.asarray(channels, dtype=np.int64)
    if offsets is not None:
        t = t + np.asarray(offsets, dtype=np.int64)[c]
    return t, c


def quadratic_report(
    timestamps,
    channels,
    channel_count: int,
    window_ps: int,
    bin_ps: int = PS_PER_SECOND,
    offsets=None,
):
    """All-pairs binned counts: (bin_start, singles, pair-count dict).

    ``singles`` is an int array of shape (channel_count, n_bins) and the
    dict maps unordered channel pairs (i < j) to int arrays over bins.
    Materializes every record pair, so keep streams small.
    """
    t, c = _shifted(timestamps, channels, offsets)
    if t.size == 0:
        return 0, np.zeros((channel_count, 0), dtype=np.int64), {}
    bins = t // bin_ps
    bin_start = int(bins.min())
    n_bins = int(bins.max()) - bin_start + 1
    singles = np.zeros((channel_count, n_bins), dtype=np.int64)
    np.add.at(singles, (c, bins - bin_start), 1)

    half = window_ps // 2
    iu, ju = np.triu_indices(t.size, k=1)
    hit = np.abs(t[iu] - t[ju]) <= half
    ii, jj = iu[hit], ju[hit]
    earlier_bins = np.minimum(t[ii], t[jj]) // bin_ps - bin_start
    pairs: dict[tuple[int, int], np.ndarray] = {}
    for a, b, k in zip(c[ii], c[jj], earlier_bins):
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in pairs:
            pairs[key] = np.zeros(n_bins, dtype=np.int64)
        pairs[key][k] += 1
    return bin_start, singles, pairs


def _pair_totals_sweep(times, chans, half, n_channels):
    """Totals per ordered (channel at k, channel of a later partner)."""
    n = times.size
    totals = np.zeros((n_channels, n_channels), dtype=np.int64)
    for k in range(n):
        limit = times[k] + half
        j = k + 1
        while j < n and times[j] <= limit:
            totals[chans[k], chans[j]] += 1
            j += 1
    return totals


if njit is not None:
    _pair_totals_sweep = njit(cache=True)(_pair_totals_sweep)


def sweep_pair_totals(
    timestamps, channels, channel_count: int, window_ps: int, offsets=None
) -> np.ndarray:
    """Unordered pair totals by channel, via the two-pointer sweep.

    Returns a symmetric (channel_count, channel_count) int matrix whose
    [i, j] entry (i != j) is the number of coincidences between channels i
    and j; the diagonal holds same-channel pairs, which the engine is never
    asked to count.
    """
    t, c = _shifted(timestamps, channels, offsets)
    order = np.argsort(t, kind="stable")
    ordered = _pair_totals_sweep(t[order], c[order], window_ps // 2, channel_count)
    return ordered + ordered.T - np.diag(np.diagonal(ordered))


def quadratic_pair_totals(
    timestamps, channels, channel_count: int, window_ps: int, offsets=None
) -> np.ndarray:
    """Same matrix as :func:`sweep_pair_totals` from the all-pairs rule."""
    t, c = _shifted(timestamps, channels, offsets)
    totals = np.zeros((channel_count, channel_count), dtype=np.int64)
    half = window_ps // 2
    iu, ju = np.triu_indices(t.size, k=1)
    hit = np.abs(t[iu] - t[ju]) <= half
    for a, b in zip(c[iu[hit]], c[ju[hit]]):
        totals[a, b] += 1
        if a != b:
            totals[b, a] += 1
    return totals


def random_stream(
    rng: np.random.Generator,
    n_records: int,
    channel_count: int,
    span_ps: int,
):
    """Sorted random timestamps (with duplicates) and random channels."""
    times = np.sort(rng.integers(0, span_ps, size=n_records, dtype=np.int64))
    chans = rng.integers(0, channel_count, size=n_records, dtype=np.int64)
    return times.astype(np.uint64), chans.astype(np.uint8)
