"""Two-photon amplitude algebra over a fixed set of optical modes.

A pair state is stored as a complex coefficient matrix ``A`` over ordered
photon slots,

    ``|psi> = sum_{m,n} A[m, n] a_m^dag a_n^dag |0>``,

where ``m`` and ``n`` index the modes of a :class:`ModeBasis`.  For identical
photons (``labeled=False``) only the symmetric part of ``A`` is physical, so
the matrix is kept exactly symmetric and detection outcomes add *amplitudes*:
the unordered outcome ``{m, n}`` has weight ``|A[m,n] + A[n,m]|**2`` for
``m != n`` and ``2|A[m,m]|**2`` on the diagonal.  With ``labeled=True`` the
two slots carry a hidden exchange label that makes the photons
distinguishable in principle while leaving the optics untouched; outcomes
then add *probabilities*: ``|A[m,n]|**2 + |A[n,m]|**2`` off the diagonal and
``|A[m,m]|**2`` on it.

A single-photon unitary ``U`` acts on both slots at once, ``A' = U A U^T``,
which preserves the norm and the symmetry class of ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DegenerateStateError,
    EmptyPostselectionError,
    ModelError,
)

__all__ = [
    "POLARIZATIONS",
    "SYMMETRY_TOL",
    "UNITARITY_TOL",
    "Mode",
    "ModeBasis",
    "ModeUnitary",
    "TwoPhotonState",
    "OutcomeDistribution",
    "pair_norm",
    "make_pair_state",
    "superpose",
    "apply_unitary",
    "postselect",
    "outcome_distribution",
    "channel_pair_distribution",
    "marginal_click_pattern",
]

POLARIZATIONS = ("H", "V")

# Numerical tolerances for the symmetry and unitarity checks applied at
# construction time.  Double precision leaves a comfortable margin below both.
SYMMETRY_TOL = 1e-12
UNITARITY_TOL = 1e-12

_ZERO_NORM = 1e-24  # squared-amplitude threshold below which a state is "zero"


@dataclass(frozen=True, order=True)
class Mode:
    """One optical mode: a spatial path carrying one polarization."""

    path: str
    pol: str

    def __post_init__(self) -> None:
        if self.pol not in POLARIZATIONS:
            raise ConfigurationError(
                f"unknown polarization {self.pol!r}; expected one of {POLARIZATIONS}"
            )

    def __str__(self) -> str:
        return f"{self.path}:{self.pol}"


class ModeBasis:
    """Ordered, immutable collection of modes fixing a circuit's state space."""

    __slots__ = ("modes", "_index")

    def __init__(self, modes: Iterable[Mode]):
        object.__setattr__(self, "modes", tuple(modes))
        if len(set(self.modes)) != len(self.modes):
            raise ConfigurationError("duplicate modes in basis")
        if not self.modes:
            raise ConfigurationError("empty mode basis")
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(self.modes)})

    @classmethod
    def from_paths(cls, paths: Sequence[str]) -> "ModeBasis":
        """Basis holding both polarizations of each spatial path, in order."""
        return cls(Mode(path, pol) for path in paths for pol in POLARIZATIONS)

    def index(self, mode: Mode) -> int:
        try:
            return self._index[mode]
        except KeyError:
            raise ConfigurationError(f"mode {mode} is not in this basis") from None

    @property
    def paths(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for mode in self.modes:
            seen.setdefault(mode.path, None)
        return tuple(seen)

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self.modes)

    def __contains__(self, mode: Mode) -> bool:
        return mode in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ModeBasis) and self.modes == other.modes

    def __hash__(self) -> int:
        return hash(self.modes)

    def __repr__(self) -> str:
        return f"ModeBasis({', '.join(map(str, self.modes))})"


@dataclass(frozen=True)
class ModeUnitary:
    """A unitary acting on the single-photon mode space of ``basis``."""

    basis: ModeBasis
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.complex128)
        n = len(self.basis)
        if m.shape != (n, n):
            raise ConfigurationError(
                f"unitary shape {m.shape} does not match basis size {n}"
            )
        deviation = np.abs(m.conj().T @ m - np.eye(n)).max()
        if deviation > UNITARITY_TOL:
            raise ConfigurationError(
                f"matrix is not unitary (deviation {deviation:.3e})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __matmul__(self, other: "ModeUnitary") -> "ModeUnitary":
        if self.basis != other.basis:
            raise ConfigurationError("cannot compose unitaries on different bases")
        return ModeUnitary(self.basis, self.matrix @ other.matrix)


def pair_norm(amplitudes: np.ndarray, labeled: bool) -> float:
    """Physical squared norm of a coefficient matrix.

    For labeled slots this is the plain Frobenius norm.  For identical
    photons, amplitudes for the two orderings of an outcome add coherently,
    and a doubly occupied mode picks up the usual bosonic factor of 2.
    """
    a = np.asarray(amplitudes)
    if labeled:
        return float(np.sum(np.abs(a) ** 2))
    s = np.abs(a + a.T) ** 2
    off = np.triu(s, k=1).sum()
    diag = 2.0 * np.sum(np.abs(np.diagonal(a)) ** 2)
    return float(off + diag)


@dataclass(frozen=True)
class TwoPhotonState:
    """Normalized two-photon state over a fixed mode basis."""

    basis: ModeBasis
    amplitudes: np.ndarray
    labeled: bool = False

    def __post_init__(self) -> None:
        a = np.array(self.amplitudes, dtype=np.complex128)
        n = len(self.basis)
        if a.shape != (n, n):
            raise ConfigurationError(
                f"amplitude shape {a.shape} does not match basis size {n}"
            )
        if not self.labeled:
            asym = np.abs(a - a.T).max()
            if asym > SYMMETRY_TOL:
                raise ModelError(
                    f"identical-photon amplitudes must be symmetric "
                    f"(asymmetry {asym:.3e})"
                )
        if pair_norm(a, self.labeled) <= _ZERO_NORM:
            raise DegenerateStateError("two-photon state has zero norm")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return pair_norm(self.amplitudes, self.labeled)


def make_pair_state(
    basis: ModeBasis, mode1: Mode, mode2: Mode, labeled: bool = False
) -> TwoPhotonState:
    """State with one photon in ``mode1`` and one in ``mode2``, unit norm.

    With ``labeled=True`` the first argument is the "+"-labeled slot.  For
    identical photons the two slot orderings are symmetrized internally.
    """
    i, j = basis.index(mode1), basis.index(mode2)
    a = np.zeros((len(basis), len(basis)), dtype=np.complex128)
    if labeled:
        a[i, j] = 1.0
    elif i == j:
        a[i, i] = 1.0 / math.sqrt(2.0)
    else:
        a[i, j] = a[j, i] = 0.5
    return TwoPhotonState(basis, a, labeled)


def superpose(
    terms: Sequence[tuple[complex, TwoPhotonState]]
) -> TwoPhotonState:
    """Normalized linear combination ``sum_k c_k |psi_k>``.

    All terms must share one basis and one labeling convention; a
    combination that sums to the zero vector is rejected.
    """
    if not terms:
        raise ModelError("superpose needs at least one term")
    first = terms[0][1]
    a = np.zeros_like(first.amplitudes)
    for coeff, state in terms:
        if state.basis != first.basis:
            raise ModelError("superpose terms live on different bases")
        if state.labeled != first.labeled:
            raise ModelError("cannot superpose labeled with unlabeled states")
        a = a + complex(coeff) * state.amplitudes
    n = pair_norm(a, first.labeled)
    if n <= _ZERO_NORM:
        raise DegenerateStateError("superposition summed to the zero vector")
    return TwoPhotonState(first.basis, a / math.sqrt(n), first.labeled)


def apply_unitary(state: TwoPhotonState, u: ModeUnitary) -> TwoPhotonState:
    """Evolve both photons through the same single-photon unitary."""
    if u.basis != state.basis:
        raise ConfigurationError("unitary and state are on different bases")
    evolved = u.matrix @ state.amplitudes @ u.matrix.T
    return TwoPhotonState(state.basis, evolved, state.labeled)


def _outcome_weights(state: TwoPhotonState) -> dict[tuple[int, int], float]:
    """Unnormalized detection weight of each unordered index pair ``i <= j``."""
    a = state.amplitudes
    n = a.shape[0]
    weights: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i, n):
            if state.labeled:
                w = abs(a[i, j]) ** 2 if i == j else abs(a[i, j]) ** 2 + abs(a[j, i]) ** 2
            else:
                w = 2.0 * abs(a[i, i]) ** 2 if i == j else abs(a[i, j] + a[j, i]) ** 2
            if w > 0.0:
                weights[(i, j)] = float(w)
    return weights


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability of each unordered mode pair a joint detection can yield.

    Keys are ``(mode_i, mode_j)`` tuples canonically ordered by basis index;
    a doubly occupied mode appears as ``(m, m)``.
    """

    basis: ModeBasis
    entries: Mapping[tuple[Mode, Mode], float]

    def __post_init__(self) -> None:
        total = 0.0
        for pair, p in self.entries.items():
            if p < 0.0:
                raise ModelError(f"negative probability for outcome {pair}")
            total += p
        if abs(total - 1.0) > 1e-12:
            raise ModelError(f"outcome probabilities sum to {total!r}, not 1")

    def probability(self, mode1: Mode, mode2: Mode) -> float:
        i, j = self.basis.index(mode1), self.basis.index(mode2)
        key = (mode1, mode2) if i <= j else (mode2, mode1)
        return self.entries.get(key, 0.0)

    def items(self):
        return self.entries.items()

    def __len__(self) -> int:
        return len(self.entries)


def outcome_distribution(state: TwoPhotonState) -> OutcomeDistribution:
    """Detection probabilities for every unordered pair of modes.

    Identical photons sum amplitudes over slot orderings before squaring;
    labeled photons sum the squared amplitudes of the two orderings.
    """
    weights = _outcome_weights(state)
    total = sum(weights.values())
    modes = state.basis.modes
    entries = {
        (modes[i], modes[j]): w / total for (i, j), w in weights.items()
    }
    return OutcomeDistribution(state.basis, entries)


def _channel_of(mode: Mode, channel_map: Mapping[Mode, int]) -> int:
    try:
        return channel_map[mode]
    except KeyError:
        raise ConfigurationError(
            f"mode {mode} carries detection probability but is not mapped "
            f"to a detector channel"
        ) from None


def channel_pair_distribution(
    dist: OutcomeDistribution, channel_map: Mapping[Mode, int]
) -> dict[tuple[int, int], float]:
    """Fold mode outcomes onto unordered detector-channel pairs.

    Keys are ``(c1, c2)`` with ``c1 <= c2``; a pair that lands on one
    channel appears as ``(c, c)``.  Unlike a click pattern this keeps the
    photon count, which the Monte Carlo sampler needs to apply per-photon
    detection efficiency before threshold folding.
    """
    pairs: dict[tuple[int, int], float] = {}
    for (m1, m2), p in dist.items():
        c1, c2 = _channel_of(m1, channel_map), _channel_of(m2, channel_map)
        key = (c1, c2) if c1 <= c2 else (c2, c1)
        pairs[key] = pairs.get(key, 0.0) + p
    return pairs


def marginal_click_pattern(
    dist: OutcomeDistribution, channel_map: Mapping[Mode, int]
) -> dict[frozenset[int], float]:
    """Fold mode outcomes into threshold-detector click patterns.

    Two photons reaching modes mapped to the same channel produce a single
    click on that channel, so each pattern is the *set* of channels that
    fired.  Probabilities of outcomes folding onto one pattern add.
    """
    patterns: dict[frozenset[int], float] = {}
    for (c1, c2), p in channel_pair_distribution(dist, channel_map).items():
        key = frozenset((c1, c2))
        patterns[key] = patterns.get(key, 0.0) + p
    return patterns


def postselect(
    state: TwoPhotonState, keep: Callable[[Mode, Mode], bool]
) -> tuple[TwoPhotonState, float]:
    """Project onto the outcomes selected by ``keep`` and renormalize.

    ``keep`` is called once per unordered mode pair.  Returns the projected
    state and the probability that the projection succeeds.
    """
    weights = _outcome_weights(state)
    total = sum(weights.values())
    modes = state.basis.modes
    kept = {
        (i, j): w for (i, j), w in weights.items() if keep(modes[i], modes[j])
    }
    kept_weight = sum(kept.values())
    if kept_weight <= _ZERO_NORM * total:
        raise EmptyPostselectionError(
            "postselection keeps no outcome with nonzero weight"
        )
    a = np.array(state.amplitudes)
    n = a.shape[0]
    for i in range(n):
        for j in range(i, n):
            if (i, j) not in kept:
                a[i, j] = 0.0
                a[j, i] = 0.0
    norm = pair_norm(a, state.labeled)
    projected = TwoPhotonState(state.basis, a / math.sqrt(norm), state.labeled)
    return projected, kept_weight / total
