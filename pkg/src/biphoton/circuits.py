"""Prebuilt measurement circuits and their detector-channel assignments.

Two setups are provided:

* the **Bell circuit**: a collinear pair in path ``c`` is split on a 50/50
  splitter into analyzer arms ``a`` and ``b``, each carrying a half-wave
  plate followed by a polarizing splitter whose transmitted/reflected ports
  feed the "+" and "-" detectors of that arm.  Channels:
  ``0 = A+``, ``1 = A-``, ``2 = B+``, ``3 = B-``.

* the **coalescence circuit**: the pair in ``c`` passes one waveplate and a
  polarizing splitter; the transmitted port is further divided on a 50/50
  splitter so that two photons leaving the transmitted port together can be
  registered as a coincidence between its two sub-detectors.  Channels:
  ``0 = A+t``, ``1 = A+r``, ``2 = A-`` (transmitted-split pair and the
  reflected detector).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .elements import compose, hwp_unitary, npbs_unitary, pbs_routing, qwp_unitary
from .errors import ConfigurationError
from .quantum import (
    Mode,
    ModeBasis,
    ModeUnitary,
    TwoPhotonState,
    apply_unitary,
    channel_pair_distribution,
    outcome_distribution,
)

__all__ = [
    "BELL_ROLES",
    "COALESCENCE_ROLES",
    "SOURCE_PATH",
    "Circuit",
    "bell_circuit",
    "coalescence_circuit",
    "mixture_pair_probabilities",
]

SOURCE_PATH = "c"

BELL_ROLES: Mapping[int, str] = {0: "A+", 1: "A-", 2: "B+", 3: "B-"}
COALESCENCE_ROLES: Mapping[int, str] = {0: "A+t", 1: "A+r", 2: "A-"}

_BELL_PATHS = ("c", "a", "b", "at", "ar", "bt", "br")
_BELL_TERMINALS = {"at": 0, "ar": 1, "bt": 2, "br": 3}

_COALESCENCE_PATHS = ("c", "t", "r", "t1", "t2")
_COALESCENCE_TERMINALS = {"t1": 0, "t2": 1, "r": 2}


@dataclass(frozen=True)
class Circuit:
    """A measurement circuit: basis, total unitary, and detector channels."""

    kind: str
    basis: ModeBasis
    unitary: ModeUnitary
    channel_map: Mapping[Mode, int]
    roles: Mapping[int, str]

    @property
    def channel_count(self) -> int:
        return len(self.roles)


def _terminal_channel_map(
    basis: ModeBasis, terminals: Mapping[str, int]
) -> dict[Mode, int]:
    return {
        mode: terminals[mode.path] for mode in basis if mode.path in terminals
    }


def bell_circuit(
    alpha_rad: float, beta_rad: float, hwp_convention: str = "rotation"
) -> Circuit:
    """Two-arm analyzer circuit with half-wave plates at ``alpha`` and ``beta``."""
    basis = ModeBasis.from_paths(_BELL_PATHS)
    unitary = compose(
        [
            npbs_unitary(basis, "c", ("a", "b")),
            hwp_unitary(basis, "a", alpha_rad, hwp_convention),
            hwp_unitary(basis, "b", beta_rad, hwp_convention),
            pbs_routing(basis, "a", ("at", "ar")),
            pbs_routing(basis, "b", ("bt", "br")),
        ]
    )
    return Circuit(
        kind="bell",
        basis=basis,
        unitary=unitary,
        channel_map=_terminal_channel_map(basis, _BELL_TERMINALS),
        roles=dict(BELL_ROLES),
    )


def coalescence_circuit(theta_rad: float, waveplate: str = "hwp") -> Circuit:
    """Single-arm splitter circuit probing whether the pair leaves together."""
    if waveplate not in ("hwp", "qwp"):
        raise ConfigurationError(
            f"unknown waveplate kind {waveplate!r}; expected 'hwp' or 'qwp'"
        )
    basis = ModeBasis.from_paths(_COALESCENCE_PATHS)
    plate = (
        hwp_unitary(basis, "c", theta_rad)
        if waveplate == "hwp"
        else qwp_unitary(basis, "c", theta_rad)
    )
    unitary = compose(
        [
            plate,
            pbs_routing(basis, "c", ("t", "r")),
            npbs_unitary(basis, "t", ("t1", "t2")),
        ]
    )
    return Circuit(
        kind="coalescence",
        basis=basis,
        unitary=unitary,
        channel_map=_terminal_channel_map(basis, _COALESCENCE_TERMINALS),
        roles=dict(COALESCENCE_ROLES),
    )


def mixture_pair_probabilities(
    components: Sequence[tuple[float, TwoPhotonState]], circuit: Circuit
) -> dict[tuple[int, int], float]:
    """Channel-pair probabilities of a weighted mixture sent through ``circuit``."""
    pairs: dict[tuple[int, int], float] = {}
    for weight, state in components:
        evolved = apply_unitary(state, circuit.unitary)
        dist = outcome_distribution(evolved)
        for key, p in channel_pair_distribution(dist, circuit.channel_map).items():
            pairs[key] = pairs.get(key, 0.0) + weight * p
    return pairs
