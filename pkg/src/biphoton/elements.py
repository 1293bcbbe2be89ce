"""Mode unitaries for the optical elements of the pair-interference setups.

Conventions (with ``c2 = cos 2a``, ``s2 = sin 2a`` for a waveplate at angle
``a`` from the horizontal):

* non-polarizing beam splitter, input ``c`` to outputs ``(t, r)``:
  ``|H,c> -> (|H,t> + i|H,r>)/sqrt(2)`` and
  ``|V,c> -> (|V,t> - i|V,r>)/sqrt(2)`` — the reflected arm picks up a
  polarization-dependent phase of ``+/- i``;
* half-wave plate, ``rotation`` convention (default):
  ``|H> -> c2|H> + s2|V>``, ``|V> -> -s2|H> + c2|V>`` (determinant +1);
  ``physical`` convention: ``|H> -> c2|H> + s2|V>``,
  ``|V> -> s2|H> - c2|V>`` (determinant -1, the mirror form).  The two
  differ only by a polarization-frame reflection and give identical
  counting statistics for the states built here;
* quarter-wave plate: ``R(a) diag(1, i) R(-a)`` with ``R`` the
  polarization-plane rotation;
* polarizing beam splitter: horizontal transmits, vertical reflects, as a
  pure spatial relabeling.

Each constructor returns a :class:`~biphoton.quantum.ModeUnitary` over the
full circuit basis, acting as the identity on untouched modes.  Splitter
matrices are completed to square unitaries by routing the nominal output
ports back toward the input label; no amplitude ever occupies those ports
before the element in the circuits built here, so the completion is
unobservable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .quantum import Mode, ModeBasis, ModeUnitary

__all__ = [
    "HWP_CONVENTIONS",
    "WaveplateSetting",
    "ElementSpec",
    "npbs_unitary",
    "hwp_unitary",
    "qwp_unitary",
    "pbs_routing",
    "compose",
]

HWP_CONVENTIONS = ("rotation", "physical")


@dataclass(frozen=True)
class WaveplateSetting:
    """Waveplate rotation angle, stored in radians and normalized to [0, pi)."""

    angle: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "angle", float(self.angle) % math.pi)

    @classmethod
    def from_degrees(cls, degrees: float) -> "WaveplateSetting":
        return cls(math.radians(degrees))

    @property
    def degrees(self) -> float:
        return math.degrees(self.angle)


def _angle(setting: "WaveplateSetting | float") -> float:
    if isinstance(setting, WaveplateSetting):
        return setting.angle
    return WaveplateSetting(float(setting)).angle


def _require_path(basis: ModeBasis, path: str) -> None:
    if Mode(path, "H") not in basis:
        raise ConfigurationError(f"spatial label {path!r} is not in the basis")


def _identity(basis: ModeBasis) -> np.ndarray:
    return np.eye(len(basis), dtype=np.complex128)


def npbs_unitary(
    basis: ModeBasis, input_path: str, outputs: tuple[str, str]
) -> ModeUnitary:
    """50/50 non-polarizing splitter from ``input_path`` to ``outputs``."""
    t, r = outputs
    if len({input_path, t, r}) != 3:
        raise ConfigurationError(
            f"splitter labels must be distinct, got {input_path!r} -> {outputs!r}"
        )
    for path in (input_path, t, r):
        _require_path(basis, path)
    u = _identity(basis)
    rt2 = 1.0 / math.sqrt(2.0)
    for pol, phase in (("H", 1j), ("V", -1j)):
        c = basis.index(Mode(input_path, pol))
        a = basis.index(Mode(t, pol))
        b = basis.index(Mode(r, pol))
        u[:, [c, a, b]] = 0.0
        u[a, c] = rt2
        u[b, c] = phase * rt2
        u[c, a] = 1.0
        u[a, b] = rt2
        u[b, b] = -phase * rt2
    return ModeUnitary(basis, u)


def _embed_polarization_block(
    basis: ModeBasis, path: str, block: np.ndarray
) -> ModeUnitary:
    _require_path(basis, path)
    u = _identity(basis)
    h = basis.index(Mode(path, "H"))
    v = basis.index(Mode(path, "V"))
    u[np.ix_([h, v], [h, v])] = block
    return ModeUnitary(basis, u)


def hwp_unitary(
    basis: ModeBasis,
    path: str,
    setting: "WaveplateSetting | float",
    convention: str = "rotation",
) -> ModeUnitary:
    """Half-wave plate at ``setting`` acting on ``path``."""
    if convention not in HWP_CONVENTIONS:
        raise ConfigurationError(
            f"unknown half-wave plate convention {convention!r}; "
            f"expected one of {HWP_CONVENTIONS}"
        )
    a = _angle(setting)
    c2, s2 = math.cos(2.0 * a), math.sin(2.0 * a)
    if convention == "rotation":
        block = np.array([[c2, -s2], [s2, c2]], dtype=np.complex128)
    else:
        block = np.array([[c2, s2], [s2, -c2]], dtype=np.complex128)
    return _embed_polarization_block(basis, path, block)


def qwp_unitary(
    basis: ModeBasis, path: str, setting: "WaveplateSetting | float"
) -> ModeUnitary:
    """Quarter-wave plate at ``setting`` acting on ``path``."""
    a = _angle(setting)
    c, s = math.cos(a), math.sin(a)
    rot = np.array([[c, -s], [s, c]], dtype=np.complex128)
    retard = np.diag([1.0, 1.0j]).astype(np.complex128)
    block = rot @ retard @ rot.T
    return _embed_polarization_block(basis, path, block)


def pbs_routing(
    basis: ModeBasis, input_path: str, outputs: tuple[str, str]
) -> ModeUnitary:
    """Polarizing splitter: H transmits to ``outputs[0]``, V reflects to ``outputs[1]``."""
    t, r = outputs
    if len({input_path, t, r}) != 3:
        raise ConfigurationError(
            f"splitter labels must be distinct, got {input_path!r} -> {outputs!r}"
        )
    for path in (input_path, t, r):
        _require_path(basis, path)
    u = _identity(basis)
    for pol, out in (("H", t), ("V", r)):
        src = basis.index(Mode(input_path, pol))
        dst = basis.index(Mode(out, pol))
        # Swap the two modes so the matrix stays a permutation.
        u[:, [src, dst]] = 0.0
        u[dst, src] = 1.0
        u[src, dst] = 1.0
    return ModeUnitary(basis, u)


def compose(elements: Sequence[ModeUnitary]) -> ModeUnitary:
    """Product of element unitaries in order of application (first acts first)."""
    if not elements:
        raise ConfigurationError("compose needs at least one element")
    return reduce(lambda acc, el: el @ acc, elements[1:], elements[0])


@dataclass(frozen=True)
class ElementSpec:
    """Declarative description of one element, buildable on any basis.

    ``kind`` is one of ``npbs``, ``pbs`` (which use ``input_path`` and
    ``outputs``) or ``hwp``, ``qwp`` (which use ``path`` and ``setting``).
    """

    kind: str
    path: str | None = None
    input_path: str | None = None
    outputs: tuple[str, str] | None = None
    setting: WaveplateSetting | None = None
    convention: str = "rotation"

    def __post_init__(self) -> None:
        if self.kind in ("npbs", "pbs"):
            if self.input_path is None or self.outputs is None:
                raise ConfigurationError(
                    f"{self.kind} element needs input_path and outputs"
                )
        elif self.kind in ("hwp", "qwp"):
            if self.path is None or self.setting is None:
                raise ConfigurationError(f"{self.kind} element needs path and setting")
        else:
            raise ConfigurationError(f"unknown element kind {self.kind!r}")

    def build(self, basis: ModeBasis) -> ModeUnitary:
        if self.kind == "npbs":
            return npbs_unitary(basis, self.input_path, self.outputs)
        if self.kind == "pbs":
            return pbs_routing(basis, self.input_path, self.outputs)
        if self.kind == "hwp":
            return hwp_unitary(basis, self.path, self.setting, self.convention)
        return qwp_unitary(basis, self.path, self.setting)
