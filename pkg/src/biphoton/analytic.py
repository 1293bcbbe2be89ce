"""Closed-form coincidence rates, correlations, and Bell-sum predictions.

All angles are half-wave-plate rotation angles in radians (a plate at angle
``a`` rotates polarization by ``2a``, so rates modulate as ``cos 4a``).
``r0`` always denotes the *total* cross-arm coincidence rate, i.e. the sum
of the four analyzer combinations, so each combination averages ``r0 / 4``.

Visibility enters purely as a damping factor on the modulated term,
``r = (r0/4) (1 -/+ V cos ...)``: no detector noise model is implied.  The
rectilinear and diagonal scan visibilities can differ; for an intermediate
analyzer angle the effective visibility interpolates between the two with
the natural ``cos^2 4a`` weight, which leaves the anchor settings exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import DomainError, UndefinedCorrelationError

__all__ = [
    "RateQuad",
    "VisibilityPair",
    "DEFAULT_CHSH_SETTINGS",
    "effective_visibility",
    "singlet_rates",
    "sum_angle_rates",
    "mixed_rates",
    "doubles_rate",
    "correlation",
    "chsh_from_visibility",
    "chsh_from_correlations",
]

# Analyzer settings (a, b), (a, b'), (a', b), (a', b') that maximize the
# Bell sum for a singlet: 0, pi/8 on one arm against pi/16, 3 pi/16 on the
# other (half-wave-plate angles, i.e. polarization analysis every 22.5 deg).
DEFAULT_CHSH_SETTINGS = (
    (0.0, math.pi / 16.0),
    (0.0, 3.0 * math.pi / 16.0),
    (math.pi / 8.0, math.pi / 16.0),
    (math.pi / 8.0, 3.0 * math.pi / 16.0),
)


@dataclass(frozen=True)
class RateQuad:
    """The four cross-arm coincidence rates ``(+,+), (+,-), (-,+), (-,-)``."""

    r_pp: float
    r_pm: float
    r_mp: float
    r_mm: float

    def __post_init__(self) -> None:
        for name, value in self.as_dict().items():
            if value < -1e-12:
                raise DomainError(f"negative rate {name}={value!r}")

    def as_dict(self) -> dict[str, float]:
        return {
            "r_pp": self.r_pp,
            "r_pm": self.r_pm,
            "r_mp": self.r_mp,
            "r_mm": self.r_mm,
        }

    @property
    def total(self) -> float:
        return self.r_pp + self.r_pm + self.r_mp + self.r_mm


@dataclass(frozen=True)
class VisibilityPair:
    """Scan visibilities in the rectilinear and diagonal analysis bases."""

    v_rect: float = 1.0
    v_diag: float = 1.0

    def __post_init__(self) -> None:
        for name, v in (("v_rect", self.v_rect), ("v_diag", self.v_diag)):
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name}={v!r} outside [0, 1]")


def effective_visibility(vis: VisibilityPair | None, alpha_rad: float) -> float:
    """Visibility at a fixed analyzer angle, blending the two basis values."""
    if vis is None:
        return 1.0
    c = math.cos(4.0 * alpha_rad) ** 2
    return vis.v_rect * c + vis.v_diag * (1.0 - c)


def _check_rate(r0: float) -> None:
    if r0 < 0.0:
        raise DomainError(f"negative total rate r0={r0!r}")


def _quad_from_modulation(r0: float, m: float) -> RateQuad:
    anti = 0.25 * r0 * (1.0 + m)
    corr = 0.25 * r0 * (1.0 - m)
    return RateQuad(r_pp=corr, r_pm=anti, r_mp=anti, r_mm=corr)


def singlet_rates(
    alpha_rad: float,
    beta_rad: float,
    r0: float,
    vis: VisibilityPair | None = None,
) -> RateQuad:
    """Cross-arm rates for a polarization singlet: difference-angle law.

    Ideal form ``r_pm = (r0/2) cos^2 2(alpha - beta)`` and
    ``r_pp = (r0/2) sin^2 2(alpha - beta)``, damped by the visibility.
    """
    _check_rate(r0)
    v = effective_visibility(vis, alpha_rad)
    return _quad_from_modulation(r0, v * math.cos(4.0 * (alpha_rad - beta_rad)))


def sum_angle_rates(
    alpha_rad: float,
    beta_rad: float,
    r0: float,
    vis: VisibilityPair | None = None,
) -> RateQuad:
    """Cross-arm rates when the pair carries an antisymmetric exchange label.

    Same sinusoids as the singlet but modulating in ``alpha + beta``:
    ``r_pm = (r0/2) cos^2 2(alpha + beta)``.  Mirroring one analyzer angle
    maps this onto the difference-angle law.
    """
    _check_rate(r0)
    v = effective_visibility(vis, alpha_rad)
    return _quad_from_modulation(r0, v * math.cos(4.0 * (alpha_rad + beta_rad)))


def mixed_rates(
    alpha_rad: float,
    beta_rad: float,
    r0: float,
    degeneracy_weight: float,
    exchange_phase: float,
    vis: VisibilityPair | None = None,
) -> RateQuad:
    """Cross-arm rates of the general source mixture.

    The identical-photon component modulates in ``alpha - beta``; the
    labeled component contributes
    ``cos 4a cos 4b + cos(phi) sin 4a sin 4b``, which reduces to the
    difference-angle law at ``phi = 0`` and the sum-angle law at
    ``phi = pi``.
    """
    _check_rate(r0)
    if not 0.0 <= degeneracy_weight <= 1.0:
        raise DomainError(f"degeneracy weight {degeneracy_weight!r} outside [0, 1]")
    w = degeneracy_weight
    m_ident = math.cos(4.0 * (alpha_rad - beta_rad))
    m_label = math.cos(4.0 * alpha_rad) * math.cos(4.0 * beta_rad) + math.cos(
        exchange_phase
    ) * math.sin(4.0 * alpha_rad) * math.sin(4.0 * beta_rad)
    v = effective_visibility(vis, alpha_rad)
    return _quad_from_modulation(r0, v * (w * m_ident + (1.0 - w) * m_label))


def doubles_rate(theta_rad: float, r0: float, mode: str = "indistinguishable") -> float:
    """Same-arm double-count rate in a twin rotation of both analyzers.

    Identical photons interfere destructively in the orderings and give
    ``(r0/2) cos^2 4 theta``; distinguishable photons add probabilities and
    give ``(r0/4) (1 + cos^2 4 theta)``, matching at ``theta = 0``.
    """
    _check_rate(r0)
    c2 = math.cos(4.0 * theta_rad) ** 2
    if mode == "indistinguishable":
        return 0.5 * r0 * c2
    if mode == "distinguishable":
        return 0.25 * r0 * (1.0 + c2)
    raise DomainError(f"unknown doubles mode {mode!r}")


def correlation(rates: RateQuad) -> float:
    """Polarization correlation ``E`` from the four cross-arm rates."""
    total = rates.total
    if total <= 0.0:
        raise UndefinedCorrelationError(
            "correlation undefined: total coincidence rate is zero"
        )
    return (rates.r_pp + rates.r_mm - rates.r_pm - rates.r_mp) / total


def chsh_from_visibility(vis: VisibilityPair) -> float:
    """Bell sum implied by ideal sinusoids damped to the two visibilities."""
    return 2.0 * math.sqrt(2.0) * 0.5 * (vis.v_rect + vis.v_diag)


def chsh_from_correlations(
    e_fn: Callable[[float, float], float],
    settings: Sequence[tuple[float, float]] = DEFAULT_CHSH_SETTINGS,
) -> float:
    """Bell sum ``|E(a,b) - E(a,b') + E(a',b) + E(a',b')|``.

    ``settings`` lists the four analyzer pairs in exactly that order.
    """
    if len(settings) != 4:
        raise DomainError(f"expected 4 setting pairs, got {len(settings)}")
    e1, e2, e3, e4 = (e_fn(a, b) for a, b in settings)
    return abs(e1 - e2 + e3 + e4)
