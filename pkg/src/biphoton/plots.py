"""Figure rendering for scan series.

One PNG per series, written next to the delimited output.  The backend is
forced to ``Agg`` so rendering works headless; nothing here opens a
window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import VisibilityFit
from .errors import ConfigurationError, InsufficientDataError
from .experiments import ScanSeries, fit_scan_visibility

__all__ = ["render_series"]

_CROSS_STYLE = {
    "r_pp": ("tab:blue", "o", "+/+"),
    "r_pm": ("tab:red", "s", "+/-"),
    "r_mp": ("tab:green", "^", "-/+"),
    "r_mm": ("tab:purple", "v", "-/-"),
}


def _fit_curve(fit: VisibilityFit, degrees: np.ndarray) -> np.ndarray:
    radians = np.radians(degrees)
    return fit.mean_rate * (
        1.0 + fit.visibility * np.cos(fit.harmonic * radians + fit.phase_rad)
    )


def _overlay_fit(ax, series: ScanSeries, name: str, color: str) -> None:
    try:
        fit = fit_scan_visibility(series, name)
    except (InsufficientDataError, ConfigurationError, KeyError):
        return
    key = "beta_deg" if series.kind == "fixed" else "theta_deg"
    grid = np.linspace(
        series.points[0].setting[key], series.points[-1].setting[key], 361
    )
    ax.plot(
        grid,
        _fit_curve(fit, grid),
        color=color,
        alpha=0.5,
        lw=1.2,
        label=f"{name} fit, V={fit.visibility:.3f}",
    )


def _angle_axis(series: ScanSeries) -> tuple[np.ndarray, str]:
    key = "beta_deg" if series.kind == "fixed" else "theta_deg"
    label = (
        "analyzer B angle (deg)" if series.kind == "fixed" else "analyzer angle (deg)"
    )
    return series.settings(key), label


def _plot_cross(ax, series: ScanSeries) -> None:
    x, xlabel = _angle_axis(series)
    for name, (color, marker, label) in _CROSS_STYLE.items():
        ax.plot(
            x,
            series.rates_of(name),
            marker=marker,
            ms=4,
            ls="none",
            color=color,
            label=label,
        )
    _overlay_fit(ax, series, "r_pm", _CROSS_STYLE["r_pm"][0])
    ax.set_xlabel(xlabel)
    ax.set_ylabel("coincidences / s")
    ax.legend(fontsize=8, ncol=2)


def _figure_fixed(series: ScanSeries):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    _plot_cross(ax, series)
    cfg = series.config
    ax.set_title(
        f"Analyzer scan, A at {cfg.alpha_deg:g} deg, "
        f"{cfg.temperature_c:g} C ({series.mode})"
    )
    return fig


def _figure_twin(series: ScanSeries):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.4, 7.0), sharex=True)
    _plot_cross(top, series)
    top.set_xlabel("")
    top.set_title(
        f"Twin analyzer scan, {series.config.temperature_c:g} C ({series.mode})"
    )
    x, xlabel = _angle_axis(series)
    for name, color in (("doubles_a", "tab:orange"), ("doubles_b", "tab:brown")):
        bottom.plot(
            x, series.rates_of(name), "o", ms=4, color=color, label=name
        )
        _overlay_fit(bottom, series, name, color)
    bottom.set_xlabel(xlabel)
    bottom.set_ylabel("double counts / s")
    bottom.legend(fontsize=8)
    return fig


def _figure_temperature(series: ScanSeries):
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(6.4, 7.0), sharex=True)
    x = series.settings("temperature_c")
    cross_total = np.zeros(len(series.points))
    for name in ("r_pp", "r_pm", "r_mp", "r_mm"):
        cross_total += np.nan_to_num(series.rates_of(name))
    top.plot(x, cross_total, "o-", ms=4, color="tab:blue")
    top.set_ylabel("cross coincidences / s")
    top.set_title(f"Temperature sweep, analyzers at 22.5 deg ({series.mode})")
    has_e = [p for p in series.points if p.correlation is not None]
    bottom.plot(
        [p.setting["temperature_c"] for p in has_e],
        [p.correlation for p in has_e],
        "s-",
        ms=4,
        color="tab:red",
    )
    bottom.axhline(0.0, color="gray", lw=0.6)
    bottom.set_ylim(-1.1, 1.1)
    bottom.set_xlabel("crystal temperature (C)")
    bottom.set_ylabel("E in diagonal basis")
    return fig


def _figure_coalescence(series: ScanSeries):
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    x = series.settings("theta_deg")
    for name, color, label in (
        ("r20_tr", "tab:blue", "pair split across one port's splitter"),
        ("r11_t", "tab:red", "pair split across PBS ports (t arm)"),
        ("r11_r", "tab:green", "pair split across PBS ports (r arm)"),
    ):
        ax.plot(x, series.rates_of(name), "o-", ms=4, color=color, label=label)
    cfg = series.config
    ax.set_title(
        f"Coalescence scan, {cfg.waveplate} plate, "
        f"{cfg.temperature_c:g} C ({series.mode})"
    )
    ax.set_xlabel("waveplate angle (deg)")
    ax.set_ylabel("coincidences / s")
    ax.legend(fontsize=8)
    return fig


_FIGURES = {
    "fixed": _figure_fixed,
    "twin": _figure_twin,
    "temperature": _figure_temperature,
    "coalescence": _figure_coalescence,
}


def render_series(series: ScanSeries, path: "str | Path", dpi: int = 150) -> Path:
    """Render the series to a PNG file and return its path."""
    builder = _FIGURES.get(series.kind)
    if builder is None:
        raise ConfigurationError(f"no figure defined for series kind {series.kind!r}")
    fig = builder(series)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
    return path
