"""Command-line front end.

Subcommands::

    biphoton simulate CONFIG --out FILE [--point N]   write one stream
    biphoton analyze INPUT [...]                      count a stream file
    biphoton scan KIND CONFIG --out-dir DIR           run a scan series
    biphoton chsh CONFIG                              Bell sum at 4 settings
    biphoton report CONFIG [CONFIG ...] --out-dir DIR data + figures

Exit codes: 0 success, 2 configuration error, 3 stream-format error,
4 insufficient data.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .analytic import VisibilityPair, chsh_from_visibility
from .engine import (
    AnalysisConfig,
    BELL_PAIRS,
    COALESCENCE_PAIRS,
    count_coincidences,
    write_bins_csv,
)
from .errors import BiphotonError, ConfigurationError, FormatError
from .experiments import (
    EXPERIMENT_KINDS,
    ExperimentConfig,
    ScanSeries,
    fit_scan_visibility,
    point_context,
    run_chsh,
    run_experiment,
    simulate_point,
    write_points_csv,
    write_series_bins_csv,
    write_series_json,
)
from .timetags import read_ttag_bytes, write_ttag

__all__ = ["main"]

_PAIR_SETS = {"bell": BELL_PAIRS, "coalescence": COALESCENCE_PAIRS, "all": None}


def _load_config(path: str, args) -> ExperimentConfig:
    try:
        cfg = ExperimentConfig.from_json_file(path)
    except FileNotFoundError as exc:
        raise ConfigurationError(f"config file not found: {path}") from exc
    overrides = {}
    for attr in ("seed", "duration_s", "window_ps"):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[attr] = value
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _parse_offsets(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigurationError(
            f"offsets must be comma-separated integers, got {text!r}"
        ) from exc


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config, args)
    setting, ensemble, circuit, damper = point_context(cfg, args.point)
    stream = simulate_point(cfg, args.point, ensemble, circuit, damper)
    write_ttag(stream, args.out)
    described = ", ".join(f"{k}={v:g}" for k, v in setting.items())
    print(f"wrote {args.out}: {len(stream)} records ({described})")
    return 0


def _read_stream(source: str):
    if source == "-":
        return read_ttag_bytes(sys.stdin.buffer.read())
    try:
        data = Path(source).read_bytes()
    except FileNotFoundError as exc:
        raise FormatError(f"stream file not found: {source}") from exc
    return read_ttag_bytes(data)


def _cmd_analyze(args) -> int:
    stream = _read_stream(args.input)
    config = AnalysisConfig(
        window_ps=args.window_ps if args.window_ps is not None else 2000,
        bin_ps=args.bin_ps,
        offsets_ps=_parse_offsets(args.offsets_ps),
        pairs=_PAIR_SETS[args.pairs],
    )
    report = count_coincidences(stream, config)
    summary = json.dumps(report.to_dict(), indent=2)
    if args.json:
        Path(args.json).write_text(summary + "\n")
        print(f"wrote {args.json}")
    else:
        print(summary)
    if args.csv:
        write_bins_csv(report, args.csv)
        print(f"wrote {args.csv}")
    return 0


def _write_series(series: ScanSeries, out_dir: Path, name: str) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    json_path = out_dir / f"{name}.json"
    write_series_json(series, json_path)
    written.append(json_path)
    points_path = out_dir / f"{name}_points.csv"
    write_points_csv(series, points_path)
    written.append(points_path)
    bins_path = out_dir / f"{name}_bins.csv"
    if write_series_bins_csv(series, bins_path):
        written.append(bins_path)
    return written


def _fit_summary(series: ScanSeries) -> list[str]:
    lines = []
    names = ["r_pm"] if series.kind == "fixed" else []
    if series.kind == "twin":
        names = ["r_pm", "doubles_a"]
    for name in names:
        try:
            fit = fit_scan_visibility(series, name)
        except BiphotonError:
            continue
        lines.append(
            f"  {name}: V = {fit.visibility:.4f}, "
            f"r0 = {fit.base_rate:.1f}/s, phase = {fit.phase_rad:+.3f} rad"
        )
    return lines


def _cmd_scan(args) -> int:
    cfg = _load_config(args.config, args)
    if cfg.kind != args.kind:
        raise ConfigurationError(
            f"config has kind {cfg.kind!r} but the scan command asked for "
            f"{args.kind!r}"
        )
    series = run_experiment(cfg)
    name = args.name or cfg.kind
    for path in _write_series(series, Path(args.out_dir), name):
        print(f"wrote {path}")
    for line in _fit_summary(series):
        print(line)
    return 0


def _cmd_chsh(args) -> int:
    cfg = _load_config(args.config, args)
    result = run_chsh(cfg)
    for (alpha, beta), e in zip(result.settings_deg, result.correlations):
        print(f"  E({alpha:g}, {beta:g}) = {e:+.4f}")
    print(f"S = {result.s_value:.4f} ({result.mode})")
    return 0


def _cmd_report(args) -> int:
    from .plots import render_series

    out_dir = Path(args.out_dir)
    used_names: dict[str, int] = {}
    fixed_fits: list[tuple[float, float]] = []
    for config_path in args.configs:
        cfg = _load_config(config_path, args)
        series = run_experiment(cfg)
        count = used_names.get(cfg.kind, 0)
        used_names[cfg.kind] = count + 1
        name = cfg.kind if count == 0 else f"{cfg.kind}_{count + 1}"
        for path in _write_series(series, out_dir, name):
            print(f"wrote {path}")
        figure = render_series(series, out_dir / f"{name}.png", dpi=args.dpi)
        print(f"wrote {figure}")
        for line in _fit_summary(series):
            print(line)
        if series.kind == "fixed":
            try:
                fit = fit_scan_visibility(series, "r_pm")
            except BiphotonError:
                fit = None
            if fit is not None:
                fixed_fits.append((cfg.alpha_deg, fit.visibility))
    by_alpha = dict(fixed_fits)
    if len(fixed_fits) == 2 and {0.0, 22.5} <= set(by_alpha):
        s_value = chsh_from_visibility(
            VisibilityPair(v_rect=by_alpha[0.0], v_diag=by_alpha[22.5])
        )
        print(
            f"Bell sum from fitted visibilities "
            f"(rect {by_alpha[0.0]:.4f}, diag {by_alpha[22.5]:.4f}): "
            f"S = {s_value:.4f}"
        )
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biphoton",
        description=(
            "Simulate polarization-entangled photon-pair experiments and "
            "analyze time-tag streams."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write one simulated stream file")
    sim.add_argument("config", help="experiment config (JSON)")
    sim.add_argument("--out", required=True, help="output stream file")
    sim.add_argument("--point", type=int, default=0, help="scan point index")
    sim.add_argument("--seed", type=int, help="override config seed")
    sim.add_argument("--duration-s", type=float, help="override point duration")
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="count coincidences in a stream")
    ana.add_argument("input", help="stream file, or '-' for standard input")
    ana.add_argument("--window-ps", type=int, help="full coincidence window")
    ana.add_argument("--bin-ps", type=int, default=10**12, help="bin width")
    ana.add_argument(
        "--offsets-ps", help="per-channel delays, comma separated"
    )
    ana.add_argument(
        "--pairs",
        choices=sorted(_PAIR_SETS),
        default="all",
        help="named channel-pair set to count",
    )
    ana.add_argument("--json", help="write the summary here instead of stdout")
    ana.add_argument("--csv", help="also write per-bin counts here")
    ana.set_defaults(func=_cmd_analyze)

    scan = sub.add_parser("scan", help="run a scan series to data files")
    scan.add_argument("kind", choices=EXPERIMENT_KINDS)
    scan.add_argument("config", help="experiment config (JSON)")
    scan.add_argument("--out-dir", required=True)
    scan.add_argument("--name", help="output basename (default: the kind)")
    scan.add_argument("--seed", type=int, help="override config seed")
    scan.add_argument("--duration-s", type=float, help="override point duration")
    scan.add_argument("--window-ps", type=int, help="override coincidence window")
    scan.set_defaults(func=_cmd_scan)

    chsh = sub.add_parser(
        "chsh", help="measure the Bell sum at the four standard settings"
    )
    chsh.add_argument(
        "config", help="experiment config (JSON); the scan grid is ignored"
    )
    chsh.add_argument("--seed", type=int, help="override config seed")
    chsh.add_argument("--duration-s", type=float, help="override point duration")
    chsh.add_argument("--window-ps", type=int, help="override coincidence window")
    chsh.set_defaults(func=_cmd_chsh)

    rep = sub.add_parser(
        "report", help="run configs and render figures beside the data"
    )
    rep.add_argument("configs", nargs="+", help="experiment configs (JSON)")
    rep.add_argument("--out-dir", required=True)
    rep.add_argument("--dpi", type=int, default=150)
    rep.add_argument("--seed", type=int, help="override config seed")
    rep.add_argument("--duration-s", type=float, help="override point duration")
    rep.add_argument("--window-ps", type=int, help="override coincidence window")
    rep.set_defaults(func=_cmd_report)

    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except BiphotonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
