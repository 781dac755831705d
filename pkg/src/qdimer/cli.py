"""Command-line front end: ``qdimer {spectrum,autocorr,eigenstates,sweep,converge}``."""

from __future__ import annotations

import argparse
import datetime
import json
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (
    contour_grid,
    analyze_modes,
    coupling_sweep,
    write_contour,
    write_crossings_json,
    write_mode_csv,
    write_sweep_csv,
)
from .config import RunConfig, format_value, resolve_config
from .dynamics import autocorrelation, decay_time, site_occupation_trace
from .errors import ConfigError, QDimerError
from .spectral import convergence_scan, solve
from .states import spectrum, write_spectrum_csv


def _prepare_out(cfg: RunConfig, command: str) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    # the output location lives in provenance.json so data files stay identical across directories
    (out / "run_config.txt").write_text(cfg.to_text(include_out=False))
    provenance = {
        "command": command,
        "out": str(out.resolve()),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
    }
    _write_json(out / "provenance.json", provenance)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _solve(cfg: RunConfig, params=None):
    return solve(cfg.basis, params or cfg.params, method=cfg.method, max_dim=cfg.max_dim)


def cmd_spectrum(cfg: RunConfig) -> dict:
    out = _prepare_out(cfg, "spectrum")
    eigs = _solve(cfg)
    state = cfg.recipe(cfg.basis)
    eigs_sym, _ = analyze_modes(eigs, cfg.thresholds)
    spec = spectrum(state, eigs_sym)
    _, records = analyze_modes(eigs_sym, cfg.thresholds, intensities=spec.intensities)
    write_spectrum_csv(spec, out / "spectrum.csv", [r.symmetry for r in records], [r.mode_class for r in records])
    write_mode_csv(records, out / "modes.csv")
    summary = {"parseval": spec.parseval, "leakage": spec.leakage, "truncation_leakage": spec.truncation_leakage,
               "mean_energy": spec.mean_energy}
    _write_json(out / "summary.json", summary)
    return summary


def _variant_tag(c_a: float) -> str:
    return format_value(float(c_a))


def cmd_autocorr(cfg: RunConfig) -> dict:
    out = _prepare_out(cfg, "autocorr")
    variants = cfg.c_a_list or (cfg.c_a,)
    grid = cfg.grid
    state = cfg.recipe(cfg.basis)
    summary = {}
    for c_a in variants:
        params = replace(cfg.params, c_a=float(c_a))
        eigs = _solve(cfg, params)
        series = autocorrelation(state, eigs, grid)
        tag = _variant_tag(c_a)
        series.write_csv(out / f"autocorr_ca_{tag}.csv")
        if cfg.occupations:
            site_occupation_trace(state, eigs, grid).write_csv(out / f"occupation_ca_{tag}.csv")
        peak = int(np.argmax(series.abs[1:])) + 1 if series.abs.size > 1 else 0
        summary[tag] = {
            "c_a": float(c_a),
            "abs_at_start": float(series.abs[0]),
            "decay_time": decay_time(series, cfg.decay_threshold, cfg.decay_t_min, cfg.decay_window),
            "max_abs_after_start": float(series.abs[peak]),
            "time_of_max": float(series.times[peak]),
        }
    _write_json(out / "autocorr_summary.json", summary)
    return summary


def cmd_eigenstates(cfg: RunConfig) -> dict:
    out = _prepare_out(cfg, "eigenstates")
    eigs = _solve(cfg)
    selected = set(int(k) for k in cfg.select_indices)
    for k in selected:
        if k >= eigs.dim:
            raise ConfigError(f"select_indices entry {k} exceeds the last eigen index {eigs.dim - 1}")
    if cfg.select_e_min is not None:
        inside = np.nonzero((eigs.values >= cfg.select_e_min) & (eigs.values <= cfg.select_e_max))[0]
        selected.update(int(k) for k in inside)
    manifest = []
    if selected:
        eigs_sym, records = analyze_modes(eigs, cfg.thresholds)
        plates = out / "contours"
        plates.mkdir(exist_ok=True)
        for k in sorted(selected):
            name = f"eigen_{k:05d}"
            write_contour(contour_grid(eigs_sym, k), records[k], plates / f"{name}.csv", plates / f"{name}.json")
            manifest.append({"eigen_index": k, "energy": records[k].energy, "csv": f"contours/{name}.csv",
                             "json": f"contours/{name}.json", "class": records[k].mode_class,
                             "symmetry": records[k].symmetry})
    _write_json(out / "manifest.json", manifest)
    return {"selected": len(manifest)}


def sweep_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.sweep_points == 1:
        return np.array([cfg.sweep_c_min])
    return np.linspace(cfg.sweep_c_min, cfg.sweep_c_max, cfg.sweep_points)


def cmd_sweep(cfg: RunConfig) -> dict:
    out = _prepare_out(cfg, "sweep")
    result = coupling_sweep(cfg.params, sweep_grid(cfg), cfg.levels, (cfg.sweep_e_min, cfg.sweep_e_max),
                            cfg.thresholds, workers=cfg.n_workers, overlap_min=cfg.overlap_min,
                            refine_depth=cfg.refine_depth, max_dim=cfg.max_dim,
                            crossing_gap_fraction=cfg.crossing_gap_fraction)
    write_sweep_csv(result, out / "sweep.csv")
    write_crossings_json(result, out / "crossings.json")
    return {"tracks": int(result.n_tracks), "avoided_crossings": len(result.crossings)}


def cmd_converge(cfg: RunConfig) -> dict:
    out = _prepare_out(cfg, "converge")
    report = convergence_scan(cfg.params, cfg.recipe, cfg.n_list, tol=cfg.conv_tol,
                              bottom_fraction=cfg.conv_bottom_fraction, method=cfg.method)
    payload = report.to_dict()
    _write_json(out / "convergence.json", payload)
    return {"converged": payload["converged"], "steps": len(payload["steps"])}


COMMANDS = {
    "spectrum": (cmd_spectrum, "projection spectrum and mode table of an initial state"),
    "autocorr": (cmd_autocorr, "autocorrelation series, one file per c_a variant"),
    "eigenstates": (cmd_eigenstates, "contour grids of selected eigenstates"),
    "sweep": (cmd_sweep, "coupling sweep with eigenvalue tracks and avoided crossings"),
    "converge": (cmd_converge, "truncation convergence report"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", dest="overrides", default=argparse.SUPPRESS,
                        help="override one config key (repeatable)")
    common.add_argument("--dry-run", action="store_true", default=argparse.SUPPRESS,
                        help="validate and print the resolved config without computing")
    parser = argparse.ArgumentParser(prog="qdimer", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, text) in COMMANDS.items():
        sub.add_parser(name, help=text, parents=[common])
    return parser


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    index = getattr(exc, "index", None)
    if index is not None:
        payload["index"] = index
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(getattr(args, "config", None), getattr(args, "overrides", ()) or (),
                             getattr(args, "out", None))
        if getattr(args, "dry_run", False):
            sys.stdout.write(cfg.to_text())
            return 0
        func = COMMANDS[args.command][0]
        summary = func(cfg)
    except QDimerError as exc:
        return _fail(exc, exc.exit_code)
    except (ValueError, np.linalg.LinAlgError, MemoryError) as exc:
        return _fail(exc, 3)
    print(json.dumps({"command": args.command, "out": cfg.out, **summary}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
