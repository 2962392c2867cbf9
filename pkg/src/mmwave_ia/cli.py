"""Command-line surface: run the experiments and emit CSV/JSON artifacts.

Subcommands::

    delay-table      slot counts and discovery delay per scheme
    sweep-distance   PMD vs. BS-UE distance (one row per scheme and bin)
    sweep-tsig       PMD vs. signal duration at a fixed distance
    min-tsig         minimum signal duration meeting the PMD target

Every run writes its artifacts atomically plus a manifest JSON holding
the fully resolved configuration, the master seed and a sha256 of each
artifact, so any result file can be reproduced bit for bit.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from . import sim as simmod
from .config import ConfigError, RunConfig, default_run_config, load_config, serialize_config
from .protocols import slots_required
from .sim import (
    DelayReport,
    delay_report,
    equivalent_threshold,
    margins_at_distance,
    min_tsig_for_pmd,
    pmd_from_margins,
    sweep_bins,
    total_delay,
    tsig_grid,
    wilson_halfwidth,
)

MIN_TSIG_CAP_SENTINEL = ">cap"


def _atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_manifest(out_dir: Path, command: str, cfg: RunConfig, artifacts: list[Path]) -> Path:
    hashes = {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in artifacts
    }
    manifest = {
        "command": command,
        "master_seed": cfg.sim.master_seed,
        "config_ini": serialize_config(cfg),
        "artifacts": hashes,
    }
    path = out_dir / f"{command.replace('-', '_')}_manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return path


def _fmt_us(seconds: float) -> str:
    return f"{seconds * 1e6:g} us"


def _fmt_ms(seconds: float) -> str:
    if math.isinf(seconds):
        return "inf"
    return f"{seconds * 1e3:g} ms"


def cmd_delay_table(cfg: RunConfig) -> list[Path]:
    reports = [delay_report(s, cfg.sim) for s in cfg.schemes]
    rows = [[r.scheme, r.n_slots, r.t_sig_s, r.t_per_s, r.delay_s] for r in reports]
    csv_path = cfg.output_dir / "delay_table.csv"
    _atomic_write(csv_path, _csv_text(["scheme", "n_slots", "t_sig_s", "t_per_s", "delay_s"], rows))

    width = max(len(r.scheme) for r in reports)
    lines = [f"{'scheme':<{width}}  {'N_s':>5}  {'T_sig':>10}  {'T_per':>10}  {'delay':>10}"]
    for r in reports:
        lines.append(
            f"{r.scheme:<{width}}  {r.n_slots:>5}  {_fmt_us(r.t_sig_s):>10}  "
            f"{_fmt_us(r.t_per_s):>10}  {_fmt_ms(r.delay_s):>10}"
        )
    txt_path = cfg.output_dir / "delay_table.txt"
    _atomic_write(txt_path, "\n".join(lines) + "\n")
    return [csv_path, txt_path]


def cmd_sweep_distance(cfg: RunConfig, workers: int) -> list[Path]:
    estimates = sweep_bins(list(cfg.schemes), cfg.sim, cfg.channel, workers=workers)
    rows = []
    for scheme in cfg.schemes:
        for est in estimates[scheme.label]:
            rows.append(
                [
                    scheme.label,
                    est.bin.inner_m,
                    est.bin.outer_m,
                    est.trials,
                    est.misdetections,
                    est.pmd,
                    est.ci95_halfwidth,
                ]
            )
    path = cfg.output_dir / "sweep_distance.csv"
    _atomic_write(
        path,
        _csv_text(
            ["scheme", "inner_m", "outer_m", "trials", "misdetections", "pmd", "ci95"], rows
        ),
    )
    return [path]


def cmd_sweep_tsig(cfg: RunConfig, workers: int, distance: float) -> list[Path]:
    margins = margins_at_distance(list(cfg.schemes), distance, cfg.sim, cfg.channel, workers)
    grid = tsig_grid(cfg.sim.t_sig_s, cfg.sim.t_sig_cap_s)
    rows = []
    for scheme in cfg.schemes:
        for t_sig in grid:
            tau_eff = equivalent_threshold(cfg.sim.snr_threshold_db, t_sig, cfg.sim.t_sig_s)
            k, pmd = pmd_from_margins(margins[scheme.label], tau_eff)
            rows.append(
                [scheme.label, t_sig * 1e6, tau_eff, pmd, wilson_halfwidth(k, cfg.sim.trials)]
            )
    path = cfg.output_dir / "sweep_tsig.csv"
    _atomic_write(path, _csv_text(["scheme", "t_sig_us", "tau_eff_db", "pmd", "ci95"], rows))
    return [path]


def cmd_min_tsig(cfg: RunConfig, workers: int, distance: float, target: float) -> list[Path]:
    margins = margins_at_distance(list(cfg.schemes), distance, cfg.sim, cfg.channel, workers)
    rows = []
    lines = [f"{'scheme':<12}  {'N_s':>5}  {'min T_sig':>12}  {'total delay':>12}"]
    for scheme in cfg.schemes:
        n_slots = slots_required(scheme)
        t_min = min_tsig_for_pmd(
            scheme, cfg.sim, distance, target, cfg.channel, margins=margins[scheme.label]
        )
        delay = total_delay(n_slots, t_min, cfg.sim.overhead)
        t_cell = MIN_TSIG_CAP_SENTINEL if math.isinf(t_min) else t_min * 1e6
        d_cell = math.inf if math.isinf(delay) else delay * 1e3
        rows.append([scheme.label, n_slots, t_cell, d_cell])
        t_txt = MIN_TSIG_CAP_SENTINEL if math.isinf(t_min) else _fmt_us(t_min)
        lines.append(f"{scheme.label:<12}  {n_slots:>5}  {t_txt:>12}  {_fmt_ms(delay):>12}")
    csv_path = cfg.output_dir / "min_tsig.csv"
    _atomic_write(csv_path, _csv_text(["scheme", "n_slots", "min_t_sig_us", "total_delay_ms"], rows))
    txt_path = cfg.output_dir / "min_tsig.txt"
    _atomic_write(txt_path, "\n".join(lines) + "\n")
    return [csv_path, txt_path]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwave-ia",
        description="Monte Carlo simulator for directional initial access in mmWave cells",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("delay-table", "slot counts and discovery delays"),
        ("sweep-distance", "misdetection probability vs. distance"),
        ("sweep-tsig", "misdetection probability vs. signal duration"),
        ("min-tsig", "minimum signal duration meeting the PMD target"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, help="INI configuration file")
        p.add_argument("--trials", type=int, help="Monte Carlo trials per bin/grid point")
        p.add_argument("--seed", type=int, help="master seed for all substreams")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument(
            "--scheme",
            action="append",
            help="restrict to a configured scheme label (repeatable)",
        )
        p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
        if name in ("sweep-tsig", "min-tsig"):
            p.add_argument("--distance", type=float, help="BS-UE distance in meters")
        if name == "min-tsig":
            p.add_argument("--target", type=float, help="PMD target, e.g. 0.01")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_run_config()
    sim = cfg.sim
    if args.trials is not None:
        sim = dataclasses.replace(sim, trials=args.trials)
    if args.seed is not None:
        sim = dataclasses.replace(sim, master_seed=args.seed)
    schemes = cfg.schemes
    if args.scheme:
        by_label = {s.label: s for s in cfg.schemes}
        missing = [l for l in args.scheme if l not in by_label]
        if missing:
            raise ConfigError(f"unknown scheme label(s): {', '.join(missing)}")
        schemes = tuple(by_label[l] for l in args.scheme)
    out = args.out if args.out is not None else cfg.output_dir
    cfg = dataclasses.replace(cfg, sim=sim, schemes=schemes, output_dir=out)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        workers = max(1, args.workers)
        if args.command == "delay-table":
            artifacts = cmd_delay_table(cfg)
        elif args.command == "sweep-distance":
            artifacts = cmd_sweep_distance(cfg, workers)
        elif args.command == "sweep-tsig":
            distance = args.distance if args.distance is not None else cfg.sim.edge_distance_m
            artifacts = cmd_sweep_tsig(cfg, workers, distance)
        else:
            distance = args.distance if args.distance is not None else cfg.sim.edge_distance_m
            target = args.target if args.target is not None else cfg.sim.target_pmd
            artifacts = cmd_min_tsig(cfg, workers, distance, target)
        manifest = _write_manifest(cfg.output_dir, args.command, cfg, artifacts)
        for p in artifacts + [manifest]:
            print(p)
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
