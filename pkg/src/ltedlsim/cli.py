"""Experiment harness: config files, scheduler/UE-count/seed sweeps, and the CLI."""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import engine, metrics
from .engine import SimConfig
from .errors import ConfigError
from .report import write_outputs

DEFAULT_SCHEDULERS = ("FLS", "EXP", "LOG")
DEFAULT_UE_COUNTS = (10, 20, 30, 40, 50, 60)
DEFAULT_SEED_COUNT = 5


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "on", "yes"):
        return True
    if lowered in ("0", "false", "off", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# config-file key -> (SimConfig field, parser)
CONFIG_KEYS = {
    "duration_s": ("duration_s", float),
    "bandwidth_mhz": ("bandwidth_hz", lambda s: float(s) * 1e6),
    "cell_radius_m": ("cell_radius_m", float),
    "ue_speed_kmph": ("ue_speed_kmph", float),
    "n_ues": ("n_ues", int),
    "scheduler": ("scheduler", str),
    "seed": ("seed", int),
    "video_trace": ("video_trace_path", str),
    "video_bitrate_kbps": ("video_bitrate_kbps", float),
    "video_fps": ("video_fps", int),
    "video_trace_frames": ("video_trace_frames", int),
    "delay_budget_s": ("delay_budget_s", float),
    "voip_on_mean_s": ("voip_on_mean_s", float),
    "voip_off_mean_s": ("voip_off_mean_s", float),
    "voip_packet_bytes": ("voip_packet_bytes", int),
    "voip_interval_s": ("voip_interval_s", float),
    "tx_power_dbm": ("tx_power_dbm", float),
    "noise_figure_db": ("noise_figure_db", float),
    "shadowing_sigma_db": ("shadowing_sigma_db", float),
    "fading": ("fading_enabled", _parse_bool),
    "interference": ("interference_enabled", _parse_bool),
    "interferer_load": ("interferer_load", float),
    "neighbor_activity": ("neighbor_activity", float),
    "neighbor_cycle_s": ("neighbor_cycle_s", float),
    "turn_epoch_mean_s": ("turn_epoch_mean_s", float),
    "placement": ("placement", str),
    "t_pf": ("t_pf", int),
    "exp_variant": ("exp_variant", str),
    "exp_beta": ("exp_beta", float),
    "exp_eta": ("exp_eta", float),
    "exp_a_factor": ("exp_a_factor", float),
    "log_c": ("log_c", float),
    "log_a_factor": ("log_a_factor", float),
    "fls_budget_fraction": ("fls_budget_fraction", float),
}


def parse_config(text: str) -> SimConfig:
    """Parse `key = value` lines into a SimConfig; unknown keys are rejected.

    `#` starts a comment; unspecified keys keep their scenario defaults.
    """
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value' at line {lineno}: {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r} at line {lineno}")
        field_name, cast = CONFIG_KEYS[key]
        try:
            overrides[field_name] = cast(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r} at line {lineno}: {exc}") from None
    config = replace(SimConfig(), **overrides)
    config.validate()
    return config


def load_config(path: str | Path | None) -> SimConfig:
    if path is None:
        config = SimConfig()
        config.validate()
        return config
    return parse_config(Path(path).read_text())


@dataclass
class SweepSpec:
    """A scheduler x UE-count x seed grid over a shared base configuration."""

    base: SimConfig
    schedulers: tuple[str, ...] = DEFAULT_SCHEDULERS
    ue_counts: tuple[int, ...] = DEFAULT_UE_COUNTS
    seeds: tuple[int, ...] = tuple(range(1, DEFAULT_SEED_COUNT + 1))

    def validate(self):
        if not self.schedulers:
            raise ConfigError("sweep needs at least one scheduler")
        if not self.ue_counts:
            raise ConfigError("sweep needs at least one UE count")
        if not self.seeds:
            raise ConfigError("sweep needs at least one seed")

    def configs(self) -> list[SimConfig]:
        out = []
        for scheduler in self.schedulers:
            for n_ues in sorted(set(self.ue_counts)):
                for seed in self.seeds:
                    cfg = replace(self.base, scheduler=scheduler, n_ues=n_ues, seed=seed)
                    try:
                        cfg.validate()
                    except ConfigError as exc:
                        raise ConfigError(
                            f"run scheduler={scheduler} n_ues={n_ues} seed={seed}: {exc}"
                        ) from None
                    out.append(cfg)
        return out


def run_sweep(spec: SweepSpec, jobs: int = 1) -> list[metrics.KpiReport]:
    """Run the grid and return one seed-averaged report per (scheduler, UE count).

    Output order is deterministic (scheduler order as given, UE counts
    ascending) regardless of how the runs are parallelized; the seeds are
    shared across schedulers, so comparisons are paired.
    """
    spec.validate()
    configs = spec.configs()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(engine.run, configs, chunksize=1))
    else:
        results = [engine.run(cfg) for cfg in configs]

    by_point: dict[tuple[str, int], list[metrics.KpiReport]] = {}
    for cfg, report in zip(configs, results):
        by_point.setdefault((cfg.scheduler, cfg.n_ues), []).append(report)
    return [
        metrics.aggregate(by_point[(scheduler, n_ues)])
        for scheduler in spec.schedulers
        for n_ues in sorted(set(spec.ue_counts))
    ]


def _print_report(report: metrics.KpiReport):
    print(f"scheduler={report.scheduler} n_ues={report.n_ues} "
          f"seeds={report.seeds} duration={report.duration_s:g}s")
    print(f"{'class':>12} {'throughput':>14} {'delay':>10} {'plr':>10} "
          f"{'fairness':>10} {'speff':>10}")
    for cls in metrics.CLASS_KEYS:
        kpi = report.per_class[cls]
        print(f"{cls:>12} {kpi.throughput_bps / 1e6:>12.4f}Mb {kpi.avg_delay_s:>9.4f}s "
              f"{kpi.plr:>10.4f} {kpi.fairness:>10.4f} {kpi.spectral_eff_bps_hz:>10.4f}")


def _comma_ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part)


def _comma_names(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltedlsim",
        description="LTE downlink scheduler comparison over video/VoIP/best-effort traffic")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a single seeded simulation")
    sim.add_argument("--config", help="configuration file (key = value lines)")
    sim.add_argument("--scheduler", help="PF | EXP | LOG | FLS")
    sim.add_argument("--ues", type=int, help="number of UEs")
    sim.add_argument("--seed", type=int, help="random seed")
    sim.add_argument("--duration", type=float, help="simulated seconds")
    sim.add_argument("--out", help="directory for results.csv / plot data / figures")
    sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    sweep = sub.add_parser("sweep", help="reproduce the scheduler comparison figures")
    sweep.add_argument("--config", help="base configuration file")
    sweep.add_argument("--schedulers", type=_comma_names,
                       default=DEFAULT_SCHEDULERS, help="comma-separated policy names")
    sweep.add_argument("--ue-counts", type=_comma_ints, default=DEFAULT_UE_COUNTS,
                       help="comma-separated UE counts")
    sweep.add_argument("--seeds", type=int, default=DEFAULT_SEED_COUNT,
                       help="number of seeds (uses 1..N)")
    sweep.add_argument("--duration", type=float, help="simulated seconds per run")
    sweep.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sweep.add_argument("--out", default="results", help="output directory")
    sweep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    val = sub.add_parser("validate-config", help="check a configuration file")
    val.add_argument("--config", required=True)
    return parser


def _single_config(args) -> SimConfig:
    config = load_config(args.config)
    overrides = {}
    if args.scheduler is not None:
        overrides["scheduler"] = args.scheduler
    if args.ues is not None:
        overrides["n_ues"] = args.ues
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        overrides["duration_s"] = args.duration
    if overrides:
        config = replace(config, **overrides)
        config.validate()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            config = _single_config(args)
            report = engine.run(config)
            _print_report(report)
            if args.out:
                files = write_outputs([report], args.out, figures=not args.no_figures)
                print(f"wrote {len(files)} files to {args.out}")
        elif args.command == "sweep":
            base = load_config(args.config)
            if args.duration is not None:
                base = replace(base, duration_s=args.duration)
                base.validate()
            spec = SweepSpec(base=base, schedulers=args.schedulers,
                             ue_counts=args.ue_counts,
                             seeds=tuple(range(1, args.seeds + 1)))
            reports = run_sweep(spec, jobs=args.jobs)
            files = write_outputs(reports, args.out, figures=not args.no_figures)
            print(f"{len(reports)} aggregated reports "
                  f"({len(spec.configs())} runs) -> {args.out}")
            for path in files:
                print(f"  {path}")
        else:  # validate-config
            config = load_config(args.config)
            print("configuration OK")
            for f in fields(config):
                print(f"  {f.name} = {getattr(config, f.name)!r}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


def entry():
    raise SystemExit(main())
