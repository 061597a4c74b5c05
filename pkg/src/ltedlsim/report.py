"""Result emission: delimited KPI tables, per-figure plot data, and rendered figures.

`results.csv` carries every KPI for every (report, flow class) pair.  Each
figure series additionally gets a whitespace-separated `.dat` file (columns:
UE count, then one column per scheduler) and a rendered PNG, so the curves can
be inspected directly or re-plotted with any tool.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .metrics import CLASS_KEYS, KpiReport

CSV_HEADER = ("scheduler", "n_ues", "seeds", "flow_class", "throughput_bps",
              "avg_delay_s", "plr", "fairness", "spectral_eff_bps_hz")

# figure stem -> (flow class, ClassKpi field, axis label)
FIGURES = {
    "fig_throughput": ("video", "throughput_bps", "Video throughput [bit/s]"),
    "fig_delay": ("video", "avg_delay_s", "Video packet delay [s]"),
    "fig_plr": ("video", "plr", "Video packet loss ratio"),
    "fig_fairness": ("video", "fairness", "Fairness index"),
    "fig_speff": ("all", "spectral_eff_bps_hz", "Spectral efficiency [bit/s/Hz]"),
}

_MARKERS = ("o", "s", "^", "d", "v", "*")


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_csv(reports: Sequence[KpiReport], path: Path):
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for report in reports:
            for cls in CLASS_KEYS:
                kpi = report.per_class[cls]
                writer.writerow((
                    report.scheduler,
                    report.n_ues,
                    report.seeds,
                    cls,
                    _fmt(kpi.throughput_bps),
                    _fmt(kpi.avg_delay_s),
                    _fmt(kpi.plr),
                    _fmt(kpi.fairness),
                    _fmt(kpi.spectral_eff_bps_hz),
                ))


def _series(reports: Sequence[KpiReport], cls: str, fieldname: str):
    """Pivot reports into (ue_counts, {scheduler: values}) for one KPI."""
    schedulers: list[str] = []
    for r in reports:
        if r.scheduler not in schedulers:
            schedulers.append(r.scheduler)
    ue_counts = sorted({r.n_ues for r in reports})
    cells = {(r.scheduler, r.n_ues): getattr(r.per_class[cls], fieldname)
             for r in reports}
    columns = {
        s: [cells.get((s, n), math.nan) for n in ue_counts] for s in schedulers
    }
    return ue_counts, columns


def write_dat(reports: Sequence[KpiReport], stem: str, path: Path):
    cls, fieldname, _ = FIGURES[stem]
    ue_counts, columns = _series(reports, cls, fieldname)
    with path.open("w") as fh:
        fh.write("# n_ues " + " ".join(columns) + "\n")
        for row, n in enumerate(ue_counts):
            cells = [str(n)] + [_fmt(columns[s][row]) for s in columns]
            fh.write(" ".join(cells) + "\n")


def render_figure(reports: Sequence[KpiReport], stem: str, path: Path):
    cls, fieldname, ylabel = FIGURES[stem]
    ue_counts, columns = _series(reports, cls, fieldname)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, (scheduler, values) in enumerate(columns.items()):
        ax.plot(ue_counts, values, marker=_MARKERS[i % len(_MARKERS)],
                label=scheduler)
    ax.set_xlabel("Number of UEs")
    ax.set_ylabel(ylabel)
    ax.grid(True, linestyle="--", linewidth=0.5, alpha=0.7)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_outputs(reports: Sequence[KpiReport], out_dir: str | Path,
                  figures: bool = True) -> list[Path]:
    """Write results.csv, the fig_*.dat series, and (optionally) PNG figures.

    Returns the list of files written.
    """
    if not reports:
        raise ValueError("no reports to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = out / "results.csv"
    write_csv(reports, csv_path)
    written.append(csv_path)

    for stem in FIGURES:
        dat_path = out / f"{stem}.dat"
        write_dat(reports, stem, dat_path)
        written.append(dat_path)
        if figures:
            png_path = out / f"{stem}.png"
            render_figure(reports, stem, png_path)
            written.append(png_path)
    return written
