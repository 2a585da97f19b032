"""Deterministic figure rendering from svcache output files.

Each figure consumes documented CSV contracts only:

  reports CSV   header: workload,policy,cache_gb,byte_hit,byte_miss,
                        obj_hit,obj_miss,midgress_bytes,requests,floor
  displacement  header: displacement,count
  overlap-alpha header: alpha,mean_overlap
  catalog table header declares its separator; columns
                        video_id,size_bytes,duration_ms,play_count

Rendering is pinned (fixed styles, fixed hash salt, no timestamps) so that
regenerating a figure from the same inputs yields identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams.update({
    "svg.hashsalt": "svcache-plots",
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})

FIGURE_IDS = ("pareto", "overlap_alpha", "beta_missrate", "cache_sweep",
              "topk", "mflen", "displacement")

REPORT_COLUMNS = ("workload", "policy", "cache_gb", "byte_hit", "byte_miss",
                  "obj_hit", "obj_miss", "midgress_bytes", "requests", "floor")

FLOOR_LABEL = "infinite-cache floor"


class FigureInputError(ValueError):
    """Input file missing, empty, or not matching its contract."""


def _read_csv(path, required_columns) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FigureInputError(f"input CSV does not exist: {path}")
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required_columns:
            if col not in header:
                raise FigureInputError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise FigureInputError(f"{path}: no data rows")
    return rows


def read_reports(path) -> list[dict]:
    rows = _read_csv(path, REPORT_COLUMNS)
    for row in rows:
        for col in ("cache_gb", "byte_hit", "byte_miss", "obj_hit", "obj_miss",
                    "floor", "workload"):
            row[col] = float(row[col])
    return rows


def _series_by_policy(rows):
    series: dict[str, list] = {}
    for row in rows:
        series.setdefault(row["policy"], []).append(row)
    return series


def _new_axes(xlabel, ylabel):
    fig, ax = plt.subplots()
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


# -- individual figures ------------------------------------------------------
def fig_pareto(catalog_path):
    path = Path(catalog_path)
    if not path.exists():
        raise FigureInputError(f"catalog file does not exist: {path}")
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        sep = "\t" if "\t" in header else ","
        cols = header.split(sep)
        if "play_count" not in cols:
            raise FigureInputError(f"{path}: missing column 'play_count'")
        idx = cols.index("play_count")
        counts = [int(line.rstrip("\n").split(sep)[idx]) for line in fh]
    if not counts:
        raise FigureInputError(f"{path}: no data rows")
    counts.sort(reverse=True)
    fig, ax = _new_axes("video rank", "play count")
    ax.loglog(range(1, len(counts) + 1), counts, color="tab:blue", lw=1.2)
    ax.set_title("Video popularity by rank")
    return fig


def fig_overlap_alpha(csv_path):
    rows = _read_csv(csv_path, ("alpha", "mean_overlap"))
    pts = sorted((float(r["alpha"]), float(r["mean_overlap"])) for r in rows)
    fig, ax = _new_axes("shape parameter", "mean pairwise overlap")
    ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
            color="tab:blue")
    ax.set_title("Cross-user overlap vs popularity skew")
    return fig


def fig_beta_missrate(reports_path):
    rows = read_reports(reports_path)
    fig, ax = _new_axes("popularity sampling weight", "byte miss rate")
    for policy, entries in sorted(_series_by_policy(rows).items()):
        entries = sorted(entries, key=lambda r: r["workload"])
        ax.plot([r["workload"] for r in entries],
                [r["byte_miss"] for r in entries], marker="o", label=policy)
    floors = sorted({(r["workload"], r["floor"]) for r in rows})
    ax.plot([f[0] for f in floors], [f[1] for f in floors], linestyle=":",
            color="black", label=FLOOR_LABEL)
    ax.legend(fontsize=7)
    ax.set_title("Byte miss rate vs workload mix")
    return fig


def fig_cache_sweep(reports_path):
    rows = read_reports(reports_path)
    beta = max(r["workload"] for r in rows)
    rows = [r for r in rows if r["workload"] == beta]
    fig, ax = _new_axes("cluster cache size (GiB)", "byte miss rate")
    for policy, entries in sorted(_series_by_policy(rows).items()):
        entries = sorted(entries, key=lambda r: r["cache_gb"])
        ax.plot([r["cache_gb"] for r in entries],
                [r["byte_miss"] for r in entries], marker="o", label=policy)
    ax.set_xscale("log")
    ax.legend(fontsize=7)
    ax.set_title(f"Cache-size sweep (workload {beta:g})")
    return fig


def fig_topk(reports_path):
    rows = read_reports(reports_path)
    rows = [r for r in rows if r["policy"] in ("topk", "silc")]
    if not rows:
        raise FigureInputError(
            f"{reports_path}: no 'topk' or 'silc' rows to compare")
    fig, ax = _new_axes("cluster cache size (GiB)", "byte miss rate")
    for policy, entries in sorted(_series_by_policy(rows).items()):
        entries = sorted(entries, key=lambda r: r["cache_gb"])
        ax.plot([r["cache_gb"] for r in entries],
                [r["byte_miss"] for r in entries], marker="o", label=policy)
    ax.set_xscale("log")
    ax.legend(fontsize=7)
    ax.set_title("Static top-popular cache vs lookahead")
    return fig


def fig_mflen(series):
    """series: list of "length=reports.csv" pairs, one per manifest length."""
    if not series:
        raise FigureInputError("mflen needs at least one length=path series")
    by_policy: dict[str, list] = {}
    for item in series:
        if "=" not in item:
            raise FigureInputError(f"bad series {item!r}; expected length=path")
        label, path = item.split("=", 1)
        try:
            length = float(label)
        except ValueError as exc:
            raise FigureInputError(f"bad series label {label!r}") from exc
        rows = read_reports(path)
        beta = max(r["workload"] for r in rows)
        for row in rows:
            if row["workload"] == beta and row["policy"] in ("silc", "silc_nr"):
                by_policy.setdefault(row["policy"], []).append(
                    (length, row["byte_miss"]))
    if not by_policy:
        raise FigureInputError("mflen series contain no silc/silc_nr rows")
    fig, ax = _new_axes("manifest length (videos)", "byte miss rate")
    for policy, pts in sorted(by_policy.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=policy)
    ax.legend(fontsize=7)
    ax.set_title("Lookahead depth vs byte miss rate")
    return fig


def fig_displacement(csv_path):
    rows = _read_csv(csv_path, ("displacement", "count"))
    pts = sorted((int(r["displacement"]), int(r["count"])) for r in rows)
    fig, ax = _new_axes("reordered position minus original", "entries")
    ax.bar([p[0] for p in pts], [p[1] for p in pts], color="tab:blue",
           width=0.9)
    ax.set_title("Reordering displacement distribution")
    return fig


def save(fig, out_path) -> None:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render(figure_id: str, out_path, *, reports=None, csv_path=None,
           catalog=None, series=None) -> Path:
    """Render one figure_id to out_path from its documented inputs."""
    if figure_id == "pareto":
        fig = fig_pareto(_require(catalog, "pareto needs --catalog"))
    elif figure_id == "overlap_alpha":
        fig = fig_overlap_alpha(_require(csv_path, "overlap_alpha needs --csv"))
    elif figure_id == "beta_missrate":
        fig = fig_beta_missrate(_require(reports, "beta_missrate needs --reports"))
    elif figure_id == "cache_sweep":
        fig = fig_cache_sweep(_require(reports, "cache_sweep needs --reports"))
    elif figure_id == "topk":
        fig = fig_topk(_require(reports, "topk needs --reports"))
    elif figure_id == "mflen":
        fig = fig_mflen(_require(series, "mflen needs --series"))
    elif figure_id == "displacement":
        fig = fig_displacement(_require(csv_path, "displacement needs --csv"))
    else:
        raise FigureInputError(
            f"unknown figure id {figure_id!r}; expected one of {', '.join(FIGURE_IDS)}")
    save(fig, out_path)
    return Path(out_path)


def _require(value, message):
    if value is None:
        raise FigureInputError(message)
    return value
