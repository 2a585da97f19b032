"""Reported quantities: hit/miss rates, midgress, overlap statistics,
popularity-shape diagnostics, and the overlap-vs-shape Monte Carlo study."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import _draw_pareto, _integerize_preserving_log
from .errors import MetricsError
from .rng import substream

GIB = 1024 ** 3

REPORT_CSV_HEADER = ("workload,policy,cache_gb,byte_hit,byte_miss,"
                     "obj_hit,obj_miss,midgress_bytes,requests,floor")

# Gap histogram: 24-hour buckets out to 14 days, then one overflow bucket.
GAP_BUCKET_HOURS = 24
GAP_MAX_BUCKETS = 14
GAP_OVERFLOW_KEY = GAP_BUCKET_HOURS * GAP_MAX_BUCKETS


@dataclass(frozen=True)
class RunReport:
    workload_label: str
    policy: str
    cache_bytes: int
    byte_hit_rate: float
    byte_miss_rate: float
    object_hit_rate: float
    object_miss_rate: float
    midgress_bytes: int
    total_bytes: int
    request_count: int
    compulsory_floor: float

    @property
    def cache_gb(self) -> float:
        return self.cache_bytes / GIB

    def csv_row(self) -> str:
        return (f"{self.workload_label},{self.policy},{self.cache_gb:g},"
                f"{self.byte_hit_rate:.9f},{self.byte_miss_rate:.9f},"
                f"{self.object_hit_rate:.9f},{self.object_miss_rate:.9f},"
                f"{self.midgress_bytes},{self.request_count},"
                f"{self.compulsory_floor:.9f}")


def summarize(events, *, workload_label: str = "", policy: str = "",
              cache_bytes: int = 0, compulsory_floor: float | None = None) -> RunReport:
    """Aggregate a trace into a RunReport; bytes are weighted by video size."""
    requests = 0
    hits = 0
    total_bytes = 0
    hit_bytes = 0
    midgress = 0
    distinct_bytes = 0
    seen = set()
    for ev in events:
        if ev.kind != "video":
            continue
        requests += 1
        total_bytes += ev.bytes
        if ev.hit:
            hits += 1
            hit_bytes += ev.bytes
        else:
            midgress += ev.bytes
        if ev.video_id not in seen:
            seen.add(ev.video_id)
            distinct_bytes += ev.bytes
    if requests == 0:
        raise MetricsError("trace contains no video events")
    # Miss rates come straight from the integer tallies so that a run with no
    # evictions lands exactly on the compulsory floor (same division).
    byte_miss = midgress / total_bytes
    obj_miss = (requests - hits) / requests
    if compulsory_floor is None:
        compulsory_floor = distinct_bytes / total_bytes
    return RunReport(
        workload_label=workload_label,
        policy=policy,
        cache_bytes=cache_bytes,
        byte_hit_rate=1.0 - byte_miss,
        byte_miss_rate=byte_miss,
        object_hit_rate=1.0 - obj_miss,
        object_miss_rate=obj_miss,
        midgress_bytes=midgress,
        total_bytes=total_bytes,
        request_count=requests,
        compulsory_floor=compulsory_floor,
    )


@dataclass(frozen=True)
class OverlapStats:
    fraction_multiwatched: float
    gap_histogram: dict   # bucket start hour -> count; GAP_OVERFLOW_KEY collects the tail


def overlap_stats(histories) -> OverlapStats:
    """Cross-viewer overlap: which videos were seen by more than one viewer,
    and how far apart the first views were."""
    vids, pids, times = [], [], []
    for h in histories:
        vids.append(np.asarray(h.video_ids, dtype=np.uint64))
        pids.append(np.full(len(h), h.participant_id, dtype=np.int64))
        times.append(np.asarray(h.times, dtype=np.float64))
    if not vids:
        return OverlapStats(0.0, {})
    vids = np.concatenate(vids)
    pids = np.concatenate(pids)
    times = np.concatenate(times)
    if len(vids) == 0:
        return OverlapStats(0.0, {})

    # First view of each (video, viewer) pair.
    order = np.lexsort((times, pids, vids))
    vids, pids, times = vids[order], pids[order], times[order]
    first = np.ones(len(vids), dtype=bool)
    first[1:] = (vids[1:] != vids[:-1]) | (pids[1:] != pids[:-1])
    fv_vid, fv_time = vids[first], times[first]

    uniq, counts = np.unique(fv_vid, return_counts=True)
    fraction = float((counts >= 2).sum() / len(uniq)) if len(uniq) else 0.0

    # Gaps from the earliest first-view to each other viewer's first view.
    order2 = np.lexsort((fv_time, fv_vid))
    fv_vid, fv_time = fv_vid[order2], fv_time[order2]
    starts = np.ones(len(fv_vid), dtype=bool)
    starts[1:] = fv_vid[1:] != fv_vid[:-1]
    group = np.cumsum(starts) - 1
    earliest = fv_time[starts][group]
    gaps = (fv_time - earliest)[~starts]

    hist: dict[int, int] = {}
    if len(gaps):
        buckets = np.minimum((gaps / 3600.0 / GAP_BUCKET_HOURS).astype(np.int64),
                             GAP_MAX_BUCKETS)
        keys, cnts = np.unique(buckets, return_counts=True)
        hist = {int(k) * GAP_BUCKET_HOURS: int(c) for k, c in zip(keys, cnts)}
    return OverlapStats(fraction, hist)


def expected_overlap_study(alphas, n_users: int = 100, n_samples: int = 150,
                           n_runs: int = 100, seed: int = 0,
                           n_videos: int = 10_000) -> dict:
    """Mean pairwise distinct-video overlap between users sampling
    popularity-proportionally from a Pareto(alpha) catalog, per alpha."""
    results = {}
    iu = np.triu_indices(n_users, k=1)
    for alpha in alphas:
        if not alpha > 0:
            raise MetricsError(f"alpha must be > 0, got {alpha}")
        total = 0.0
        for run in range(n_runs):
            rng = substream(seed, "overlap-study", f"{alpha:g}", run)
            counts = _integerize_preserving_log(rng, _draw_pareto(rng, alpha, n_videos))
            w = counts.astype(np.float64)
            cw = np.cumsum(w)
            picks = np.searchsorted(cw, rng.random((n_users, n_samples)) * cw[-1],
                                    side="right")
            picks = np.minimum(picks, n_videos - 1)
            m = np.zeros((n_users, n_videos), dtype=np.float32)
            rows = np.repeat(np.arange(n_users), n_samples)
            m[rows, picks.ravel()] = 1.0
            total += float((m @ m.T)[iu].mean())
        results[alpha] = total / n_runs
    return results


@dataclass(frozen=True)
class ParetoFit:
    alpha_hat: float
    ccdf_slope: float      # log-log complementary-CDF slope (cross-check)
    n: int


def pareto_fit(play_counts, xm: float = 1.0) -> ParetoFit:
    """Maximum-likelihood shape estimate alpha = n / sum(ln(x / xm))."""
    x = np.asarray(play_counts, dtype=np.float64)
    if len(x) == 0:
        raise MetricsError("pareto_fit needs at least one count")
    if (x < xm).any():
        raise MetricsError(f"all counts must be >= xm = {xm}")
    logs = np.log(x / xm)
    s = logs.sum()
    alpha_hat = math.inf if s == 0 else len(x) / s

    slope = math.nan
    xs = np.sort(x)
    if xs[-1] > xs[0]:
        # Fit strictly above the scale point, where integer rounding no longer
        # distorts the complementary CDF.
        ks = np.unique(np.rint(np.logspace(0, np.log10(xs[-1]), 64)))
        ks = ks[(ks > xm) & (ks < xs[-1])]
        if len(ks) >= 2:
            ccdf = 1.0 - np.searchsorted(xs, ks, side="right") / len(xs)
            # Drop levels backed by fewer than ~10 tail samples; the extreme
            # tail of a finite sample is too noisy for a stable slope.
            keep = ccdf * len(xs) >= 10
            if keep.sum() >= 2:
                slope = float(np.polyfit(np.log(ks[keep]), np.log(ccdf[keep]), 1)[0])
    return ParetoFit(alpha_hat, slope, len(x))
