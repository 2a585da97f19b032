"""Synthetic short-video corpus generation.

Builds, in order: a video catalog with Pareto-distributed play counts and
quantile-matched sizes/durations, per-participant browsing histories, emulated
users (a personality of K participants plus a sliding time window), and the
per-user manifest files that the cluster simulator consumes.

All generation is deterministic given (config, seed): every participant and
user draws from its own counter-based substream, so corpora can be rebuilt
piecewise and in parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, WorkloadError
from .rng import substream

SECONDS_PER_DAY = 86_400.0

# Observed daily viewing rate used to calibrate synthetic histories.
DAILY_VIEWS = 332

KIB = 1024
MIB = 1024 * 1024

# Size anchors: 12% under 1 MB, 43% under 3 MB, 78% under 10 MB,
# smallest 11 KB, largest 1000 MB.
DEFAULT_SIZE_QUANTILES = (
    (0.0, 11 * KIB),
    (0.12, 1 * MIB),
    (0.43, 3 * MIB),
    (0.78, 10 * MIB),
    (1.0, 1000 * MIB),
)

# Duration anchors: quartiles 11s / 23s / 60s, 92% under 2 minutes.
DEFAULT_DURATION_QUANTILES = (
    (0.0, 1_000),
    (0.25, 11_000),
    (0.50, 23_000),
    (0.75, 60_000),
    (0.92, 120_000),
    (1.0, 600_000),
)


def pareto_pdf(x, alpha: float, xm: float = 1.0):
    """Pareto density: alpha * xm**alpha / x**(alpha+1) for x >= xm, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= xm, alpha * xm**alpha / np.power(x, alpha + 1.0, where=x > 0), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class VideoRecord:
    """One catalog entry."""

    video_id: int
    size_bytes: int
    duration_ms: int
    play_count: int

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ConfigError(f"size_bytes must be positive, got {self.size_bytes}")
        if self.duration_ms <= 0:
            raise ConfigError(f"duration_ms must be positive, got {self.duration_ms}")
        if self.play_count < 1:
            raise ConfigError(f"play_count must be >= 1, got {self.play_count}")


@dataclass(frozen=True)
class CatalogConfig:
    n_videos: int
    alpha: float = 1.62
    seed: int = 0
    size_quantiles: tuple = DEFAULT_SIZE_QUANTILES
    duration_quantiles: tuple = DEFAULT_DURATION_QUANTILES

    def validate(self) -> None:
        if self.n_videos < 1:
            raise ConfigError(f"n_videos must be >= 1, got {self.n_videos}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        for name, anchors in (("size_quantiles", self.size_quantiles),
                              ("duration_quantiles", self.duration_quantiles)):
            _validate_quantiles(name, anchors)


def _validate_quantiles(name: str, anchors) -> None:
    if len(anchors) < 2:
        raise ConfigError(f"{name}: need at least 2 anchor points")
    fracs = [a[0] for a in anchors]
    vals = [a[1] for a in anchors]
    if fracs[0] != 0.0 or fracs[-1] != 1.0:
        raise ConfigError(f"{name}: anchors must start at fraction 0.0 and end at 1.0")
    if any(b <= a for a, b in zip(fracs, fracs[1:])):
        raise ConfigError(f"{name}: fractions must be strictly increasing")
    if any(f <= 0.0 or f >= 1.0 for f in fracs[1:-1]):
        raise ConfigError(f"{name}: interior fractions must lie in (0, 1)")
    if any(v <= 0 for v in vals):
        raise ConfigError(f"{name}: anchor values must be positive")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"{name}: anchor values must be strictly increasing")


class Catalog:
    """Column-oriented video catalog; video_ids are kept sorted ascending."""

    def __init__(self, video_ids, size_bytes, duration_ms, play_counts):
        self.video_ids = np.asarray(video_ids, dtype=np.uint64)
        self.size_bytes = np.asarray(size_bytes, dtype=np.int64)
        self.duration_ms = np.asarray(duration_ms, dtype=np.int64)
        self.play_counts = np.asarray(play_counts, dtype=np.int64)
        if not (len(self.video_ids) == len(self.size_bytes)
                == len(self.duration_ms) == len(self.play_counts)):
            raise ConfigError("catalog columns have mismatched lengths")

    def __len__(self) -> int:
        return len(self.video_ids)

    def record(self, i: int) -> VideoRecord:
        return VideoRecord(
            video_id=int(self.video_ids[i]),
            size_bytes=int(self.size_bytes[i]),
            duration_ms=int(self.duration_ms[i]),
            play_count=int(self.play_counts[i]),
        )

    def records(self):
        for i in range(len(self)):
            yield self.record(i)

    def indices_of(self, ids) -> np.ndarray:
        """Positions of the given video ids (ids must exist in the catalog)."""
        ids = np.asarray(ids, dtype=np.uint64)
        idx = np.searchsorted(self.video_ids, ids)
        bad = (idx >= len(self.video_ids)) | (self.video_ids[np.minimum(idx, len(self) - 1)] != ids)
        if bad.any():
            missing = ids[bad][:5].tolist()
            raise WorkloadError(f"video ids not in catalog: {missing}")
        return idx


def _draw_pareto(rng: np.random.Generator, alpha: float, n: int) -> np.ndarray:
    # Inverse CDF; 1-u lies in (0, 1] so the draw is >= xm = 1.
    u = rng.random(n)
    return np.power(1.0 - u, -1.0 / alpha)


def _integerize_preserving_log(rng: np.random.Generator, x: np.ndarray) -> np.ndarray:
    """Randomized rounding to integers that keeps E[ln k | x] = ln x.

    Plain ceiling inflates the mean log of Pareto draws near the scale point
    badly enough to wreck a maximum-likelihood refit of the shape parameter;
    rounding up with probability (ln x - ln floor(x)) / (ln ceil(x) - ln floor(x))
    keeps the refit unbiased while producing integer counts >= 1.
    """
    x = np.minimum(x, 2.0**62)   # heavy tails at tiny shapes overflow int64
    lo = np.floor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        p_up = (np.log(x) - np.log(lo)) / (np.log(lo + 1.0) - np.log(lo))
    p_up = np.where(x == lo, 0.0, p_up)
    k = lo + (rng.random(len(x)) < p_up)
    return k.astype(np.int64)


def _quantile_values(rng: np.random.Generator, anchors, n: int) -> np.ndarray:
    # Monotone piecewise-linear interpolation in log-space through the anchors.
    fracs = np.array([a[0] for a in anchors], dtype=np.float64)
    logv = np.log([a[1] for a in anchors])
    u = rng.random(n)
    vals = np.exp(np.interp(u, fracs, logv))
    lo, hi = anchors[0][1], anchors[-1][1]
    return np.clip(np.rint(vals), lo, hi).astype(np.int64)


def _draw_unique_ids(rng: np.random.Generator, n: int) -> np.ndarray:
    ids = rng.integers(1, 2**63, size=n, dtype=np.uint64)
    ids = np.unique(ids)
    while len(ids) < n:
        extra = rng.integers(1, 2**63, size=n - len(ids), dtype=np.uint64)
        ids = np.unique(np.concatenate([ids, extra]))
    return ids


def generate_catalog(config: CatalogConfig) -> Catalog:
    """Generate a catalog; identical (config, seed) yields identical output."""
    config.validate()
    rng = substream(config.seed, "catalog")
    ids = _draw_unique_ids(rng, config.n_videos)
    play = _integerize_preserving_log(rng, _draw_pareto(rng, config.alpha, config.n_videos))
    sizes = _quantile_values(rng, config.size_quantiles, config.n_videos)
    durations = _quantile_values(rng, config.duration_quantiles, config.n_videos)
    return Catalog(ids, sizes, durations, play)


@dataclass
class ParticipantHistory:
    """Time-ordered viewing events of a single (synthetic) participant."""

    participant_id: int
    times: np.ndarray       # seconds since corpus epoch, nondecreasing
    video_ids: np.ndarray   # parallel to times

    def __len__(self) -> int:
        return len(self.times)

    def events(self):
        for t, v in zip(self.times.tolist(), self.video_ids.tolist()):
            yield (t, int(v))

    def window_slice(self, t_start: float, t_end: float) -> np.ndarray:
        lo = np.searchsorted(self.times, t_start, side="left")
        hi = np.searchsorted(self.times, t_end, side="left")
        return self.video_ids[lo:hi]


# Half-width (days) of the window in which a video actually attracts views.
# Popular short videos trend briefly and phase out, so a video's global play
# count is concentrated near a per-video trend day rather than spread evenly.
DEFAULT_TREND_WINDOW_DAYS = 7.0


def generate_participants(catalog: Catalog, n_participants: int, days: int,
                          seed: int, daily_views: int = DAILY_VIEWS,
                          trend_window_days: float = DEFAULT_TREND_WINDOW_DAYS,
                          ) -> list[ParticipantHistory]:
    """Synthesize browsing histories: ~daily_views Poisson events per day,
    videos drawn proportionally to catalog play counts.

    Each video's views are confined to +-trend_window_days around a per-video
    trend day (circular over the corpus span), which reproduces popularity
    churn while keeping the corpus-wide marginal draw proportional to play
    count. Windows at least as wide as the corpus disable the churn model.
    """
    if len(catalog) == 0:
        raise WorkloadError("cannot generate participants from an empty catalog")
    if n_participants < 1:
        raise ConfigError(f"n_participants must be >= 1, got {n_participants}")
    if days < 0:
        raise ConfigError(f"days must be >= 0, got {days}")
    if trend_window_days < 0:
        raise ConfigError("trend_window_days must be >= 0")

    weights = catalog.play_counts.astype(np.float64)
    cumw = np.cumsum(weights)
    total_w = cumw[-1]

    churn = 0 < 2 * trend_window_days < days
    trend_day = substream(seed, "trends").random(len(catalog)) * days if churn else None

    histories = []
    for pid in range(n_participants):
        rng = substream(seed, "participant", pid)
        per_day = rng.poisson(daily_views, size=days)
        total = int(per_day.sum())
        day_idx = np.repeat(np.arange(days, dtype=np.float64), per_day)
        times = np.sort(day_idx * SECONDS_PER_DAY + rng.random(total) * SECONDS_PER_DAY)
        if churn:
            picks = _draw_trending(rng, cumw, total_w, trend_day,
                                   times / SECONDS_PER_DAY, days, trend_window_days)
        else:
            u = rng.random(total) * total_w
            picks = np.minimum(np.searchsorted(cumw, u, side="right"), len(catalog) - 1)
        histories.append(ParticipantHistory(pid, times, catalog.video_ids[picks]))
    return histories


def _draw_trending(rng, cumw, total_w, trend_day, event_days, days,
                   half_width, max_rounds: int = 64) -> np.ndarray:
    """Popularity-proportional draws restricted to videos whose trend window
    (circular over the corpus) covers each event's day."""
    n_events = len(event_days)
    n_videos = len(trend_day)
    picks = np.empty(n_events, dtype=np.int64)
    pending = np.arange(n_events)
    for _ in range(max_rounds):
        if len(pending) == 0:
            return picks
        u = rng.random(len(pending)) * total_w
        cand = np.minimum(np.searchsorted(cumw, u, side="right"), n_videos - 1)
        delta = np.abs(event_days[pending] - trend_day[cand])
        alive = np.minimum(delta, days - delta) <= half_width
        picks[pending[alive]] = cand[alive]
        pending = pending[~alive]
    # Pathological accept rate (tiny catalogs): fall back to the static law.
    u = rng.random(len(pending)) * total_w
    picks[pending] = np.minimum(np.searchsorted(cumw, u, side="right"), n_videos - 1)
    return picks


def pool_probabilities(catalog: Catalog, windowed_pool, beta: float):
    """Selection law over a pool: P(v) = beta * C_v / sum(C) + (1-beta) / |pool|.

    Returns (pool_ids sorted ascending, probabilities)."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")
    pool = np.array(sorted(int(v) for v in windowed_pool), dtype=np.uint64)
    if len(pool) == 0:
        raise WorkloadError("cannot sample from an empty pool")
    w = catalog.play_counts[catalog.indices_of(pool)].astype(np.float64)
    p = beta * w / w.sum() + (1.0 - beta) / len(pool)
    return pool, p


def sample_video(catalog: Catalog, windowed_pool, beta: float,
                 rng: np.random.Generator) -> int:
    """One draw from the pool under the pool_probabilities law."""
    pool, p = pool_probabilities(catalog, windowed_pool, beta)
    cp = np.cumsum(p)
    u = rng.random() * cp[-1]
    return int(pool[min(int(np.searchsorted(cp, u, side="right")), len(pool) - 1)])


def _sample_sequence(pool_ids: np.ndarray, weights: np.ndarray, beta: float,
                     n_draws: int, rng: np.random.Generator) -> np.ndarray:
    """n_draws per-step draws with the sample_video law over the shrinking pool,
    falling back to with-replacement over the full pool once it is exhausted."""
    n = len(pool_ids)
    cumw = np.cumsum(weights, dtype=np.float64)
    total_w = float(cumw[-1])
    alive = np.ones(n, dtype=bool)
    perm = np.arange(n)          # perm[:n_alive] are the still-alive positions
    pos = np.arange(n)
    n_alive = n
    out = np.empty(n_draws, dtype=np.uint64)

    k = 0
    while k < n_draws and n_alive > 0:
        if beta > 0.0 and rng.random() < beta:
            j = -1
            for _ in range(64):  # rejection against the static popularity CDF
                u = rng.random() * total_w
                cand = min(int(np.searchsorted(cumw, u, side="right")), n - 1)
                if alive[cand]:
                    j = cand
                    break
            if j < 0:  # unlucky streak: exact draw over the remaining pool
                alive_idx = perm[:n_alive]
                caw = np.cumsum(weights[alive_idx])
                u = rng.random() * caw[-1]
                j = int(alive_idx[min(int(np.searchsorted(caw, u, side="right")),
                                      n_alive - 1)])
        else:
            j = int(perm[int(rng.integers(n_alive))])
        out[k] = pool_ids[j]
        k += 1
        # swap-remove j from the alive prefix
        pj = pos[j]
        last = perm[n_alive - 1]
        perm[pj], perm[n_alive - 1] = last, j
        pos[last], pos[j] = pj, n_alive - 1
        n_alive -= 1
        alive[j] = False

    while k < n_draws:  # with-replacement tail over the full pool
        if beta > 0.0 and rng.random() < beta:
            u = rng.random() * total_w
            j = min(int(np.searchsorted(cumw, u, side="right")), n - 1)
        else:
            j = int(rng.integers(n))
        out[k] = pool_ids[j]
        k += 1
    return out


@dataclass
class EmulatedUser:
    user_id: int
    personality: tuple          # participant ids
    window: tuple               # (t_start, t_end) seconds
    beta: float
    video_sequence: list        # ordered video ids


@dataclass(frozen=True)
class ManifestFile:
    """An ordered window of a user's upcoming videos; the lookahead unit."""

    user_id: int
    sequence_no: int
    entries: tuple

    def __post_init__(self):
        if self.sequence_no < 0:
            raise ConfigError(f"sequence_no must be >= 0, got {self.sequence_no}")


def generate_users(participants: list[ParticipantHistory], n_users: int,
                   videos_per_user: int = 150, window_days: float = 4,
                   batch_size: int = 100, batch_shift_days: float = 1,
                   beta: float = 1.0, seed: int = 0, *,
                   catalog: Catalog) -> list[EmulatedUser]:
    """Emulate users in batches of batch_size, each batch's window shifted by
    batch_shift_days; personalities are K ~ Uniform[5, 100] participants."""
    if not participants:
        raise WorkloadError("cannot generate users without participants")
    if n_users < 1:
        raise ConfigError(f"n_users must be >= 1, got {n_users}")
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"beta must be in [0, 1], got {beta}")

    n_participants = len(participants)
    users = []
    for i in range(n_users):
        rng = substream(seed, "user", i)
        k = int(rng.integers(5, 101))
        k = min(k, n_participants)
        personality = tuple(sorted(int(p) for p in
                                   rng.choice(n_participants, size=k, replace=False)))
        batch = i // batch_size
        t_start = batch * batch_shift_days * SECONDS_PER_DAY
        t_end = t_start + window_days * SECONDS_PER_DAY

        slices = [participants[p].window_slice(t_start, t_end) for p in personality]
        pool = np.unique(np.concatenate(slices)) if slices else np.array([], dtype=np.uint64)
        if len(pool) == 0:
            raise WorkloadError(
                f"batch {batch}: window [{t_start / SECONDS_PER_DAY:.1f}d, "
                f"{t_end / SECONDS_PER_DAY:.1f}d) contains no participant events")

        weights = catalog.play_counts[catalog.indices_of(pool)].astype(np.float64)
        seq = _sample_sequence(pool, weights, beta, videos_per_user, rng)
        users.append(EmulatedUser(
            user_id=i,
            personality=personality,
            window=(t_start, t_end),
            beta=beta,
            video_sequence=[int(v) for v in seq],
        ))
    return users


def build_manifests(user: EmulatedUser, manifest_len: int = 30) -> list[ManifestFile]:
    """Partition the user's video sequence into consecutive manifest files;
    only the final manifest may be short."""
    if manifest_len < 1:
        raise ConfigError(f"manifest_len must be >= 1, got {manifest_len}")
    seq = user.video_sequence
    return [
        ManifestFile(user.user_id, no, tuple(seq[start:start + manifest_len]))
        for no, start in enumerate(range(0, len(seq), manifest_len))
    ]


@dataclass
class Workload:
    """Everything a simulation run consumes."""

    catalog: Catalog
    users: list
    manifests: dict             # user_id -> list[ManifestFile]
    beta: float
    manifest_len: int = 30

    @property
    def label(self) -> str:
        return f"{self.beta:g}"


def build_workload(catalog: Catalog, participants, n_users: int, beta: float,
                   seed: int, videos_per_user: int = 150, window_days: float = 4,
                   batch_size: int = 100, batch_shift_days: float = 1,
                   manifest_len: int = 30) -> Workload:
    users = generate_users(participants, n_users, videos_per_user, window_days,
                           batch_size, batch_shift_days, beta, seed, catalog=catalog)
    manifests = {u.user_id: build_manifests(u, manifest_len) for u in users}
    return Workload(catalog, users, manifests, beta, manifest_len)
