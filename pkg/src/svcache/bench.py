"""Per-request service latency microbenchmark.

Feeds one identical synthetic manifest-driven request stream through caches of
different policies and times each serve() call. Used to check that the
lookahead policy's bookkeeping stays within a small constant factor of plain
LRU and that its latency grows at most logarithmically with cache size.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .catalog import ManifestFile, VideoRecord
from .policies import CacheConfig, create_cache
from .rng import substream

MIB = 1024 * 1024


@dataclass(frozen=True)
class LatencyStats:
    policy: str
    n_requests: int
    median_us: float
    p90_us: float
    p99_us: float
    mean_us: float


def build_stream(n_requests: int, n_objects: int, manifest_len: int = 30,
                 n_clients: int = 64, alpha: float = 1.62, seed: int = 0):
    """A deterministic interleaving of manifest registrations and requests.

    Returns (ops, records): ops are ("m", user, ManifestFile) or
    ("v", user, video_id); records maps video_id -> VideoRecord (unit 1 MiB).
    """
    rng = substream(seed, "bench-stream")
    weights = (1.0 - rng.random(n_objects)) ** (-1.0 / alpha)
    cumw = np.cumsum(weights)
    records = {vid: VideoRecord(vid, MIB, 20_000, 1) for vid in range(1, n_objects + 1)}

    queues = [[] for _ in range(n_clients)]
    manifest_no = [0] * n_clients
    ops = []
    users = rng.integers(0, n_clients, size=n_requests)
    draws = np.minimum(np.searchsorted(cumw, rng.random((n_requests // manifest_len + n_clients + 1) * manifest_len)
                                       * cumw[-1], side="right"), n_objects - 1) + 1
    draw_pos = 0
    for i in range(n_requests):
        u = int(users[i])
        if not queues[u]:
            entries = tuple(int(v) for v in draws[draw_pos:draw_pos + manifest_len])
            draw_pos += manifest_len
            ops.append(("m", u, ManifestFile(u, manifest_no[u], entries)))
            manifest_no[u] += 1
            queues[u] = list(entries)
        ops.append(("v", u, queues[u].pop(0)))
    return ops, records


def time_policy(policy: str, ops, records, capacity_bytes: int,
                seed: int = 0) -> LatencyStats:
    """Run the stream through one cache, timing only the serve calls."""
    cache = create_cache(CacheConfig(capacity_bytes=capacity_bytes, policy=policy),
                         seed=seed)
    n_serves = sum(1 for op in ops if op[0] == "v")
    samples = np.empty(n_serves, dtype=np.int64)
    clock = time.perf_counter_ns
    k = 0
    tick = 0.0
    for op in ops:
        if op[0] == "m":
            cache.register_manifest(op[2])
            continue
        video = records[op[2]]
        tick += 1.0
        t0 = clock()
        cache.serve(video, tick, op[1])
        samples[k] = clock() - t0
        k += 1
    med, p90, p99 = np.percentile(samples, (50, 90, 99)) / 1000.0
    return LatencyStats(policy, n_serves, float(med), float(p90), float(p99),
                        float(samples.mean() / 1000.0))


def latency_benchmark(policies=("llf", "lru"), n_requests: int = 1_000_000,
                      n_objects: int = 10_000, cached_fraction: float = 0.1,
                      seed: int = 0) -> dict:
    """Median/percentile serve latency per policy on one shared stream."""
    ops, records = build_stream(n_requests, n_objects, seed=seed)
    capacity = max(1, int(n_objects * cached_fraction)) * MIB
    return {p: time_policy(p, ops, records, capacity, seed=seed) for p in policies}


def scaling_benchmark(policy: str = "llf", n_objects_list=(1_000, 10_000, 100_000),
                      n_requests: int = 200_000, seed: int = 0) -> dict:
    """Median latency of one policy across cache object counts."""
    out = {}
    for n_objects in n_objects_list:
        ops, records = build_stream(n_requests, n_objects, seed=seed)
        capacity = max(1, n_objects // 10) * MIB
        out[n_objects] = time_policy(policy, ops, records, capacity, seed=seed)
    return out
