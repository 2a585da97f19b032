"""Discrete-event simulation of a sharded CDN cache cluster.

An origin (implicit), n homogeneous cache servers, and a dynamic client
population. Clients fetch their manifests in order, then request each video
one at a time, advancing their clock by the watched video's duration. Video
requests are routed to servers by a sha256 shard of the video id. Manifests
are metadata-sized: they consume no cache capacity and no midgress.

Runs are single-threaded and deterministic for a given (workload, configs,
seed); independent runs share no state and may execute concurrently.
"""

from __future__ import annotations

import hashlib
import heapq
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .catalog import ManifestFile, Workload
from .errors import ConfigError, WorkloadError
from .policies import CacheConfig, create_cache
from .rng import derive_seed, substream
from .reorder import reorder_manifest

GIB = 1024 ** 3


@dataclass(frozen=True)
class ClusterConfig:
    n_servers: int = 10
    per_server_capacity_bytes: int = 10 * GIB
    initial_clients: int = 10
    max_clients: int = 500
    client_add_interval: float = 0.01   # simulated seconds between arrivals
    manifest_refill_threshold: int = 10
    manifests_per_user: int = 5
    reorder_enabled: bool = False
    duration_scale: float = 1.0         # uniform compression of watch times
    seed: int = 0

    def validate(self, manifest_len: int | None = None) -> None:
        if self.n_servers < 1:
            raise ConfigError(f"n_servers must be >= 1, got {self.n_servers}")
        if self.per_server_capacity_bytes <= 0:
            raise ConfigError("per_server_capacity_bytes must be > 0")
        if self.initial_clients < 1:
            raise ConfigError("initial_clients must be >= 1")
        if self.max_clients < self.initial_clients:
            raise ConfigError("max_clients must be >= initial_clients")
        if self.client_add_interval <= 0:
            raise ConfigError("client_add_interval must be > 0")
        if self.manifest_refill_threshold < 0:
            raise ConfigError("manifest_refill_threshold must be >= 0")
        if manifest_len is not None and self.manifest_refill_threshold >= manifest_len:
            raise ConfigError(
                f"manifest_refill_threshold ({self.manifest_refill_threshold}) must be "
                f"smaller than the manifest length ({manifest_len})")
        if self.duration_scale <= 0:
            raise ConfigError("duration_scale must be > 0")


@dataclass(slots=True)
class RequestEvent:
    tick: float
    user_id: int
    kind: str                 # "video" | "manifest"
    video_id: int | None
    server: int | None
    hit: bool | None
    bytes: int


@dataclass(slots=True)
class _Client:
    user_id: int
    manifests: list
    outstanding: deque = field(default_factory=deque)
    next_manifest_no: int = 0
    servers_touched: set = field(default_factory=set)


@dataclass
class SimulationResult:
    events: list
    reorder_decisions: list
    n_servers: int
    compulsory_floor: float


def shard(video_id: int, n_servers: int) -> int:
    """Server index from the big-endian first 8 bytes of sha256(decimal id)."""
    if n_servers < 1:
        raise ConfigError(f"n_servers must be >= 1, got {n_servers}")
    digest = hashlib.sha256(str(int(video_id)).encode()).digest()
    return int.from_bytes(digest[:8], "big") % n_servers


def compulsory_floor(workload: Workload) -> float:
    """Byte miss rate of an infinite cache: distinct bytes over total bytes."""
    catalog = workload.catalog
    all_ids = np.concatenate([np.asarray(u.video_sequence, dtype=np.uint64)
                              for u in workload.users])
    if len(all_ids) == 0:
        return 0.0
    sizes = catalog.size_bytes[catalog.indices_of(all_ids)]
    total = int(sizes.sum())
    _, first_idx = np.unique(all_ids, return_index=True)
    distinct = int(sizes[first_idx].sum())
    return distinct / total


def run_simulation(workload: Workload, cluster: ClusterConfig,
                   cache: CacheConfig) -> SimulationResult:
    """Run the client/cluster event loop until every user's manifests are served."""
    if not workload.users:
        raise WorkloadError("run_simulation needs at least one user")
    cluster.validate(manifest_len=workload.manifest_len)
    cache.validate()

    n_servers = cluster.n_servers
    catalog = workload.catalog

    # Per-workload video metadata and shard routing, resolved once.
    distinct_ids = np.unique(np.concatenate(
        [np.asarray(u.video_sequence, dtype=np.uint64) for u in workload.users]))
    idx = catalog.indices_of(distinct_ids)
    records = {}
    shard_of = {}
    for i, vid64 in zip(idx.tolist(), distinct_ids.tolist()):
        vid = int(vid64)
        records[vid] = catalog.record(i)
        shard_of[vid] = shard(vid, n_servers)

    servers = []
    for s in range(n_servers):
        preload = None
        if cache.policy == "topk":
            preload = [rec for vid, rec in records.items() if shard_of[vid] == s]
        servers.append(create_cache(cache, seed=derive_seed(cluster.seed, "server", s),
                                    preload=preload))

    order = substream(cluster.seed, "arrivals").permutation(len(workload.users))
    unstarted = deque(int(i) for i in order)

    events: list[RequestEvent] = []
    decisions = []
    heap: list = []
    state = {"seq": 0, "active": 0}
    refill = cluster.manifest_refill_threshold
    scale = cluster.duration_scale / 1000.0   # duration_ms -> simulated seconds

    def push(tick: float, kind: int, payload) -> None:
        heapq.heappush(heap, (tick, state["seq"], kind, payload))
        state["seq"] += 1

    def fetch_manifest(client: _Client, tick: float) -> None:
        manifest = client.manifests[client.next_manifest_no]
        client.next_manifest_no += 1
        events.append(RequestEvent(tick, client.user_id, "manifest", None, None, None, 0))
        entries = manifest.entries
        if cluster.reorder_enabled and entries:
            own = {}
            for vid in entries:
                own[vid] = own.get(vid, 0) + 1
            cache_view = set()
            freq = {}
            for vid in own:
                srv = servers[shard_of[vid]]
                if vid in srv:
                    cache_view.add(vid)
                freq[vid] = srv.lookahead_frequency(vid) + own[vid]
            decision = reorder_manifest(manifest, cache_view, freq)
            decisions.append(decision)
            entries = decision.reordered
        # Each server learns only about the entries it owns.
        by_server = {}
        for vid in entries:
            by_server.setdefault(shard_of[vid], []).append(vid)
        for s, vids in by_server.items():
            servers[s].register_manifest(
                ManifestFile(client.user_id, manifest.sequence_no, tuple(vids)))
            client.servers_touched.add(s)
        client.outstanding.extend(entries)

    def join(tick: float) -> None:
        user_id = unstarted.popleft()
        client = _Client(user_id=user_id, manifests=workload.manifests[user_id])
        state["active"] += 1
        fetch_manifest(client, tick)
        push(tick, 1, client)

    for _ in range(min(cluster.initial_clients, len(unstarted))):
        join(0.0)
    if unstarted and state["active"] < cluster.max_clients:
        push(cluster.client_add_interval, 0, None)

    while heap:
        tick, _, kind, payload = heapq.heappop(heap)
        if kind == 0:  # periodic arrival
            if unstarted and state["active"] < cluster.max_clients:
                join(tick)
                if unstarted and state["active"] < cluster.max_clients:
                    push(tick + cluster.client_add_interval, 0, None)
            continue
        client: _Client = payload
        vid = client.outstanding.popleft()
        s = shard_of[vid]
        rec = records[vid]
        outcome = servers[s].serve(rec, tick, client.user_id)
        events.append(RequestEvent(tick, client.user_id, "video", vid, s,
                                   outcome.hit, outcome.bytes_served))
        if (len(client.outstanding) == refill
                and client.next_manifest_no < len(client.manifests)):
            fetch_manifest(client, tick)
        if client.outstanding:
            push(tick + rec.duration_ms * scale, 1, client)
        else:
            # Departure; a replacement joins at the same tick.
            for srv_idx in client.servers_touched:
                servers[srv_idx].release_user(client.user_id)
            state["active"] -= 1
            if unstarted:
                join(tick)

    return SimulationResult(events, decisions, n_servers, compulsory_floor(workload))
