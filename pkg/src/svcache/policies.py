"""Capacity-bounded, byte-accounted cache engine with pluggable eviction.

Policies:
  llf    -- least lookahead frequency: evict the cached video with the fewest
            unserved occurrences across all registered manifests, LRU tie-break.
            Implemented with two hashmaps (in-cache / out-of-cache frequencies)
            and a lazily-invalidated min-heap, so serving stays O(log n).
  fif    -- furthest-in-future under the same limited lookahead: evict the
            cached video whose next unserved occurrence is farthest (infinity
            if absent from every outstanding manifest), LRU tie-break.
  lru, lfu, fifo, gdsf, lfuda, random, lecar -- classical history-based
            baselines (lfu uses lifetime frequency; gdsf/lfuda use the usual
            aged priorities; lecar arbitrates between recency and frequency
            experts with exponential weight updates).
  topk   -- a static cache preloaded with the most popular videos that fit;
            it never admits and never evicts.

Every cache is single-writer; distinct instances are independent.
"""

from __future__ import annotations

import heapq
import math
from collections import Counter, OrderedDict, deque
from dataclasses import dataclass, field

from .errors import CacheError, ConfigError
from .rng import substream

POLICY_NAMES = ("llf", "fif", "lru", "lfu", "fifo", "gdsf", "lfuda",
                "random", "lecar", "topk")

MIB = 1024 * 1024


@dataclass(frozen=True)
class CacheConfig:
    capacity_bytes: int
    policy: str = "llf"
    policy_params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.capacity_bytes <= 0:
            raise ConfigError(f"capacity_bytes must be > 0, got {self.capacity_bytes}")
        if self.policy not in POLICY_NAMES:
            raise ConfigError(
                f"unknown policy {self.policy!r}; expected one of {', '.join(POLICY_NAMES)}")


@dataclass(slots=True)
class AccessOutcome:
    hit: bool
    bytes_served: int
    bytes_fetched_midgress: int
    evicted: tuple = ()
    bypass: bool = False


class Cache:
    """Shared byte accounting and the serve skeleton."""

    name = "base"
    admits = True

    def __init__(self, capacity_bytes: int):
        if capacity_bytes <= 0:
            raise ConfigError(f"capacity_bytes must be > 0, got {capacity_bytes}")
        self.capacity_bytes = int(capacity_bytes)
        self.used_bytes = 0
        self._sizes = {}
        self._last = {}
        self.unregistered_accesses = 0

    def __contains__(self, video_id) -> bool:
        return video_id in self._sizes

    def __len__(self) -> int:
        return len(self._sizes)

    def cached_ids(self):
        return self._sizes.keys()

    # Lookahead surface; history-based policies ignore manifests entirely.
    def register_manifest(self, manifest) -> None:
        pass

    def release_user(self, user_id) -> None:
        pass

    def lookahead_frequency(self, video_id) -> int:
        return 0

    def serve(self, video, tick, user_id=None) -> AccessOutcome:
        vid = video.video_id
        self._consume_lookahead(vid, user_id)
        self._record_access(vid, tick)
        size = self._sizes.get(vid)
        if size is not None:
            self._touch(vid, tick)
            return AccessOutcome(True, size, 0)
        size = video.size_bytes
        if not self.admits:
            return AccessOutcome(False, size, size)
        if size > self.capacity_bytes:
            # Object can never fit: serve it straight through, never cache.
            return AccessOutcome(False, size, size, bypass=True)
        self._insert(vid, size, tick, video)
        evicted = []
        while self.used_bytes > self.capacity_bytes:
            # The object being admitted is not a candidate for its own
            # admission's evictions.
            victim = self._evict_victim(exempt=vid)
            self._remove(victim)
            evicted.append(victim)
        if evicted:
            self._finalize_admission(vid)
        return AccessOutcome(False, size, size, tuple(evicted))

    # -- hooks ------------------------------------------------------------
    def _consume_lookahead(self, vid, user_id) -> None:
        pass

    def _record_access(self, vid, tick) -> None:
        pass

    def _touch(self, vid, tick) -> None:
        self._last[vid] = tick

    def _insert(self, vid, size, tick, video) -> None:
        self._sizes[vid] = size
        self._last[vid] = tick
        self.used_bytes += size

    def _remove(self, vid) -> None:
        self.used_bytes -= self._sizes.pop(vid)
        del self._last[vid]
        self._on_evict(vid)

    def _on_evict(self, vid) -> None:
        pass

    def _finalize_admission(self, vid) -> None:
        # Runs after an admission that caused evictions, so aged policies can
        # refresh the newcomer's priority with the post-eviction age.
        pass

    def _evict_victim(self, exempt=None):
        raise NotImplementedError


def _scan_min(cache: Cache, key_of, exempt=None):
    """Deterministic argmin over cached ids by (key, last_access, video_id)."""
    best = None
    for vid in cache._sizes:
        if vid == exempt:
            continue
        key = (key_of(vid), cache._last[vid], vid)
        if best is None or key < best:
            best = key
    if best is None:
        raise CacheError("eviction requested with no eligible candidates")
    return best[2]


class LookaheadFrequencyCache(Cache):
    """Evicts argmin over unserved-occurrence counts, LRU tie-break.

    The two frequency hashmaps are authoritative; the heap holds
    (frequency, last_access, video_id) snapshots that may be stale and are
    discarded on inspection when they disagree with the maps.
    """

    name = "llf"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self.in_cache_freq = {}
        self.out_of_cache_freq = {}
        self._heap = []
        self._outstanding = {}   # user_id -> Counter of unserved entries

    # -- lookahead bookkeeping --------------------------------------------
    def register_manifest(self, manifest) -> None:
        entries = manifest.entries
        if not entries:
            return
        counts = Counter(entries)
        ledger = self._outstanding.setdefault(manifest.user_id, Counter())
        ledger.update(counts)
        in_freq = self.in_cache_freq
        out_freq = self.out_of_cache_freq
        for vid, k in counts.items():
            if vid in in_freq:
                in_freq[vid] += k
                heapq.heappush(self._heap, (in_freq[vid], self._last[vid], vid))
            else:
                out_freq[vid] = out_freq.get(vid, 0) + k
        self._maybe_compact()

    def release_user(self, user_id) -> None:
        ledger = self._outstanding.pop(user_id, None)
        if not ledger:
            return
        for vid, k in ledger.items():
            self._decrement(vid, k)

    def lookahead_frequency(self, video_id) -> int:
        f = self.in_cache_freq.get(video_id)
        if f is None:
            return self.out_of_cache_freq.get(video_id, 0)
        return f

    def _decrement(self, vid, k) -> None:
        f = self.in_cache_freq.get(vid)
        if f is not None:
            f -= k
            self.in_cache_freq[vid] = f
            heapq.heappush(self._heap, (f, self._last[vid], vid))
        else:
            f = self.out_of_cache_freq.get(vid, 0) - k
            if f > 0:
                self.out_of_cache_freq[vid] = f
            else:
                self.out_of_cache_freq.pop(vid, None)

    def _consume_lookahead(self, vid, user_id) -> None:
        # Frequencies fall as videos are served; an access by a user with no
        # outstanding registration for the video never drives them below the
        # amount still owed to other users.
        if user_id is not None:
            ledger = self._outstanding.get(user_id)
            if ledger is not None:
                c = ledger.get(vid, 0)
                if c > 0:
                    if c == 1:
                        del ledger[vid]
                    else:
                        ledger[vid] = c - 1
                    self._decrement(vid, 1)
                    return
        self.unregistered_accesses += 1

    # -- cache maintenance --------------------------------------------------
    def _touch(self, vid, tick) -> None:
        self._last[vid] = tick
        heapq.heappush(self._heap, (self.in_cache_freq[vid], tick, vid))
        self._maybe_compact()

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        f = self.out_of_cache_freq.pop(vid, 0)
        self.in_cache_freq[vid] = f
        heapq.heappush(self._heap, (f, tick, vid))
        self._maybe_compact()

    def _on_evict(self, vid) -> None:
        f = self.in_cache_freq.pop(vid)
        if f > 0:
            self.out_of_cache_freq[vid] = f

    def _snapshot_valid(self, entry) -> bool:
        f, tick, vid = entry
        return self.in_cache_freq.get(vid) == f and self._last.get(vid) == tick

    def _evict_victim(self, exempt=None):
        heap = self._heap
        held = None
        while heap:
            entry = heap[0]
            if not self._snapshot_valid(entry):
                heapq.heappop(heap)
                continue
            if entry[2] == exempt:
                held = heapq.heappop(heap)
                continue
            heapq.heappop(heap)
            if held is not None:
                heapq.heappush(heap, held)
            return entry[2]
        if held is not None:
            heapq.heappush(heap, held)
        raise CacheError("eviction requested with no eligible candidates")

    def evict_candidate(self):
        """The video Eq-min would evict right now, without evicting it."""
        if not self._sizes:
            raise CacheError("evict_candidate on an empty cache")
        heap = self._heap
        while heap:
            entry = heap[0]
            if self._snapshot_valid(entry):
                return entry[2]
            heapq.heappop(heap)
        raise CacheError("lookahead heap out of sync with cache contents")

    def _maybe_compact(self) -> None:
        if len(self._heap) > max(1024, 4 * len(self._sizes) + 64):
            self._heap = [(f, self._last[v], v) for v, f in self.in_cache_freq.items()]
            heapq.heapify(self._heap)


class FurthestInFutureCache(Cache):
    """Evicts the cached video whose next unserved occurrence is farthest.

    Distance is the number of unserved entries preceding the video's next
    occurrence in the owning user's outstanding queue, minimized across users;
    videos absent from every queue are infinitely far. Requires in-order
    consumption of each user's queue for exact distances.
    """

    name = "fif"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._queues = {}      # user_id -> deque of video ids
        self._served = {}      # user_id -> entries consumed so far
        self._next_abs = {}    # user_id -> next absolute queue index
        self._positions = {}   # vid -> {user_id: deque of absolute indices}

    def register_manifest(self, manifest) -> None:
        entries = manifest.entries
        if not entries:
            return
        user = manifest.user_id
        queue = self._queues.setdefault(user, deque())
        if user not in self._served:
            self._served[user] = 0
            self._next_abs[user] = 0
        nxt = self._next_abs[user]
        for vid in entries:
            queue.append(vid)
            self._positions.setdefault(vid, {}).setdefault(user, deque()).append(nxt)
            nxt += 1
        self._next_abs[user] = nxt

    def release_user(self, user_id) -> None:
        queue = self._queues.pop(user_id, None)
        if queue is None:
            return
        for vid in set(queue):
            occ = self._positions.get(vid)
            if occ is not None:
                occ.pop(user_id, None)
                if not occ:
                    del self._positions[vid]
        self._served.pop(user_id, None)
        self._next_abs.pop(user_id, None)

    def lookahead_frequency(self, video_id) -> int:
        occ = self._positions.get(video_id)
        return sum(len(dq) for dq in occ.values()) if occ else 0

    def _pop_occurrence(self, vid, user) -> None:
        occ = self._positions.get(vid)
        if occ is None:
            return
        dq = occ.get(user)
        if dq is None:
            return
        dq.popleft()
        if not dq:
            del occ[user]
            if not occ:
                del self._positions[vid]

    def _consume_lookahead(self, vid, user_id) -> None:
        if user_id is not None:
            queue = self._queues.get(user_id)
            if queue:
                if queue[0] == vid:
                    queue.popleft()
                    self._served[user_id] += 1
                    self._pop_occurrence(vid, user_id)
                    return
                if vid in queue:
                    # Out-of-order serve: drop the first occurrence. Distances
                    # of entries behind it become one-off overestimates.
                    queue.remove(vid)
                    self._pop_occurrence(vid, user_id)
                    return
        self.unregistered_accesses += 1

    def _next_use_distance(self, vid) -> float:
        occ = self._positions.get(vid)
        if not occ:
            return math.inf
        served = self._served
        return min(dq[0] - served[u] for u, dq in occ.items())

    def _evict_victim(self, exempt=None):
        best_vid = None
        best_dist = -1.0
        best_last = None
        for vid in self._sizes:
            if vid == exempt:
                continue
            dist = self._next_use_distance(vid)
            last = self._last[vid]
            if (best_vid is None or dist > best_dist
                    or (dist == best_dist and last < best_last)
                    or (dist == best_dist and last == best_last and vid < best_vid)):
                best_vid, best_dist, best_last = vid, dist, last
        if best_vid is None:
            raise CacheError("eviction requested from an empty cache")
        return best_vid


class LRUCache(Cache):
    name = "lru"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._order = OrderedDict()

    def _touch(self, vid, tick) -> None:
        super()._touch(vid, tick)
        self._order.move_to_end(vid)

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        self._order[vid] = None

    def _on_evict(self, vid) -> None:
        del self._order[vid]

    def _evict_victim(self, exempt=None):
        for vid in self._order:
            if vid != exempt:
                return vid
        raise CacheError("eviction requested with no eligible candidates")


class FIFOCache(Cache):
    name = "fifo"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._order = OrderedDict()

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        self._order[vid] = None

    def _on_evict(self, vid) -> None:
        del self._order[vid]

    def _evict_victim(self, exempt=None):
        for vid in self._order:
            if vid != exempt:
                return vid
        raise CacheError("eviction requested with no eligible candidates")


class LFUCache(Cache):
    """Least lifetime frequency: counts persist across evictions."""

    name = "lfu"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._freq = {}

    def _record_access(self, vid, tick) -> None:
        self._freq[vid] = self._freq.get(vid, 0) + 1

    def _evict_victim(self, exempt=None):
        return _scan_min(self, self._freq.__getitem__, exempt)


class LFUDACache(Cache):
    """LFU with dynamic aging: priority = in-cache frequency + age offset."""

    name = "lfuda"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._pri = {}
        self._count = {}
        self._age = 0.0

    def _touch(self, vid, tick) -> None:
        super()._touch(vid, tick)
        self._count[vid] += 1
        self._pri[vid] = self._age + self._count[vid]

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        self._count[vid] = 1
        self._pri[vid] = self._age + 1

    def _finalize_admission(self, vid) -> None:
        self._pri[vid] = self._age + self._count[vid]

    def _on_evict(self, vid) -> None:
        self._age = self._pri.pop(vid)
        del self._count[vid]

    def _evict_victim(self, exempt=None):
        return _scan_min(self, self._pri.__getitem__, exempt)


class GDSFCache(Cache):
    """Greedy-dual size-frequency: priority = age + frequency / size."""

    name = "gdsf"

    def __init__(self, capacity_bytes: int):
        super().__init__(capacity_bytes)
        self._pri = {}
        self._count = {}
        self._age = 0.0

    def _touch(self, vid, tick) -> None:
        super()._touch(vid, tick)
        self._count[vid] += 1
        self._pri[vid] = self._age + self._count[vid] / self._sizes[vid]

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        self._count[vid] = 1
        self._pri[vid] = self._age + 1.0 / size

    def _finalize_admission(self, vid) -> None:
        self._pri[vid] = self._age + self._count[vid] / self._sizes[vid]

    def _on_evict(self, vid) -> None:
        self._age = self._pri.pop(vid)
        del self._count[vid]

    def _evict_victim(self, exempt=None):
        return _scan_min(self, self._pri.__getitem__, exempt)


class RandomCache(Cache):
    name = "random"

    def __init__(self, capacity_bytes: int, seed: int = 0):
        super().__init__(capacity_bytes)
        self._rng = substream(seed, "random-evict")

    def _evict_victim(self, exempt=None):
        ids = [v for v in self._sizes if v != exempt]
        if not ids:
            raise CacheError("eviction requested with no eligible candidates")
        return ids[int(self._rng.integers(len(ids)))]


class LeCaRCache(Cache):
    """Regret-minimization arbiter between an LRU and an LFU expert.

    A miss found in an expert's ghost list means that expert's past eviction
    was a mistake; its weight decays by exp(-learning_rate * d^age) where
    d = discount_base ** (1 / history objects). Victims are drawn from the
    expert chosen with probability proportional to the weights.
    """

    name = "lecar"

    def __init__(self, capacity_bytes: int, seed: int = 0, *,
                 learning_rate: float = 0.45, discount_base: float = 0.005,
                 object_capacity: int | None = None,
                 mean_object_bytes: int = 4 * MIB):
        super().__init__(capacity_bytes)
        n_objects = object_capacity or max(1, capacity_bytes // mean_object_bytes)
        self.learning_rate = learning_rate
        self.discount = discount_base ** (1.0 / n_objects)
        self.history_cap = n_objects
        self.w_lru = 0.5
        self._rng = substream(seed, "lecar")
        self._order = OrderedDict()
        self._freq = {}          # kept for cached ids and ghosts
        self._h_lru = OrderedDict()   # vid -> (evict_time, freq)
        self._h_lfu = OrderedDict()
        self._time = 0

    def _record_access(self, vid, tick) -> None:
        self._time += 1
        if vid not in self._sizes:
            self._learn_from_miss(vid)

    def _learn_from_miss(self, vid) -> None:
        entry = self._h_lru.pop(vid, None)
        if entry is not None:
            self._penalize(lru_expert=True, evict_time=entry[0])
            self._freq[vid] = entry[1]
            return
        entry = self._h_lfu.pop(vid, None)
        if entry is not None:
            self._penalize(lru_expert=False, evict_time=entry[0])
            self._freq[vid] = entry[1]

    def _penalize(self, lru_expert: bool, evict_time: int) -> None:
        regret = self.discount ** (self._time - evict_time)
        scale = math.exp(-self.learning_rate * regret)
        w_lru, w_lfu = self.w_lru, 1.0 - self.w_lru
        if lru_expert:
            w_lru *= scale
        else:
            w_lfu *= scale
        self.w_lru = w_lru / (w_lru + w_lfu)

    def _touch(self, vid, tick) -> None:
        super()._touch(vid, tick)
        self._order.move_to_end(vid)
        self._freq[vid] += 1

    def _insert(self, vid, size, tick, video) -> None:
        super()._insert(vid, size, tick, video)
        self._order[vid] = None
        self._freq[vid] = self._freq.get(vid, 0) + 1

    def _on_evict(self, vid) -> None:
        del self._order[vid]

    def _ghost(self, history: OrderedDict, vid) -> None:
        history[vid] = (self._time, self._freq[vid])
        while len(history) > self.history_cap:
            old, _ = history.popitem(last=False)
            if old not in self._sizes and old not in self._h_lru and old not in self._h_lfu:
                self._freq.pop(old, None)

    def _evict_victim(self, exempt=None):
        if self._rng.random() < self.w_lru:
            victim = None
            for vid in self._order:
                if vid != exempt:
                    victim = vid
                    break
            if victim is None:
                raise CacheError("eviction requested with no eligible candidates")
            self._ghost(self._h_lru, victim)
        else:
            victim = _scan_min(self, self._freq.__getitem__, exempt)
            self._ghost(self._h_lfu, victim)
        return victim


class StaticTopKCache(Cache):
    """Preloaded with the most popular videos that fit; never admits/evicts."""

    name = "topk"
    admits = False

    def __init__(self, capacity_bytes: int, preload):
        super().__init__(capacity_bytes)
        ranked = sorted(preload, key=lambda r: (-r.play_count, r.video_id))
        for rec in ranked:
            if self.used_bytes + rec.size_bytes <= self.capacity_bytes:
                self._sizes[rec.video_id] = rec.size_bytes
                self._last[rec.video_id] = 0.0
                self.used_bytes += rec.size_bytes

    def _evict_victim(self, exempt=None):
        raise CacheError("static cache never evicts")


_POLICY_CLASSES = {
    "llf": LookaheadFrequencyCache,
    "fif": FurthestInFutureCache,
    "lru": LRUCache,
    "lfu": LFUCache,
    "fifo": FIFOCache,
    "gdsf": GDSFCache,
    "lfuda": LFUDACache,
    "random": RandomCache,
    "lecar": LeCaRCache,
    "topk": StaticTopKCache,
}


def create_cache(config: CacheConfig, *, seed: int = 0, preload=None) -> Cache:
    """Instantiate the cache for a validated CacheConfig.

    topk requires `preload`, an iterable of candidate VideoRecords (e.g. this
    server's shard of the catalog)."""
    config.validate()
    params = dict(config.policy_params)
    cls = _POLICY_CLASSES[config.policy]
    if config.policy == "topk":
        if preload is None:
            raise ConfigError("topk requires preload candidates")
        return cls(config.capacity_bytes, preload)
    if config.policy in ("random", "lecar"):
        return cls(config.capacity_bytes, seed=params.pop("seed", seed), **params)
    return cls(config.capacity_bytes, **params)
