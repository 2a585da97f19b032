"""Online manifest reordering.

Each manifest arriving at the CDN is permuted once, to cluster requests for
the same video in time across users: cached entries come first (highest
cross-user demand leading), then uncached entries some other active user also
wants, then everything else in its original order. The set of entries is
never changed, only their order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .catalog import ManifestFile


@dataclass(frozen=True)
class ReorderDecision:
    original: tuple
    reordered: tuple
    displacement: tuple   # new index - old index, aligned to `reordered`

    def manifest(self, user_id: int, sequence_no: int) -> ManifestFile:
        return ManifestFile(user_id, sequence_no, self.reordered)


def reorder_manifest(manifest: ManifestFile, cache_view,
                     lookahead_freq) -> ReorderDecision:
    """Permute a manifest into (cached, cross-user-wanted, rest) groups.

    `lookahead_freq` maps video id to its total unserved count across all
    active manifests and must already include this manifest's own entries.
    Groups 1 and 2 are sorted by descending frequency; ties and group 3 keep
    original order. An entry counts as cross-user-wanted only when its
    frequency exceeds this manifest's own contribution.
    """
    entries = manifest.entries
    own = Counter(entries)
    group1, group2, group3 = [], [], []
    for idx, vid in enumerate(entries):
        if vid in cache_view:
            group1.append((idx, vid))
        elif lookahead_freq.get(vid, 0) > own[vid]:
            group2.append((idx, vid))
        else:
            group3.append((idx, vid))
    group1.sort(key=lambda iv: (-lookahead_freq.get(iv[1], 0), iv[0]))
    group2.sort(key=lambda iv: (-lookahead_freq.get(iv[1], 0), iv[0]))

    ordered = group1 + group2 + group3
    reordered = tuple(vid for _, vid in ordered)
    displacement = tuple(new - old for new, (old, _) in enumerate(ordered))
    return ReorderDecision(entries, reordered, displacement)


def displacement_histogram(decisions) -> Counter:
    """Counts of per-entry displacement values across decisions."""
    hist = Counter()
    for d in decisions:
        hist.update(d.displacement)
    return hist
