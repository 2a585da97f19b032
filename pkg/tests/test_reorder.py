from collections import Counter

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from svcache.catalog import ManifestFile
from svcache.reorder import displacement_histogram, reorder_manifest

X, Y, Z = 10, 11, 12
A, B, C, D = 1, 2, 3, 4


def mf(entries, user=0, no=0):
    return ManifestFile(user, no, tuple(entries))


def test_cached_first_rest_original_order():
    decision = reorder_manifest(mf([X, Y, Z]), {Z}, {X: 1, Y: 1, Z: 1})
    assert decision.reordered == (Z, X, Y)


def test_three_groups_sorted_by_frequency():
    decision = reorder_manifest(mf([A, B, C, D]), {B, D},
                                {B: 2, D: 5, C: 3, A: 1})
    assert decision.reordered == (D, B, C, A)


def test_identity_when_all_cached_equal_frequency():
    decision = reorder_manifest(mf([A, B, C]), {A, B, C}, {A: 2, B: 2, C: 2})
    assert decision.reordered == (A, B, C)
    assert decision.displacement == (0, 0, 0)


def test_empty_manifest():
    decision = reorder_manifest(mf([]), set(), {})
    assert decision.reordered == () and decision.displacement == ()


def test_displacement_alignment():
    decision = reorder_manifest(mf([X, Y]), {Y}, {X: 1, Y: 1})
    assert decision.reordered == (Y, X)
    assert decision.displacement == (-1, 1)


manifest_strategy = st.lists(st.integers(1, 12), min_size=1, max_size=30)


@st.composite
def reorder_inputs(draw):
    entries = draw(manifest_strategy)
    universe = set(entries)
    cached = draw(st.sets(st.sampled_from(sorted(universe))))
    own = Counter(entries)
    freq = {v: own[v] + draw(st.integers(0, 5)) for v in universe}
    return entries, cached, freq


@given(reorder_inputs())
@settings(max_examples=300, deadline=None)
def test_permutation_and_zero_sum(inputs):
    entries, cached, freq = inputs
    decision = reorder_manifest(mf(entries), cached, freq)
    assert Counter(decision.reordered) == Counter(entries)
    assert sum(decision.displacement) == 0
    assert len(decision.displacement) == len(entries)


@given(reorder_inputs())
@settings(max_examples=300, deadline=None)
def test_idempotent_under_unchanged_state(inputs):
    entries, cached, freq = inputs
    first = reorder_manifest(mf(entries), cached, freq)
    second = reorder_manifest(mf(first.reordered), cached, freq)
    assert second.reordered == first.reordered


@given(reorder_inputs())
@settings(max_examples=300, deadline=None)
def test_group_structure_and_stability(inputs):
    entries, cached, freq = inputs
    own = Counter(entries)
    decision = reorder_manifest(mf(entries), cached, freq)

    def group_of(vid):
        if vid in cached:
            return 0
        return 1 if freq.get(vid, 0) > own[vid] else 2

    groups = [group_of(v) for v in decision.reordered]
    assert groups == sorted(groups)
    # within groups 0/1: descending frequency; ties keep original order
    orig_pos = {}
    for idx, vid in enumerate(entries):
        orig_pos.setdefault(vid, []).append(idx)
    for g in (0, 1):
        seq = [v for v in decision.reordered if group_of(v) == g]
        freqs = [freq.get(v, 0) for v in seq]
        assert freqs == sorted(freqs, reverse=True)
    # group 2 keeps original relative order exactly
    g2 = [v for v in decision.reordered if group_of(v) == 2]
    assert g2 == [v for v in entries if group_of(v) == 2]


def test_histogram_identity_reorder():
    decisions = [reorder_manifest(mf([A, B, C]), set(), {A: 1, B: 1, C: 1})]
    assert dict(displacement_histogram(decisions)) == {0: 3}


def test_histogram_adjacent_swap():
    decision = reorder_manifest(mf([A, B]), {B}, {A: 1, B: 1})
    hist = displacement_histogram([decision])
    assert dict(hist) == {-1: 1, 1: 1}


def test_histogram_symmetric_over_random_manifests():
    rng = np.random.default_rng(4)
    decisions = []
    for i in range(10_000):
        entries = [int(v) for v in rng.integers(1, 40, size=30)]
        own = Counter(entries)
        cached = {v for v in own if rng.random() < 0.3}
        freq = {v: own[v] + int(rng.integers(0, 4)) for v in own}
        d = reorder_manifest(mf(entries, no=i), cached, freq)
        assert sum(d.displacement) == 0
        decisions.append(d)
    hist = displacement_histogram(decisions)
    total = sum(hist.values())
    mean = sum(k * c for k, c in hist.items()) / total
    assert abs(mean) < 0.05
