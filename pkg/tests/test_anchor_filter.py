import itertools
from math import comb

import numpy as np
import pytest
from scipy import stats

from promogen.anchor_filter import (
    FilterParams,
    VirtualSelection,
    _map_virtual_recurrence,
    count_valid,
    map_virtual,
    sample_anchors,
)
from promogen.errors import InfeasibleAnchors


def brute_force_placements(n, count, gap):
    """All strictly increasing index tuples with consecutive gaps > gap."""
    out = []
    for combo in itertools.combinations(range(n), count):
        if all(b - a >= gap + 1 for a, b in zip(combo, combo[1:])):
            out.append(combo)
    return out


def test_count_valid_examples():
    assert count_valid(FilterParams(120, 10, 8)) == comb(48, 10)
    p = FilterParams(120, 10, 8)
    assert p.slack == 38
    assert p.virtual_total == 48
    for gap in (0, 3, 100):
        assert count_valid(FilterParams(10, 1, gap)) == 10
    assert count_valid(FilterParams(12, 3, 2)) == 56
    assert len(brute_force_placements(12, 3, 2)) == 56
    assert count_valid(FilterParams(120, 30, 4)) == 0


def test_params_validation():
    with pytest.raises(ValueError):
        FilterParams(0, 1, 0)
    with pytest.raises(ValueError):
        FilterParams(10, 0, 0)
    with pytest.raises(ValueError):
        FilterParams(10, 1, -1)


def test_virtual_selection_validation():
    with pytest.raises(ValueError):
        VirtualSelection(p=np.array([0, 1]), virtual_total=5)
    with pytest.raises(ValueError):
        VirtualSelection(p=np.array([1, 6]), virtual_total=5)
    with pytest.raises(ValueError):
        VirtualSelection(p=np.array([2, 2]), virtual_total=5)
    sel = VirtualSelection(p=np.array([1, 3, 4]), virtual_total=6)
    np.testing.assert_array_equal(sel.slacks(), [0, 1, 0])


def test_map_virtual_worked_example():
    # ten anchors, gap 8, in 120 frames
    p = np.array([0, 5, 12, 15, 21, 26, 29, 35, 40, 47]) + 1
    sel = VirtualSelection(p=p, virtual_total=48)
    got = map_virtual(sel, gap=8)
    np.testing.assert_array_equal(
        got, [0, 13, 28, 39, 53, 66, 77, 91, 104, 119]
    )
    np.testing.assert_array_equal(_map_virtual_recurrence(sel, 8), got)


def test_map_virtual_single_anchor():
    for k in (1, 4, 9):
        sel = VirtualSelection(p=np.array([k]), virtual_total=10)
        np.testing.assert_array_equal(map_virtual(sel, gap=7), [k - 1])


def test_map_virtual_zero_slack_lattice():
    # nine frames, three anchors, gap three: no slack, unique placement
    params = FilterParams(9, 3, 3)
    assert params.slack == 0
    assert count_valid(params) == 1
    sel = VirtualSelection(p=np.array([1, 2, 3]), virtual_total=3)
    np.testing.assert_array_equal(map_virtual(sel, gap=3), [0, 4, 8])
    rng = np.random.default_rng(0)
    np.testing.assert_array_equal(sample_anchors(params, rng), [0, 4, 8])


def test_recurrence_matches_closed_form():
    rng = np.random.default_rng(123)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(1, 200))
        count = int(rng.integers(1, 12))
        gap = int(rng.integers(0, 12))
        params = FilterParams(n, count, gap)
        if not params.feasible:
            continue
        p = np.sort(
            rng.choice(params.virtual_total, size=count, replace=False)
        ) + 1
        sel = VirtualSelection(p=p, virtual_total=params.virtual_total)
        np.testing.assert_array_equal(
            map_virtual(sel, gap), _map_virtual_recurrence(sel, gap)
        )
        checked += 1


def test_bijection_exhaustive_small_n():
    # the virtual-to-real map must hit every valid placement exactly once
    for n in range(1, 15):
        for count in range(1, n + 1):
            for gap in range(0, n):
                params = FilterParams(n, count, gap)
                if not params.feasible:
                    assert count_valid(params) == 0
                    continue
                t = params.virtual_total
                image = set()
                for combo in itertools.combinations(range(1, t + 1), count):
                    sel = VirtualSelection(p=np.array(combo), virtual_total=t)
                    x = map_virtual(sel, gap)
                    assert np.all(np.diff(x) >= gap + 1)
                    assert 0 <= x[0] and x[-1] <= n - 1
                    image.add(tuple(int(v) for v in x))
                truth = set(brute_force_placements(n, count, gap))
                assert image == truth
                assert count_valid(params) == len(truth)


def test_sample_anchors_spacing_and_bounds():
    rng = np.random.default_rng(7)
    for _ in range(500):
        n = int(rng.integers(1, 300))
        count = int(rng.integers(1, 15))
        gap = int(rng.integers(0, 10))
        params = FilterParams(n, count, gap)
        if not params.feasible:
            with pytest.raises(InfeasibleAnchors):
                sample_anchors(params, rng)
            continue
        x = sample_anchors(params, rng)
        assert x.shape == (count,)
        assert x[0] >= 0 and x[-1] <= n - 1
        if count > 1:
            assert np.diff(x).min() >= gap + 1


def test_sample_anchors_deterministic_under_seed():
    a = [sample_anchors(FilterParams(50, 5, 3), np.random.default_rng(42))
         for _ in range(3)]
    for x in a[1:]:
        np.testing.assert_array_equal(x, a[0])
    rng1 = np.random.default_rng(9)
    rng2 = np.random.default_rng(9)
    for _ in range(20):
        np.testing.assert_array_equal(
            sample_anchors(FilterParams(50, 5, 3), rng1),
            sample_anchors(FilterParams(50, 5, 3), rng2),
        )


def test_sample_anchors_infeasible_error_fields():
    with pytest.raises(InfeasibleAnchors) as ei:
        sample_anchors(FilterParams(120, 30, 4), np.random.default_rng(0))
    assert ei.value.n_frames == 120
    assert ei.value.count == 30
    assert ei.value.gap == 4


def test_sample_anchors_uniform_chi_square():
    params = FilterParams(12, 3, 2)
    placements = brute_force_placements(12, 3, 2)
    index = {p: i for i, p in enumerate(placements)}
    counts = np.zeros(len(placements), dtype=np.int64)
    rng = np.random.default_rng(2024)
    n_draws = 56_000
    for _ in range(n_draws):
        x = sample_anchors(params, rng)
        counts[index[tuple(int(v) for v in x)]] += 1
    assert counts.sum() == n_draws
    result = stats.chisquare(counts)
    assert result.pvalue > 0.01
