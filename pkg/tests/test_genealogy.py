import math

import numpy as np
import pytest

from polarsim import genealogy, sphere
from polarsim.engine import MembraneState
from polarsim.errors import EmptyMembrane, InsufficientData


def make_state(clans, positions=None, n_total=None, now=0.0, radius=1.0):
    clans = np.asarray(clans, dtype=np.int64)
    n = clans.shape[0]
    if positions is None:
        rng = np.random.default_rng(abs(hash(tuple(clans.tolist()))) % 2**32)
        positions = sphere.sample_uniform(radius, rng, size=n) if n else np.zeros((0, 3))
    if n_total is None:
        n_total = max(2 * n, 2)
    return MembraneState.from_arrays(
        n_total, 1e-3, 0.0, now, np.asarray(positions, dtype=float), clans,
        np.full(n, now), next_clan_id=int(clans.max()) + 1 if n else 0,
    )


def test_spectrum_basic():
    st = make_state([7, 7, 7, 9])
    assert np.allclose(genealogy.clan_spectrum(st), [0.75, 0.25])
    assert genealogy.clan_spectrum(make_state([])).size == 0
    assert np.allclose(genealogy.clan_spectrum(make_state([1, 2, 3, 4])), [0.25] * 4)


def test_spectrum_normalized_and_sorted():
    rng = np.random.default_rng(0)
    for _ in range(20):
        clans = rng.integers(0, 6, size=rng.integers(1, 40))
        spec = genealogy.clan_spectrum(make_state(clans))
        assert spec.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(spec) <= 0)


def test_spread_antipodal_pair():
    st = make_state([3, 3], positions=[[0, 0, 1.0], [0, 0, -1.0]])
    acc = genealogy.accumulate_spread(st, genealogy.SpreadAccumulator())
    assert acc.num == pytest.approx(4.0, abs=1e-12)
    assert acc.den == 1
    assert acc.ratio == pytest.approx(4.0)


def test_spread_all_distinct_clans():
    st = make_state([1, 2, 3, 4, 5])
    acc = genealogy.accumulate_spread(st, genealogy.SpreadAccumulator())
    assert acc.num == 0.0 and acc.den == 0.0
    assert math.isnan(acc.ratio)


def test_spread_closed_form_matches_enumeration():
    rng = np.random.default_rng(1)
    pts = sphere.sample_uniform(2.0, rng, size=9)
    st = make_state([0] * 6 + [1] * 3, positions=pts, radius=2.0)
    acc = genealogy.accumulate_spread(st, genealogy.SpreadAccumulator())
    num = 0.0
    pairs = 0
    clans = np.array([0] * 6 + [1] * 3)
    for i in range(9):
        for j in range(i + 1, 9):
            if clans[i] == clans[j]:
                num += sphere.chord_sq(pts[i], pts[j])
                pairs += 1
    assert acc.den == pairs == 15 + 3
    assert acc.num == pytest.approx(num, rel=1e-12)


def test_spread_subsample_unbiased():
    rng = np.random.default_rng(2)
    pts = sphere.sample_uniform(1.0, rng, size=120)
    clans = np.repeat([0, 1, 2], 40)
    st = make_state(clans, positions=pts)
    exact = genealogy.accumulate_spread(st, genealogy.SpreadAccumulator())
    total_pairs = 3 * (40 * 39 // 2)
    assert exact.den == total_pairs
    ratios = []
    for k in range(300):
        sub = genealogy.accumulate_spread(
            st, genealogy.SpreadAccumulator(), max_pairs=100,
            rng=np.random.default_rng(1000 + k),
        )
        assert sub.den == total_pairs
        ratios.append(sub.ratio)
    assert np.mean(ratios) == pytest.approx(exact.ratio, rel=0.03)
    assert all(0.0 <= r <= 4.0 for r in ratios)


def test_spread_requires_rng_for_subsampling():
    st = make_state([0] * 80)
    with pytest.raises(ValueError):
        genealogy.accumulate_spread(st, genealogy.SpreadAccumulator(), max_pairs=10)


def test_spread_merge():
    a = genealogy.SpreadAccumulator(4.0, 2.0)
    b = genealogy.SpreadAccumulator(1.0, 1.0)
    m = a.merge(b)
    assert m.num == 5.0 and m.den == 3.0


def test_polarity_single_point_clan():
    st = make_state([5] * 8, positions=np.tile([0.0, 0.0, 1.0], (8, 1)))
    for eps in (0.05, 0.2, 0.5, 0.9):
        res = genealogy.polarity_check(st, eps)
        assert res.is_polarized
        assert res.clan == 5
        assert res.clan_fraction == 1.0
        assert res.hemisphere_fraction == 1.0


def test_polarity_small_largest_clan():
    # largest clan holds half the membrane: below sqrt(1-0.2) ~ 0.894
    st = make_state([1, 1, 2, 2])
    res = genealogy.polarity_check(st, 0.2)
    assert not res.is_polarized
    assert res.pole is None


def test_polarity_tetrahedron_clan_not_polarized():
    pts = np.array([
        [1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0],
    ]) / math.sqrt(3.0)
    st = make_state([4, 4, 4, 4], positions=pts)
    res = genealogy.polarity_check(st, 0.2, mode="exact")
    assert res.clan_fraction == 1.0
    assert res.hemisphere_fraction == pytest.approx(0.75)
    assert not res.is_polarized


def test_polarity_implies_both_factors():
    rng = np.random.default_rng(3)
    for _ in range(30):
        n = int(rng.integers(2, 30))
        clans = rng.integers(0, 3, size=n)
        st = make_state(clans)
        eps = float(rng.uniform(0.05, 0.6))
        res = genealogy.polarity_check(st, eps)
        if res.is_polarized:
            thr = math.sqrt(1.0 - eps)
            assert res.clan_fraction >= thr >= 1.0 - eps
            assert res.hemisphere_fraction >= thr


def test_polarity_monotone_in_eps():
    rng = np.random.default_rng(4)
    for _ in range(20):
        clans = np.zeros(12, dtype=int)
        clans[: rng.integers(0, 3)] = 1
        st = make_state(clans)
        flags = [genealogy.polarity_check(st, eps).is_polarized
                 for eps in (0.1, 0.3, 0.5, 0.8)]
        # once polarized, stays polarized as eps grows
        assert flags == sorted(flags)


def test_polarity_empty_membrane():
    res = genealogy.polarity_check(make_state([]), 0.2)
    assert not res.is_polarized
    assert res.clan is None and res.pole is None


def test_polarity_subsamples_large_clans():
    rng = np.random.default_rng(5)
    pts = sphere.sample_uniform(1.0, rng, size=500)
    st = make_state([0] * 500, positions=pts)
    res = genealogy.polarity_check(st, 0.2, rng=np.random.default_rng(6))
    assert res.subsampled
    with pytest.raises(ValueError):
        genealogy.polarity_check(st, 0.2)  # no rng provided


def _row(time, largest, polarized, n=10):
    return genealogy.SnapshotStats(
        time=time, n=n, h=0.5, num_clans=2, largest=largest, second=1 - largest,
        spread_num=0.0, spread_den=0.0, polarized=polarized, pole=None,
    )


def test_occupancy_basic():
    rows = [_row(t, 0.95, True) for t in range(10)]
    occ = genealogy.occupancy(rows, 0.2, decorrelation_gap=1.0)
    assert occ.p_hat == 1.0
    assert occ.q_hat == 1.0
    assert occ.eff_n == 10


def test_occupancy_q_threshold():
    # sqrt(1 - 0.19) = 0.9 > 0.5, so V1 = 0.5 never counts
    rows = [_row(t, 0.5, False) for t in range(5)]
    occ = genealogy.occupancy(rows, 0.19, decorrelation_gap=1.0)
    assert occ.q_hat == 0.0


def test_occupancy_needs_two_snapshots():
    with pytest.raises(InsufficientData):
        genealogy.occupancy([_row(0.0, 1.0, True)], 0.2, 1.0)


def test_occupancy_effective_samples_capped():
    rows = [_row(0.1 * t, 0.95, True) for t in range(11)]  # span 1.0, gap 0.5
    occ = genealogy.occupancy(rows, 0.2, decorrelation_gap=0.5)
    assert occ.eff_n == 3
    assert occ.p_ci[0] < occ.p_hat  # CI reflects the reduced count


def test_occupancy_merge():
    rows_a = [_row(t, 0.95, True) for t in range(4)]
    rows_b = [_row(t, 0.5, False) for t in range(4)]
    a = genealogy.occupancy(rows_a, 0.2, 1.0)
    b = genealogy.occupancy(rows_b, 0.2, 1.0)
    merged = genealogy.merge_occupancy([a, b], 0.2)
    assert merged.p_hat == pytest.approx(0.5)
    assert merged.eff_n == 8
    assert len(merged.largest_series) == 8


def test_default_decorrelation_gap():
    assert genealogy.default_decorrelation_gap(0.05) == pytest.approx(100.0)
    assert math.isinf(genealogy.default_decorrelation_gap(0.0))


def test_distinct_clans():
    rng = np.random.default_rng(7)
    st = make_state([0, 0, 0, 1, 1, 2])
    assert genealogy.distinct_clans(st, 1, rng) == 1
    assert genealogy.distinct_clans(make_state([4] * 20), 50, rng) == 1
    counts = [genealogy.distinct_clans(st, 500, rng) for _ in range(50)]
    assert max(counts) == 3  # with replacement, 500 draws find all 3 clans
    with pytest.raises(EmptyMembrane):
        genealogy.distinct_clans(make_state([]), 5, rng)
    with pytest.raises(ValueError):
        genealogy.distinct_clans(st, 0, rng)


def test_snapshot_stats_row():
    st = make_state([0, 0, 1], now=2.5, n_total=6)
    row = genealogy.snapshot_stats(st, eps=0.2, rng=np.random.default_rng(8))
    assert row.time == 2.5
    assert row.n == 3
    assert row.h == pytest.approx(0.5)
    assert row.num_clans == 2
    assert row.largest == pytest.approx(2 / 3)
    assert row.second == pytest.approx(1 / 3)
    assert row.spread_den == 1
    assert isinstance(row.polarized, bool)


def test_wilson_interval():
    lo, hi = genealogy.wilson_interval(0, 20)
    assert lo == 0.0 and hi < 0.2
    lo, hi = genealogy.wilson_interval(20, 20)
    assert hi == 1.0 and lo > 0.8
    lo, hi = genealogy.wilson_interval(10, 20)
    assert lo < 0.5 < hi
