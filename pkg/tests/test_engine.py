import math

import numpy as np
import pytest

from polarsim import engine, validate_params
from polarsim.engine import (
    Association,
    Dissociation,
    Recruitment,
    apply_event,
    draw_event,
    empty_state,
    simulate,
    simulate_counts,
    total_rate,
)
from polarsim.errors import InvalidParameter, Stuck, Subcritical
from polarsim.seeding import substream

PARAMS = validate_params(n_total=1000, diffusion=0.05, radius=1.0,
                         k_on=0.1, k_off=1.0, k_fb=2.0)
SMALL = validate_params(n_total=50, diffusion=0.05, radius=1.0,
                        k_on=0.1, k_off=1.0, k_fb=2.0)


def test_total_rate_boundaries():
    r0 = total_rate(0, PARAMS)
    assert r0.total == r0.association == pytest.approx(0.1 * 1000)
    assert r0.dissociation == 0.0 and r0.recruitment == 0.0
    rN = total_rate(1000, PARAMS)
    assert rN.total == rN.dissociation == pytest.approx(1.0 * 1000**2)
    assert rN.association == 0.0 and rN.recruitment == 0.0


def test_total_rate_reference_value():
    r = total_rate(500, PARAMS)
    assert r.association == pytest.approx(50.0)
    assert r.dissociation == pytest.approx(500_000.0)
    assert r.recruitment == pytest.approx(500_000.0)
    assert r.total == pytest.approx(1_000_050.0)


def _filled_state(params, n, rng):
    state = empty_state(params)
    for _ in range(n):
        apply_event(state, Association(), params, rng)
    return state


def test_draw_event_boundaries():
    rng = np.random.default_rng(0)
    state = empty_state(PARAMS)
    for _ in range(10):
        _, kind = draw_event(state, PARAMS, rng)
        assert isinstance(kind, Association)
    full = _filled_state(PARAMS, 1000, rng)
    for _ in range(10):
        _, kind = draw_event(full, PARAMS, rng)
        assert isinstance(kind, Dissociation)


def test_draw_event_stuck():
    p = validate_params(n_total=5, diffusion=0.0, radius=1.0,
                        k_on=0.0, k_off=1.0, k_fb=2.0)
    with pytest.raises(Stuck):
        draw_event(empty_state(p), p, np.random.default_rng(1))


def test_draw_event_kind_frequencies():
    # multinomial check against the exact rate fractions at fixed n
    rng = np.random.default_rng(2)
    state = _filled_state(PARAMS, 300, rng)
    rates = total_rate(300, PARAMS)
    draws = 100_000
    counts = {"a": 0, "d": 0, "r": 0}
    waits = []
    for _ in range(draws):
        wait, kind = draw_event(state, PARAMS, rng)
        waits.append(wait)
        if isinstance(kind, Association):
            counts["a"] += 1
        elif isinstance(kind, Dissociation):
            counts["d"] += 1
            assert 0 <= kind.victim < 300
        else:
            counts["r"] += 1
            assert 0 <= kind.parent < 300
    for key, rate in (("a", rates.association), ("d", rates.dissociation),
                      ("r", rates.recruitment)):
        p = rate / rates.total
        sigma = math.sqrt(draws * p * (1 - p))
        assert abs(counts[key] - draws * p) <= 3.5 * sigma
    assert np.mean(waits) == pytest.approx(1.0 / rates.total, rel=0.02)


def test_apply_association():
    rng = np.random.default_rng(3)
    state = empty_state(PARAMS)
    apply_event(state, Association(), PARAMS, rng)
    assert state.n == 1
    assert state.next_clan_id == 1
    assert state.clans[0] == 0
    assert np.linalg.norm(state.positions[0]) == pytest.approx(1.0, rel=1e-9)


def test_apply_recruitment_copies_parent():
    rng = np.random.default_rng(4)
    state = empty_state(PARAMS)
    apply_event(state, Association(), PARAMS, rng)
    state.now = 0.37  # parent must be materialized to now before copying
    apply_event(state, Recruitment(0), PARAMS, rng)
    assert state.n == 2
    assert state.next_clan_id == 1  # no new clan
    assert state.clans[1] == state.clans[0]
    assert np.array_equal(state.positions[1], state.positions[0])
    assert state.last_update[0] == state.last_update[1] == 0.37


def test_apply_dissociation_swap_remove():
    rng = np.random.default_rng(5)
    state = _filled_state(PARAMS, 3, rng)
    clans_before = state.clans.copy()
    apply_event(state, Dissociation(0), PARAMS, rng)
    assert state.n == 2
    assert state.clans[0] == clans_before[2]  # last row swapped in
    apply_event(state, Dissociation(1), PARAMS, rng)
    apply_event(state, Dissociation(0), PARAMS, rng)
    assert state.n == 0


def test_apply_event_index_errors():
    rng = np.random.default_rng(6)
    state = _filled_state(PARAMS, 2, rng)
    with pytest.raises(IndexError):
        apply_event(state, Dissociation(2), PARAMS, rng)
    with pytest.raises(IndexError):
        apply_event(state, Recruitment(-1), PARAMS, rng)


def test_clan_bookkeeping_along_run():
    rng = np.random.default_rng(7)
    state = empty_state(SMALL)
    state.now = 0.0
    associations = 0
    for _ in range(4000):
        rates = total_rate(state.n, SMALL)
        if rates.total == 0.0:
            break
        wait, kind = draw_event(state, SMALL, rng)
        state.now += wait
        apply_event(state, kind, SMALL, rng)
        if isinstance(kind, Association):
            associations += 1
        ids, counts = np.unique(state.clans, return_counts=True)
        assert counts.sum() == state.n
        assert state.n + state.cytosol == SMALL.n_total
        assert 0 <= state.n <= SMALL.n_total
        if state.n:
            assert ids.max() < state.next_clan_id
    assert state.next_clan_id == associations


def test_simulate_t_end_zero():
    res = simulate(PARAMS, 0.0, [0.0], np.random.default_rng(8))
    assert len(res.snapshots) == 1
    assert res.snapshots[0].n == 0
    assert res.snapshots[0].now == 0.0
    assert res.counts.total == 0


def test_simulate_no_immigration_stays_empty():
    p = validate_params(n_total=100, diffusion=0.05, radius=1.0,
                        k_on=0.0, k_off=1.0, k_fb=2.0)
    res = simulate(p, 2.0, [0.0, 1.0, 2.0], np.random.default_rng(9))
    assert [s.n for s in res.snapshots] == [0, 0, 0]
    assert res.counts.total == 0
    assert res.final.now == 2.0


def test_simulate_deterministic():
    times = [0.0, 0.1, 0.2]
    a = simulate(SMALL, 0.2, times, np.random.default_rng(10))
    b = simulate(SMALL, 0.2, times, np.random.default_rng(10))
    assert a.counts == b.counts
    for sa, sb in zip(a.snapshots, b.snapshots):
        assert sa.n == sb.n
        assert np.array_equal(sa.positions, sb.positions)
        assert np.array_equal(sa.clans, sb.clans)


def test_simulate_norm_preservation_and_mass():
    res = simulate(SMALL, 0.5, np.linspace(0.0, 0.5, 6), np.random.default_rng(11))
    for snap in res.snapshots:
        if snap.n:
            norms = np.linalg.norm(snap.positions, axis=1)
            assert np.max(np.abs(norms - 1.0)) <= 1e-9
        assert snap.n + snap.cytosol == SMALL.n_total


def test_simulate_snapshots_are_deep_copies():
    res = simulate(SMALL, 0.3, [0.1, 0.3], np.random.default_rng(12))
    first = res.snapshots[0]
    n = first.n
    before = first.positions.copy()
    res.final.positions[:] = 0.0  # mutating the final state
    assert np.array_equal(first.positions, before)
    assert first.n == n


def test_simulate_validates_inputs():
    rng = np.random.default_rng(13)
    with pytest.raises(ValueError):
        simulate(SMALL, -1.0, [], rng)
    with pytest.raises(ValueError):
        simulate(SMALL, 1.0, [0.5, 0.2], rng)
    with pytest.raises(ValueError):
        simulate(SMALL, 1.0, [0.5, 2.0], rng)
    with pytest.raises(ValueError):
        simulate(SMALL, 1.0, [0.0], rng, update="sloppy")


def test_simulate_restart_from_snapshot():
    rng = np.random.default_rng(14)
    res = simulate(SMALL, 0.3, [0.3], rng)
    restart = simulate(SMALL, 0.6, [0.6], rng, initial=res.final)
    assert restart.final.now == 0.6
    assert restart.snapshots[0].next_clan_id >= res.final.next_clan_id
    # restart must not perturb the source state
    assert res.final.now == 0.3


def test_equilibrium_fraction_small_system():
    # reduced version of the equilibrium check; the acceptance suite runs the
    # pinned N=1000 parameters
    p = validate_params(n_total=200, diffusion=0.0, radius=1.0,
                        k_on=0.1, k_off=1.0, k_fb=2.0)
    times = np.linspace(0.3, 0.9, 31)
    res = simulate(p, 0.9, times, np.random.default_rng(15))
    hbar = np.mean([s.h for s in res.snapshots])
    assert hbar == pytest.approx(0.5, abs=0.06)


def test_simulate_counts_first_hit_exponential():
    # target ceil(eps*N) = 1: the hit is the first association, an
    # Exponential(k_on*N) time
    p = validate_params(n_total=1000, diffusion=0.0, radius=1.0,
                        k_on=0.1, k_off=1.0, k_fb=2.0)
    rhos = np.array([
        simulate_counts(p, 1 / 2000, substream(17, 0, r)).rho for r in range(10_000)
    ])
    assert rhos.mean() == pytest.approx(1.0 / (0.1 * 1000), rel=0.05)
    assert all(simulate_counts(p, 1 / 2000, substream(18, 0, r)).events == 1
               for r in range(20))


def test_simulate_counts_errors():
    p = validate_params(n_total=100, diffusion=0.0, radius=1.0,
                        k_on=0.1, k_off=1.0, k_fb=2.0)
    with pytest.raises(Subcritical):
        simulate_counts(p, 0.6, np.random.default_rng(19))
    with pytest.raises(InvalidParameter):
        simulate_counts(p, 0.0, np.random.default_rng(20))
    p0 = validate_params(n_total=100, diffusion=0.0, radius=1.0,
                         k_on=0.0, k_off=1.0, k_fb=2.0)
    with pytest.raises(Stuck):
        simulate_counts(p0, 0.25, np.random.default_rng(21))


def test_molecule_views():
    rng = np.random.default_rng(22)
    state = _filled_state(PARAMS, 3, rng)
    mols = state.molecules
    assert len(mols) == 3
    assert all(isinstance(m, engine.Molecule) for m in mols)
    assert mols[0].clan == state.clans[0]
