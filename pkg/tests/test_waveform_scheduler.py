import numpy as np
import pytest
from scipy.constants import speed_of_light as C

from app.schemas.waveform import Band, GuardBudget, Subband
from app.services.waveform_scheduler import (
    allocate_states,
    assign_subbands,
    build_schedule,
    guard_budget_for_range,
    schedule_rows,
    validate_guard_gaps,
)
from app.utils.errors import ScheduleError
from tests.conftest import make_fabric, make_schedule


# =========================
# Subband assignment
# =========================

def test_subbands_tile_band_with_guards(band):
    subbands = assign_subbands(band, 4, 100e6)
    assert [s.module_id for s in subbands] == [0, 1, 2, 3]
    assert subbands[0].f_lo == band.f_lo
    assert subbands[-1].f_hi == band.f_hi
    widths = [s.width for s in subbands]
    assert np.allclose(widths, widths[0])
    for a, b in zip(subbands, subbands[1:]):
        assert b.f_lo - a.f_hi == pytest.approx(100e6)
    assert sum(widths) + 3 * 100e6 == pytest.approx(band.width)


def test_single_module_owns_whole_band(band):
    (sub,) = assign_subbands(band, 1, 0.0)
    assert (sub.f_lo, sub.f_hi) == (band.f_lo, band.f_hi)


def test_guards_consuming_band_are_infeasible(band):
    with pytest.raises(ScheduleError, match="infeasible"):
        assign_subbands(band, 4, 2e9)


def test_zero_modules_rejected(band):
    with pytest.raises(ScheduleError):
        assign_subbands(band, 0, 0.0)


def test_allocation_is_proportional_and_complete():
    subs = [Subband(module_id=0, f_lo=60e9, f_hi=61e9), Subband(module_id=1, f_lo=61e9, f_hi=63e9)]
    assert allocate_states(subs, 9) == [3, 6]
    assert sum(allocate_states(subs, 10)) == 10


# =========================
# Schedule construction
# =========================

def test_states_ascend_and_stay_inside_their_subband(fabric, schedule):
    centers = schedule.state_centers
    assert centers.size == 64
    assert np.all(np.diff(centers) > 0)
    half = schedule.chirp_bandwidth / 2.0
    for chirp in schedule.first_pass:
        sub = fabric.module(chirp.module_id).passband
        assert sub.contains_span(chirp.f_center - half, chirp.f_center + half)


def test_every_evolution_repeats_first_pass(schedule):
    assert len(schedule.chirps) == schedule.num_states * schedule.evolutions
    for q in range(schedule.evolutions):
        sweep = schedule.chirps[q * schedule.num_states:(q + 1) * schedule.num_states]
        assert [c.evolution for c in sweep] == [q] * schedule.num_states
        assert np.allclose([c.f_center for c in sweep], schedule.state_centers)


def test_consecutive_chirps_are_separated_by_guard_time(schedule):
    gaps = [b.t_start - a.t_end for a, b in zip(schedule.chirps, schedule.chirps[1:])]
    assert np.allclose(gaps, schedule.guard_time, rtol=0, atol=1e-15)


def test_chirp_wider_than_subband_rejected(band):
    fabric = make_fabric(band, num_modules=2)
    with pytest.raises(ScheduleError, match="exceeds"):
        make_schedule(fabric, band, chirp_bandwidth=3.5e9, max_range=None)


def test_undersampled_beat_rejected(fabric, band):
    # 80 MHz / 40 us over 200 m beats at ~2.67 MHz
    with pytest.raises(ScheduleError, match="beat frequency"):
        build_schedule(
            band, [m.passband for m in fabric.modules], 64, 80e6, 40e-6, 200e-9, 1,
            sample_rate=2e6, max_range=200.0,
        )



def test_overlapping_subbands_rejected(band):
    subs = [Subband(module_id=0, f_lo=60e9, f_hi=63.5e9), Subband(module_id=1, f_lo=63e9, f_hi=66e9)]
    with pytest.raises(ScheduleError, match="modules 0 and 1 overlap"):
        build_schedule(band, subs, 4, 80e6, 40e-6, 200e-9, 1)


def test_touching_subbands_each_own_their_chirps(band):
    subs = [Subband(module_id=0, f_lo=60e9, f_hi=63e9), Subband(module_id=1, f_lo=63e9, f_hi=66e9)]
    schedule = build_schedule(band, subs, 4, 80e6, 40e-6, 200e-9, 1)
    for chirp in schedule.chirps:
        lo, hi = chirp.f_center - 40e6, chirp.f_center + 40e6
        holders = [s.module_id for s in subs if s.contains_span(lo, hi, tol=1e-3)]
        assert holders == [chirp.module_id]

def test_pri_covers_one_sweep(schedule):
    assert schedule.pri == pytest.approx(64 * (40e-6 + 200e-9))


def test_schedule_rows_one_per_chirp(schedule):
    rows = schedule_rows(schedule)
    assert len(rows) == len(schedule.chirps)
    assert set(rows[0]) == {"state_index", "evolution", "f_center_hz", "bandwidth_hz", "t_start_s", "t_chirp_s"}


# =========================
# Guard validation
# =========================

def test_guard_budget_for_range_is_round_trip():
    assert guard_budget_for_range(5.0).t_max == pytest.approx(2 * 5.0 / C)


def test_guard_equal_to_budget_fails(fabric, band):
    budget = GuardBudget(t_max=150e-9, t_ringing=30e-9, t_multipath=20e-9)
    sched = make_schedule(fabric, band, guard_time=budget.total)
    report = validate_guard_gaps(sched, budget)
    assert not report.passed
    assert report.margin_s == pytest.approx(0.0, abs=1e-18)


def test_guard_above_budget_reports_margin(schedule):
    report = validate_guard_gaps(schedule, guard_budget_for_range(5.0))
    assert report.passed
    assert report.margin_s == pytest.approx(200e-9 - 2 * 5.0 / C)
    assert report.messages == []


def _bursts_overlap(schedule, budget):
    """Brute force: a chirp's echo window ends budget.total after the chirp; the next must start after it."""
    windows = sorted((c.t_start, c.t_end + budget.total) for c in schedule.chirps)
    return any(nxt[0] <= cur[1] for cur, nxt in zip(windows, windows[1:]))


def test_validator_agrees_with_interval_overlap_on_random_schedules():
    rng = np.random.default_rng(20240601)
    band = Band(f_lo=60e9, f_hi=66e9)
    checked = 0
    while checked < 1000:
        k = int(rng.integers(1, 5))
        fabric = make_fabric(band, num_modules=k, guard_band=float(rng.uniform(0, 200e6)))
        guard_time = float(rng.uniform(0, 400e-9))
        budget = GuardBudget(
            t_max=float(rng.uniform(0, 200e-9)),
            t_ringing=float(rng.uniform(0, 100e-9)),
            t_multipath=float(rng.uniform(0, 100e-9)),
        )
        # exact ties are float-rounding coin flips for the brute-force side
        if abs(guard_time - budget.total) < 1e-12:
            continue
        sched = make_schedule(
            fabric, band,
            num_states=int(rng.integers(k * 2, 33)),
            evolutions=int(rng.integers(1, 4)),
            guard_time=guard_time,
        )
        report = validate_guard_gaps(sched, budget)
        assert report.passed == (not _bursts_overlap(sched, budget))
        checked += 1
