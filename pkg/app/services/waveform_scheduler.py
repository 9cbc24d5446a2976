import logging
import math
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.constants import speed_of_light as C

from app.schemas.waveform import Band, ChirpSchedule, ChirpSpec, GuardBudget, Subband, ValidationReport
from app.utils.errors import ScheduleError

logger = logging.getLogger(__name__)

# Slack on the realized-vs-declared guard comparison (accumulated start-time rounding)
_REALIZED_GAP_RTOL = 1e-9
# Rounding slack when checking a chirp span against its subband edges
_SPAN_TOL_HZ = 1e-3


def assign_subbands(band: Band, num_modules: int, guard_band: float) -> List[Subband]:
    """
    Equal-width split of the band into K module subbands separated by guard_band.
    Subbands plus gaps tile the band exactly; module ids follow ascending frequency.
    """
    if num_modules < 1:
        raise ScheduleError(f"need at least one module, got K={num_modules}")
    if guard_band < 0:
        raise ScheduleError(f"guard band must be non-negative, got {guard_band} Hz")

    required = (num_modules - 1) * guard_band
    if not required < band.width:
        raise ScheduleError(
            f"infeasible subband split: {num_modules - 1} guard bands need {required / 1e9:.4f} GHz "
            f"but only {band.width / 1e9:.4f} GHz is available"
        )

    width = (band.width - required) / num_modules
    subbands = []
    for k in range(num_modules):
        f_lo = band.f_lo + k * (width + guard_band)
        f_hi = band.f_hi if k == num_modules - 1 else f_lo + width
        subbands.append(Subband(module_id=k, f_lo=f_lo, f_hi=f_hi))

    logger.debug("Assigned %d subbands of %.4f GHz", num_modules, width / 1e9)
    return subbands


def allocate_states(subbands: List[Subband], num_states: int) -> List[int]:
    """States per subband proportional to width; the remainder goes to the lowest index."""
    ordered = sorted(subbands, key=lambda s: s.f_lo)
    total = sum(s.width for s in ordered)
    counts = [int(math.floor(num_states * s.width / total + 1e-9)) for s in ordered]
    remainder = num_states - sum(counts)
    for i in range(remainder):
        counts[i % len(counts)] += 1
    return counts


def build_schedule(
    band: Band,
    subbands: List[Subband],
    num_states: int,
    chirp_bandwidth: float,
    chirp_duration: float,
    guard_time: float,
    evolutions: int,
    sample_rate: float = 2e6,
    max_range: Optional[float] = None,
) -> ChirpSchedule:
    """
    Frequency-indexed chirp schedule: M states spread over the subbands, each
    evolution pass visiting the states in ascending f_c, consecutive chirps
    separated by exactly T_g.
    """
    if num_states < 1 or evolutions < 1:
        raise ScheduleError("num_states and evolutions must be >= 1")
    if chirp_bandwidth <= 0 or chirp_duration <= 0 or guard_time < 0:
        raise ScheduleError("chirp bandwidth/duration must be positive and T_g non-negative")
    for s in subbands:
        if s.f_lo < band.f_lo or s.f_hi > band.f_hi:
            raise ScheduleError(f"subband of module {s.module_id} leaves the band")

    ordered = sorted(subbands, key=lambda s: s.f_lo)
    for below, above in zip(ordered, ordered[1:]):
        if above.f_lo < below.f_hi:
            raise ScheduleError(
                f"subbands of modules {below.module_id} and {above.module_id} overlap "
                f"({above.f_lo / 1e9:.4f} GHz < {below.f_hi / 1e9:.4f} GHz)"
            )

    slope = chirp_bandwidth / chirp_duration
    if max_range is not None:
        f_beat_max = 2.0 * slope * max_range / C
        # complex (I/Q) fast-time sampling: the beat tone must stay below fs
        if not sample_rate > f_beat_max:
            raise ScheduleError(
                f"sample rate {sample_rate:.4g} Hz cannot represent beat frequency "
                f"{f_beat_max:.4g} Hz at R_max = {max_range} m"
            )

    counts = allocate_states(ordered, num_states)

    centers: List[float] = []
    owners: List[int] = []
    for sub, n in zip(ordered, counts):
        if n == 0:
            logger.warning("Subband of module %d received no frequency states", sub.module_id)
            continue
        lo = sub.f_lo + chirp_bandwidth / 2.0
        hi = sub.f_hi - chirp_bandwidth / 2.0
        if hi < lo:
            raise ScheduleError(
                f"state {len(centers)}: chirp span {chirp_bandwidth / 1e6:.3f} MHz exceeds the "
                f"{sub.width / 1e6:.3f} MHz subband of module {sub.module_id}"
            )
        sub_centers = [sub.center] if n == 1 else np.linspace(lo, hi, n).tolist()
        centers.extend(sub_centers)
        owners.extend([sub.module_id] * n)

    if np.any(np.diff(centers) <= 0):
        raise ScheduleError("state centre frequencies must be strictly increasing")

    half = chirp_bandwidth / 2.0
    for m, f_c in enumerate(centers):
        holders = [s.module_id for s in ordered if s.contains_span(f_c - half, f_c + half, tol=_SPAN_TOL_HZ)]
        if len(holders) != 1:
            raise ScheduleError(
                f"state {m}: chirp span {(f_c - half) / 1e9:.4f}..{(f_c + half) / 1e9:.4f} GHz "
                f"lies in {len(holders)} subbands {holders}, expected exactly one"
            )

    period = chirp_duration + guard_time
    chirps = []
    for q in range(evolutions):
        for m, (f_c, owner) in enumerate(zip(centers, owners)):
            chirps.append(
                ChirpSpec(
                    state_index=m,
                    evolution=q,
                    module_id=owner,
                    f_center=float(f_c),
                    bandwidth=chirp_bandwidth,
                    duration=chirp_duration,
                    sample_rate=sample_rate,
                    t_start=(q * num_states + m) * period,
                )
            )

    logger.info(
        "Built schedule: %d states x %d evolutions, f_c %.4f..%.4f GHz",
        num_states, evolutions, centers[0] / 1e9, centers[-1] / 1e9,
    )
    return ChirpSchedule(
        band=band,
        subbands=ordered,
        chirps=chirps,
        guard_time=guard_time,
        num_states=num_states,
        evolutions=evolutions,
    )


def guard_budget_for_range(max_range: float, ringing: float = 0.0, multipath: float = 0.0) -> GuardBudget:
    return GuardBudget(t_max=2.0 * max_range / C, t_ringing=ringing, t_multipath=multipath)


def validate_guard_gaps(schedule: ChirpSchedule, budget: GuardBudget) -> ValidationReport:
    """Pass iff T_g > T_max + T_ringing + T_multipath and the schedule realizes T_g."""
    messages: List[str] = []
    total = budget.total
    margin = schedule.guard_time - total

    chirps = schedule.chirps
    if len(chirps) > 1:
        gaps = np.array([b.t_start - a.t_end for a, b in zip(chirps, chirps[1:])])
        realized = float(gaps.min())
    else:
        realized = schedule.guard_time

    realized_ok = realized >= schedule.guard_time * (1.0 - _REALIZED_GAP_RTOL) - 1e-15
    if not realized_ok:
        messages.append(f"realized gap {realized:.6e} s is shorter than declared T_g {schedule.guard_time:.6e} s")

    strict_ok = schedule.guard_time > total
    if not strict_ok:
        messages.append(
            f"T_g = {schedule.guard_time * 1e9:.3f} ns does not exceed budget "
            f"{total * 1e9:.3f} ns (margin {margin * 1e9:.3f} ns)"
        )

    passed = bool(strict_ok and realized_ok)
    if passed:
        logger.info("Guard validation passed with margin %.3f ns", margin * 1e9)
    else:
        logger.warning("Guard validation failed: %s", "; ".join(messages))

    return ValidationReport(
        passed=passed,
        guard_time_s=schedule.guard_time,
        budget_sum_s=total,
        margin_s=margin,
        realized_min_gap_s=realized,
        messages=messages,
    )


def schedule_rows(schedule: ChirpSchedule) -> List[Dict[str, Any]]:
    """One row per chirp for CSV export."""
    return [
        {
            "state_index": c.state_index,
            "evolution": c.evolution,
            "f_center_hz": c.f_center,
            "bandwidth_hz": c.bandwidth,
            "t_start_s": c.t_start,
            "t_chirp_s": c.duration,
        }
        for c in schedule.chirps
    ]
