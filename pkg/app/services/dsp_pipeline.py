import logging
import math
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.constants import speed_of_light as C
from scipy.signal import get_window

from app.schemas.dsp import DopplerProfile, RangeProfile, UsableSet
from app.schemas.scene import RawDataCube
from app.utils.errors import DspError
from app.utils.normalizer import power_to_db

logger = logging.getLogger(__name__)

_WINDOW_ALIASES = {"rect": "boxcar", "rectangular": "boxcar", "none": "boxcar"}


def window_coefficients(name: str, n: int) -> np.ndarray:
    """Symmetric taper of length n (scipy window name, or rect/none)."""
    key = _WINDOW_ALIASES.get(name.lower(), name.lower())
    try:
        return np.asarray(get_window(key, n, fftbins=False), dtype=np.float64)
    except ValueError as exc:
        raise DspError(f"unknown window '{name}': {exc}") from exc


def profile_from_samples(
    samples: np.ndarray,
    state: int,
    f_center: float,
    slope: float,
    sample_rate: float,
    window: str = "hann",
    zero_pad: int = 4,
    noiseless: bool = False,
) -> RangeProfile:
    """
    Windowed, zero-padded FFT of one chirp's fast-time samples.

    bins are scaled by 1/sqrt(N) so that sum(|bins|^2) / zero_pad equals the
    windowed time-domain energy.
    """
    x = np.asarray(samples, dtype=np.complex128)
    n = x.shape[-1]
    if n < 2:
        raise DspError(f"state {state}: fast-time length {n} < 2")
    if zero_pad < 1:
        raise DspError(f"zero_pad must be >= 1, got {zero_pad}")

    w = window_coefficients(window, n)
    n_fft = n * zero_pad
    bins = sp_fft.fft(w * x, n=n_fft) / math.sqrt(n)

    beat_axis = np.arange(n_fft, dtype=np.float64) * sample_rate / n_fft
    range_axis = C * beat_axis / (2.0 * slope)

    power = np.abs(bins) ** 2
    noise_floor = float(np.median(power) / math.log(2.0))

    return RangeProfile(
        state=state,
        f_center=f_center,
        slope=slope,
        sample_rate=sample_rate,
        n_fast=n,
        zero_pad=zero_pad,
        window=window,
        bins=bins,
        range_axis=range_axis,
        noise_floor=noise_floor,
        noiseless=noiseless,
    )


def range_profile(cube: RawDataCube, m: int, q: int = 0, window: str = "hann", zero_pad: int = 4) -> RangeProfile:
    """Y_m(r) of state m in evolution q."""
    schedule = cube.schedule
    return profile_from_samples(
        cube.slice(m, q),
        state=m,
        f_center=float(schedule.state_centers[m]),
        slope=schedule.slope,
        sample_rate=schedule.sample_rate,
        window=window,
        zero_pad=zero_pad,
        noiseless=cube.noiseless,
    )


def process_cube(cube: RawDataCube, q: int = 0, window: str = "hann", zero_pad: int = 4) -> List[RangeProfile]:
    """Range profiles of every state for one evolution, in ascending m."""
    if not 0 <= q < cube.schedule.evolutions:
        raise DspError(f"evolution {q} outside 0..{cube.schedule.evolutions - 1}")
    profiles = [range_profile(cube, m, q, window, zero_pad) for m in range(cube.schedule.num_states)]
    logger.info("Computed %d range profiles (evolution %d, %d bins)", len(profiles), q, profiles[0].n_fft)
    return profiles


def estimate_state_snr(profile: RangeProfile) -> float:
    """10 log10(peak power / noise floor) in dB."""
    if profile.noise_floor == 0.0:
        if not profile.noiseless:
            raise DspError(f"state {profile.state}: SNR undefined (zero noise floor)")
        return math.inf if profile.peak_power > 0 else -math.inf
    return float(power_to_db(profile.peak_power / profile.noise_floor))


def integrated_state_snr(cube: RawDataCube, window: str = "hann", zero_pad: int = 4) -> List[float]:
    """
    Per-state SNR in dB with peak and floor powers averaged over every evolution.

    The averaged peak carries one noise floor, which is removed before the ratio.
    """
    schedule = cube.schedule
    peaks = np.zeros(schedule.num_states)
    floors = np.zeros(schedule.num_states)
    for q in range(schedule.evolutions):
        for m in range(schedule.num_states):
            p = range_profile(cube, m, q, window, zero_pad)
            peaks[m] += p.peak_power
            floors[m] += p.noise_floor

    snr_db = []
    for m in range(schedule.num_states):
        if floors[m] == 0.0:
            if not cube.noiseless:
                raise DspError(f"state {m}: SNR undefined (zero noise floor)")
            snr_db.append(math.inf if peaks[m] > 0 else -math.inf)
            continue
        excess = peaks[m] / floors[m] - 1.0
        snr_db.append(float(power_to_db(excess)) if excess > 0 else -math.inf)
    logger.debug("Integrated SNR over %d evolutions", schedule.evolutions)
    return snr_db


def usable_from_snr(snr_db: Sequence[float], threshold_db: float) -> UsableSet:
    """States whose SNR strictly exceeds the threshold."""
    members = tuple(int(m) for m, s in enumerate(snr_db) if s > threshold_db)
    return UsableSet(members=members, threshold_db=threshold_db)


def usable_states(profiles: Sequence[RangeProfile], threshold_db: float) -> UsableSet:
    states = [p.state for p in profiles]
    if states != list(range(len(profiles))):
        raise DspError("usable_states needs one profile per state in ascending order")
    usable = usable_from_snr([estimate_state_snr(p) for p in profiles], threshold_db)
    logger.info("Usable states: %d of %d above %.1f dB", usable.size, len(profiles), threshold_db)
    return usable


def doppler_spectrum(
    cube: RawDataCube,
    m: int,
    window: str = "boxcar",
    range_window: str = "hann",
    zero_pad: int = 4,
) -> DopplerProfile:
    """
    Slow-time FFT across evolutions of state m, per range bin.

    Zero Doppler is centred; velocity is positive for a receding target.
    Even Q uses bins offset by half a bin, so the axis is symmetric about 0
    and two evolutions still tell the sign of v.
    """
    schedule = cube.schedule
    q_count = schedule.evolutions
    if q_count < 2:
        raise DspError(f"state {m}: insufficient slow time ({q_count} evolution)")

    profiles = [range_profile(cube, m, q, range_window, zero_pad) for q in range(q_count)]
    stack = np.stack([p.bins for p in profiles])  # (Q, n_fft)
    w = window_coefficients(window, q_count)[:, None]
    k = np.arange(q_count)
    if q_count % 2 == 0:
        stack = stack * np.exp(-1j * np.pi * k / q_count)[:, None]
        doppler_axis = (k - q_count / 2 + 0.5) / (q_count * schedule.pri)
    else:
        doppler_axis = sp_fft.fftshift(sp_fft.fftfreq(q_count, d=schedule.pri))
    spectrum = sp_fft.fftshift(sp_fft.fft(w * stack, axis=0), axes=0) / math.sqrt(q_count)

    f_c = float(schedule.state_centers[m])
    # echo phase -4 pi f R(q) / c falls as the target recedes
    velocity_axis = -doppler_axis * C / (2.0 * f_c)

    return DopplerProfile(
        state=m,
        f_center=f_c,
        bins=spectrum,
        doppler_axis_hz=doppler_axis,
        velocity_axis=velocity_axis,
        range_axis=profiles[0].range_axis,
    )


def range_doppler_map(cube: RawDataCube, m: int, window: str = "boxcar", zero_pad: int = 4) -> np.ndarray:
    """|range-Doppler| of state m in dB, shape (n_doppler, n_range)."""
    profile = doppler_spectrum(cube, m, window=window, zero_pad=zero_pad)
    return power_to_db(np.abs(profile.bins) ** 2)


# =========================
# Export rows
# =========================

def profile_rows(profile: RangeProfile) -> List[Dict[str, Any]]:
    mag_db = power_to_db(np.abs(profile.bins) ** 2)
    return [
        {
            "range_m": float(r),
            "real": float(b.real),
            "imag": float(b.imag),
            "magnitude_db": float(d),
        }
        for r, b, d in zip(profile.range_axis, profile.bins, mag_db)
    ]


def range_doppler_rows(cube: RawDataCube, m: int, window: str = "boxcar", zero_pad: int = 4) -> List[Dict[str, Any]]:
    profile = doppler_spectrum(cube, m, window=window, zero_pad=zero_pad)
    mag_db = power_to_db(np.abs(profile.bins) ** 2)
    return [
        {"velocity_m_s": float(v), "range_m": float(r), "magnitude_db": float(mag_db[i, j])}
        for i, v in enumerate(profile.velocity_axis)
        for j, r in enumerate(profile.range_axis)
    ]


def snr_table(profiles: Iterable[RangeProfile], integrated_db: Optional[Sequence[float]] = None) -> List[Dict[str, Any]]:
    rows = []
    for i, p in enumerate(profiles):
        row = {
            "state_index": p.state,
            "f_center_hz": p.f_center,
            "snr_db": estimate_state_snr(p),
            "noise_floor": p.noise_floor,
            "peak_range_m": float(p.range_axis[p.peak_index]),
        }
        if integrated_db is not None:
            row["integrated_snr_db"] = float(integrated_db[i])
        rows.append(row)
    return rows
