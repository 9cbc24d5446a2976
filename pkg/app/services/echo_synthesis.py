import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.constants import speed_of_light as C

from app.schemas.fabric import FabricConfig, PerturbationState
from app.schemas.scene import NoiseSpec, RawDataCube, Target
from app.schemas.waveform import ChirpSchedule
from app.services.dsp_pipeline import window_coefficients
from app.services.fabric_model import fabric_hash, fabric_span, loss_at, perturbed_map
from app.utils.errors import SynthesisError
from app.utils.normalizer import db_to_amplitude, db_to_power, normalized_frequency

logger = logging.getLogger(__name__)

# RCS the reference SNR is quoted for (m^2)
SIGMA_REF = 1.0


def radar_snr(R: float, noise: NoiseSpec, extra_loss_db: float = 0.0) -> float:
    """Monostatic R^-4 law relative to the reference SNR at the reference range."""
    if R <= 0:
        raise SynthesisError(f"range must be positive, got {R} m")
    return noise.reference_snr_db + 40.0 * math.log10(noise.reference_range_m / R) - extra_loss_db


def amplitude_for_snr(snr_db: float, window: np.ndarray) -> float:
    """
    Tone amplitude whose on-bin post-FFT peak power over the unit-variance
    noise power equals snr_db under the given window.
    """
    return math.sqrt(float(db_to_power(snr_db)) * float(np.sum(window ** 2))) / float(np.sum(window))


def truth_gain_db(fabric: FabricConfig, perturbation: PerturbationState, f: float) -> float:
    """Gain tilt of the true system, 0 dB at the lowest fabric edge."""
    span = fabric_span(fabric)
    return perturbation.gain_tilt_db * float(normalized_frequency(f, span.f_lo, span.f_hi))


def system_scale(noise: NoiseSpec, fabric: FabricConfig, f: float, window: str, n_fast: int) -> float:
    """
    Factor mapping the calibration model sqrt(sigma)/R^2 onto range-profile
    units at state frequency f, using the nominal loss of the active module.
    """
    w = window_coefficients(window, n_fast)
    ref = float(db_to_amplitude(noise.reference_snr_db)) * noise.reference_range_m ** 2
    return ref * math.sqrt(float(np.sum(w ** 2))) / math.sqrt(n_fast) * float(db_to_amplitude(-loss_at(fabric, f)))


def max_unambiguous_range(schedule: ChirpSchedule) -> float:
    """Range whose beat tone reaches the complex sample rate."""
    return schedule.sample_rate * C / (2.0 * schedule.slope)


def _chirp_rng(seed: int, m: int, q: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, m, q]))


def synthesize_beat(
    schedule: ChirpSchedule,
    fabric: FabricConfig,
    truth: PerturbationState,
    scene: Sequence[Target],
    noise: NoiseSpec,
    window: str = "hann",
    max_range: Optional[float] = None,
) -> RawDataCube:
    """
    Dechirped beat samples for every (state, evolution) of the schedule.

    Each chirp draws its noise from a stream keyed by (seed, m, q), so the cube
    does not depend on the order chirps are generated in.
    """
    n = schedule.n_fast
    r_limit = max_range if max_range is not None else max_unambiguous_range(schedule)
    w = window_coefficients(window, n)
    fast_time = np.arange(n, dtype=np.float64) / schedule.sample_rate
    slope = schedule.slope
    pri = schedule.pri

    centers = schedule.state_centers
    positions = np.stack([perturbed_map(fabric, truth, float(f)) for f in centers])

    # static geometry per (state, target)
    n_targets = len(scene)
    pts = np.array([t.position for t in scene], dtype=np.float64).reshape(n_targets, 3)
    deltas = pts[None, :, :] - positions[:, None, :]
    ranges0 = np.linalg.norm(deltas, axis=-1)  # (M, T)

    if n_targets:
        worst = float(ranges0.max())
        if worst > r_limit:
            m_bad, t_bad = np.unravel_index(int(np.argmax(ranges0)), ranges0.shape)
            raise SynthesisError(
                f"target {t_bad} at {worst:.3f} m from state {m_bad} exceeds R_max = {r_limit:.3f} m"
            )
        if float(ranges0.min()) <= 0.0:
            raise SynthesisError("target coincides with a virtual sample position")

    amplitudes = np.zeros((schedule.num_states, n_targets))
    for m, f in enumerate(centers):
        extra = loss_at(fabric, float(f))
        gain = truth_gain_db(fabric, truth, float(f))
        for t, target in enumerate(scene):
            snr = radar_snr(float(ranges0[m, t]), noise, extra) + 10.0 * math.log10(target.rcs / SIGMA_REF) + gain
            amplitudes[m, t] = amplitude_for_snr(snr, w)

    velocities = np.array([t.radial_velocity for t in scene], dtype=np.float64)
    samples = np.zeros((schedule.num_states, schedule.evolutions, n), dtype=np.complex128)

    for m, f in enumerate(centers):
        f = float(f)
        delay_phase = np.exp(-2j * np.pi * f * truth.delay_offset_s)
        for q in range(schedule.evolutions):
            chirp = np.zeros(n, dtype=np.complex128)
            # stop-and-hop: range is frozen within a chirp
            ranges = ranges0[m] + velocities * q * pri
            for t in range(n_targets):
                R = float(ranges[t])
                f_b = 2.0 * slope * R / C
                chirp += (
                    amplitudes[m, t]
                    * np.exp(2j * np.pi * f_b * fast_time)
                    * np.exp(-4j * np.pi * f * R / C)
                    * delay_phase
                )
            if not noise.noiseless:
                rng = _chirp_rng(noise.seed, m, q)
                chirp += (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)
            samples[m, q] = chirp

    logger.info(
        "Synthesized cube %s for %d targets (seed %d%s)",
        samples.shape, n_targets, noise.seed, ", noiseless" if noise.noiseless else "",
    )
    return RawDataCube(
        samples=samples,
        schedule=schedule,
        fabric_hash=fabric_hash(fabric),
        seed=noise.seed,
        noiseless=noise.noiseless,
    )
