import math

import numpy as np
import pytest

from app.schemas.fabric import LossComponents, PerturbationState
from app.schemas.scene import NoiseSpec, Target
from app.services.dsp_pipeline import process_cube, range_profile, window_coefficients
from app.services.echo_synthesis import (
    amplitude_for_snr,
    max_unambiguous_range,
    radar_snr,
    synthesize_beat,
    system_scale,
    truth_gain_db,
)
from app.services.fabric_model import loss_at, nominal_map
from app.utils.errors import SynthesisError
from tests.conftest import make_fabric, make_schedule

NOISELESS = NoiseSpec(reference_snr_db=30.0, noiseless=True)


def _ranges(fabric, schedule, position):
    x = np.stack([nominal_map(fabric, float(f)) for f in schedule.state_centers])
    return np.linalg.norm(np.asarray(position) - x, axis=-1)


# =========================
# Amplitude law
# =========================

def test_radar_snr_falls_40_db_per_decade():
    noise = NoiseSpec(reference_snr_db=20.0, reference_range_m=3.0)
    assert radar_snr(3.0, noise) == pytest.approx(20.0)
    assert radar_snr(6.0, noise) == pytest.approx(20.0 - 40 * math.log10(2))
    assert radar_snr(3.0, noise, extra_loss_db=8.0) == pytest.approx(12.0)
    with pytest.raises(SynthesisError):
        radar_snr(0.0, noise)


def test_amplitude_gives_requested_post_fft_snr():
    w = window_coefficients("hann", 80)
    a = amplitude_for_snr(15.0, w)
    # on-bin peak a^2 (sum w)^2 / N over unit noise sum(w^2) / N
    assert 10 * math.log10(a ** 2 * w.sum() ** 2 / np.sum(w ** 2)) == pytest.approx(15.0)


def test_doubling_range_quarters_echo_amplitude(fabric, schedule):
    near, far = (0.0, 3.0, 0.0), (0.0, 6.0, 0.0)
    cube_near = synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=near)], NOISELESS)
    cube_far = synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=far)], NOISELESS)
    ratio = np.abs(cube_near.samples[:, 0, 0]) / np.abs(cube_far.samples[:, 0, 0])
    expected = (_ranges(fabric, schedule, far) / _ranges(fabric, schedule, near)) ** 2
    assert ratio == pytest.approx(expected, rel=1e-9)
    assert 20 * math.log10(ratio[0]) == pytest.approx(40 * math.log10(2), abs=0.01)


def test_truth_perturbation_tilts_gain_and_rotates_phase(fabric, schedule):
    scene = [Target(position=(0.0, 0.5, 0.0))]
    plain = synthesize_beat(schedule, fabric, PerturbationState(), scene, NOISELESS)
    truth = PerturbationState(delay_offset_s=0.2e-9, gain_tilt_db=1.0)
    tilted = synthesize_beat(schedule, fabric, truth, scene, NOISELESS)

    f = schedule.state_centers
    ratio = tilted.samples[:, 0, 0] / plain.samples[:, 0, 0]
    gain = np.array([truth_gain_db(fabric, truth, float(x)) for x in f])
    assert np.abs(ratio) == pytest.approx(10 ** (gain / 20), rel=1e-9)
    assert ratio / np.abs(ratio) == pytest.approx(np.exp(-2j * np.pi * f * 0.2e-9), abs=1e-9)
    assert gain[0] == pytest.approx((f[0] - 60e9) / 6e9)


def test_system_scale_maps_profile_onto_model_units(band):
    fabric = make_fabric(band, num_modules=1, guard_band=0.0, anchors=[(0.0, 0.0, 0.0)])
    schedule = make_schedule(fabric, band, num_states=4, evolutions=1)
    # put the target on a padded bin for state 0
    bin_width = range_profile(
        synthesize_beat(schedule, fabric, PerturbationState(), [], NOISELESS), 0
    ).bin_width_m
    x0 = nominal_map(fabric, float(schedule.state_centers[0]))
    target = x0 + np.array([0.0, 6 * bin_width, 0.0])
    cube = synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=tuple(target))], NOISELESS)

    profile = range_profile(cube, 0)
    scale = system_scale(NOISELESS, fabric, float(schedule.state_centers[0]), "hann", schedule.n_fast)
    R = 6 * bin_width
    assert abs(profile.bins[6]) / scale == pytest.approx(1.0 / R ** 2, rel=1e-6)


# =========================
# Noise and determinism
# =========================

def test_same_seed_gives_identical_cube(fabric, schedule):
    noise = NoiseSpec(seed=123)
    scene = [Target(position=(0.05, 0.5, 0.0))]
    a = synthesize_beat(schedule, fabric, PerturbationState(), scene, noise)
    b = synthesize_beat(schedule, fabric, PerturbationState(), scene, noise)
    c = synthesize_beat(schedule, fabric, PerturbationState(), scene, noise.model_copy(update={"seed": 124}))
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.seed == 123 and not a.noiseless


def test_noise_stream_depends_only_on_seed_and_chirp(fabric, band):
    noise = NoiseSpec(seed=5)
    short = synthesize_beat(make_schedule(fabric, band, evolutions=1), fabric, PerturbationState(), [], noise)
    long = synthesize_beat(make_schedule(fabric, band, evolutions=3), fabric, PerturbationState(), [], noise)
    assert np.array_equal(short.samples[:, 0], long.samples[:, 0])
    assert np.var(long.samples) == pytest.approx(1.0, rel=0.05)


def test_targets_beyond_max_range_are_rejected(fabric, schedule):
    with pytest.raises(SynthesisError, match="exceeds R_max"):
        synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=(0.0, 4.0, 0.0))], NOISELESS,
                        max_range=3.0)
    assert max_unambiguous_range(schedule) == pytest.approx(2e6 * 299792458.0 / (2 * 2e12))


def test_target_on_a_virtual_sample_is_rejected(fabric, schedule):
    x = nominal_map(fabric, float(schedule.state_centers[0]))
    with pytest.raises(SynthesisError, match="coincides"):
        synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=tuple(x))], NOISELESS)


# =========================
# Radar law against the DSP path
# =========================

def test_measured_snr_follows_radar_law(band):
    fabric = make_fabric(band, num_modules=1, guard_band=0.0, losses=LossComponents(), anchors=[(0.0, 0.0, 0.0)])
    schedule = make_schedule(fabric, band, num_states=4, evolutions=25, max_range=8.0)
    noise = NoiseSpec(reference_snr_db=20.0, reference_range_m=3.0, seed=2024)

    for R in (1.5, 3.0, 6.0):
        cube = synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=(0.0, R, 0.0))], noise)
        peaks, floors = [], []
        for q in range(schedule.evolutions):
            for p in process_cube(cube, q=q):
                peaks.append(p.peak_power)
                floors.append(p.noise_floor)
        # the peak bin holds signal plus one noise floor
        measured = 10 * math.log10(np.mean(peaks) / np.mean(floors) - 1.0)
        analytic = np.mean([
            radar_snr(r, noise, loss_at(fabric, float(f)))
            for r, f in zip(_ranges(fabric, schedule, (0.0, R, 0.0)), schedule.state_centers)
        ])
        assert measured == pytest.approx(analytic, abs=1.0)


@pytest.mark.slow
def test_doubling_range_costs_twelve_db_over_seeded_trials(band):
    fabric = make_fabric(band, num_modules=1, guard_band=0.0, losses=LossComponents(), anchors=[(0.0, 0.0, 0.0)])
    schedule = make_schedule(fabric, band, num_states=4, evolutions=4, max_range=8.0)

    def measured_snr(R):
        peaks, floors = [], []
        for seed in range(100):
            noise = NoiseSpec(reference_snr_db=20.0, reference_range_m=3.0, seed=seed)
            cube = synthesize_beat(schedule, fabric, PerturbationState(), [Target(position=(0.0, R, 0.0))], noise)
            for q in range(schedule.evolutions):
                for p in process_cube(cube, q=q):
                    peaks.append(p.peak_power)
                    floors.append(p.noise_floor)
        return 10 * math.log10(np.mean(peaks) / np.mean(floors) - 1.0)

    assert measured_snr(6.0) - measured_snr(3.0) == pytest.approx(-12.0, abs=0.3)
