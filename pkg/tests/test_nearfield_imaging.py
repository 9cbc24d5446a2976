import numpy as np
import pytest
from scipy.constants import speed_of_light as C

from app.schemas.dsp import UsableSet
from app.schemas.fabric import PerturbationState
from app.schemas.imaging import FocusedImage, ImagingGrid
from app.schemas.scene import NoiseSpec, Target
from app.schemas.waveform import Band
from app.services.dsp_pipeline import process_cube
from app.services.echo_synthesis import synthesize_beat
from app.services.fabric_model import nominal_map
from app.services.nearfield_imaging import (
    focus,
    focusing_kernel,
    heatmap_levels,
    image_metrics,
    image_rows,
    localization_error,
    value_at,
)
from app.utils.errors import ImagingError
from tests.conftest import make_fabric, make_schedule

TARGET = (0.05, 0.5, 0.0)
# states the shipped M=64 ripple fixture pushes below threshold
FIXTURE_DROPOUTS = set(range(9, 17)) | set(range(33, 42)) | {61, 62, 63}


def _noiseless_profiles(fabric, schedule, *targets):
    noise = NoiseSpec(reference_snr_db=30.0, noiseless=True)
    scene = [Target(position=t) for t in (targets or (TARGET,))]
    cube = synthesize_beat(schedule, fabric, PerturbationState(), scene, noise)
    profiles = process_cube(cube)
    positions = np.stack([nominal_map(fabric, float(f)) for f in schedule.state_centers])
    return profiles, positions


def _usable(members):
    return UsableSet(members=tuple(sorted(members)), threshold_db=10.0)


@pytest.fixture(scope="module")
def single_module_scene():
    band = Band(f_lo=60e9, f_hi=66e9)
    fabric = make_fabric(band, num_modules=1, guard_band=0.0, anchors=[(0.0, 0.0, 0.0)])
    schedule = make_schedule(fabric, band, evolutions=1)
    return _noiseless_profiles(fabric, schedule)


@pytest.fixture
def wide_grid():
    return ImagingGrid(origin=TARGET, extent_u=0.6, extent_v=0.6, spacing=0.005)


# =========================
# Focusing
# =========================

def test_noiseless_target_focuses_on_its_grid_point(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    grid = ImagingGrid(origin=TARGET, extent_u=0.2, extent_v=0.2, spacing=0.005)
    img = focus(profiles, positions, grid, _usable(range(64)))

    assert localization_error(img, TARGET) <= grid.half_diagonal

    # coherent sum of every state's response at the true range
    ranges = np.linalg.norm(np.asarray(TARGET) - positions, axis=-1)
    incoherent = sum(abs(complex(p.sample(r))) for p, r in zip(profiles, ranges))
    peak = abs(value_at(img, TARGET))
    assert peak <= incoherent * (1 + 1e-9)
    assert peak >= 0.95 * incoherent
    assert image_metrics(img).peak_magnitude == pytest.approx(peak)


def test_chunking_does_not_change_the_image(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    grid = ImagingGrid(origin=TARGET, extent_u=0.05, extent_v=0.05, spacing=0.005)
    usable = _usable(range(0, 64, 3))
    whole = focus(profiles, positions, grid, usable)
    pieces = focus(profiles, positions, grid, usable, max_points=7)
    np.testing.assert_allclose(pieces.values, whole.values, rtol=1e-12, atol=0)


def test_only_usable_states_contribute(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    grid = ImagingGrid(origin=TARGET, extent_u=0.02, extent_v=0.02, spacing=0.005)
    lower = focus(profiles, positions, grid, _usable(range(32)))
    upper = focus(profiles, positions, grid, _usable(range(32, 64)))
    both = focus(profiles, positions, grid, _usable(range(64)))
    np.testing.assert_allclose(lower.values + upper.values, both.values, rtol=1e-9)


def test_two_target_image_is_the_sum_of_single_target_images(fabric, schedule):
    other = (-0.08, 0.62, 0.0)
    grid = ImagingGrid(origin=TARGET, extent_u=0.3, extent_v=0.3, spacing=0.01)
    usable = _usable(range(64))

    def image(*targets):
        profiles, positions = _noiseless_profiles(fabric, schedule, *targets)
        return focus(profiles, positions, grid, usable).values

    pair = image(TARGET, other)
    summed = image(TARGET) + image(other)
    assert np.max(np.abs(pair - summed)) <= 1e-6 * np.max(np.abs(summed))


def test_coherent_gain_never_drops_as_states_are_added(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    grid = ImagingGrid(origin=TARGET, extent_u=0.01, extent_v=0.01, spacing=0.005)
    gains = [abs(value_at(focus(profiles, positions, grid, _usable(range(k))), TARGET)) for k in range(1, 65)]
    assert all(b >= a for a, b in zip(gains, gains[1:]))


@pytest.mark.parametrize("cycles", [1, 7, 400])
def test_kernel_is_unity_on_whole_wavelength_round_trips(cycles):
    f = 200 * C  # half wavelength of exactly 2.5 mm
    d = cycles * C / (2 * f)
    assert focusing_kernel(f, d) == pytest.approx(1 + 0j, abs=1e-12)


def test_empty_usable_set_is_rejected(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    with pytest.raises(ImagingError, match="no usable"):
        focus(profiles, positions, ImagingGrid(), _usable([]))


def test_usable_state_without_profile_is_rejected(fabric, schedule):
    profiles, positions = _noiseless_profiles(fabric, schedule)
    with pytest.raises(ImagingError, match=r"\[5\]"):
        focus(profiles[:5], positions, ImagingGrid(extent_u=0.01, extent_v=0.01), _usable(range(6)))


# =========================
# Aperture degradation
# =========================

def test_main_lobe_narrows_as_contiguous_aperture_grows(single_module_scene, wide_grid):
    profiles, positions = single_module_scene
    widths = [
        image_metrics(focus(profiles, positions, wide_grid, _usable(range(k)))).width_3db
        for k in (8, 16, 44, 64)
    ]
    assert all(a >= b for a, b in zip(widths, widths[1:]))
    assert widths[0] > widths[-1]


def test_fixture_dropouts_raise_sidelobes_and_widen_main_lobe(single_module_scene, wide_grid):
    profiles, positions = single_module_scene
    full = image_metrics(focus(profiles, positions, wide_grid, _usable(range(64))))
    thinned_set = _usable(set(range(64)) - FIXTURE_DROPOUTS)
    assert thinned_set.size == 44
    thinned = image_metrics(focus(profiles, positions, wide_grid, thinned_set))

    assert full.pslr_db is not None and thinned.pslr_db is not None
    assert thinned.pslr_db <= full.pslr_db
    assert thinned.width_3db >= full.width_3db


# =========================
# Metrics and export
# =========================

def _synthetic_image(values):
    grid = ImagingGrid(origin=(0.0, 0.5, 0.0), extent_u=0.02, extent_v=0.02, spacing=0.005)
    return FocusedImage(values=np.asarray(values, dtype=np.complex128), grid=grid, usable=_usable([0]))


def test_metrics_on_hand_built_image():
    values = np.zeros((5, 5))
    values[2, 2] = 10.0
    values[2, 1] = 8.0   # inside -3 dB: main lobe
    values[0, 4] = 1.0   # isolated sidelobe
    m = image_metrics(_synthetic_image(values))
    assert m.peak_index == (2, 2)
    assert m.peak_position == pytest.approx((0.0, 0.5, 0.0))
    assert m.pslr_db == pytest.approx(20.0)
    assert m.width_3db == pytest.approx(0.005)


def test_single_lobe_has_no_pslr():
    values = np.zeros((5, 5))
    values[1, 3] = 1.0
    m = image_metrics(_synthetic_image(values))
    assert m.pslr_db is None
    assert m.width_3db == 0.0


def test_zero_image_has_no_metrics():
    with pytest.raises(ImagingError, match="identically zero"):
        image_metrics(_synthetic_image(np.zeros((5, 5))))


def test_heatmap_and_rows():
    values = np.full((5, 5), 1e-3)
    values[2, 2] = 1.0
    img = _synthetic_image(values)
    levels = heatmap_levels(img)
    assert levels.dtype == np.uint8
    assert levels[2, 2] == 255
    assert levels[0, 0] == 0  # -60 dB clips at the -40 dB floor
    rows = image_rows(img)
    assert len(rows) == 25
    assert set(rows[0]) == {"x_m", "y_m", "z_m", "real", "imag", "magnitude_db"}
