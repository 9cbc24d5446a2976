import numpy as np
import pytest

from app.schemas.fabric import ClipOnModule, FabricConfig, LossComponents
from app.schemas.scene import NoiseSpec, ReferenceScatterer
from app.schemas.waveform import Band
from app.services.waveform_scheduler import assign_subbands, build_schedule

FIXED_LOSSES = LossComponents(coupling_db=4.0, guided_wave_db=1.0, insertion_db=2.0)


@pytest.fixture
def band():
    return Band(f_lo=60e9, f_hi=66e9)


def make_fabric(band, num_modules=2, guard_band=100e6, losses=FIXED_LOSSES, anchors=None):
    subbands = assign_subbands(band, num_modules, guard_band)
    if anchors is None:
        anchors = [(-0.03, 0.0, 0.0), (0.03, 0.0, 0.0)] if num_modules == 2 else [(0.0, 0.0, 0.0)] * num_modules
    modules = [
        ClipOnModule(
            id=s.module_id,
            anchor=anchors[s.module_id],
            axis=(1.0, 0.0, 0.0),
            aperture_length=0.04,
            passband=s,
            losses=losses,
        )
        for s in subbands
    ]
    return FabricConfig(modules=modules)


def make_schedule(fabric, band, num_states=64, evolutions=2, chirp_bandwidth=80e6, guard_time=200e-9, max_range=5.0):
    subbands = [m.passband for m in fabric.modules]
    return build_schedule(
        band=band,
        subbands=subbands,
        num_states=num_states,
        chirp_bandwidth=chirp_bandwidth,
        chirp_duration=40e-6,
        guard_time=guard_time,
        evolutions=evolutions,
        sample_rate=2e6,
        max_range=max_range,
    )


@pytest.fixture
def fabric(band):
    return make_fabric(band)


@pytest.fixture
def schedule(fabric, band):
    return make_schedule(fabric, band)


@pytest.fixture
def references():
    s, c = 0.5, np.sqrt(3.0) / 2.0
    return [
        ReferenceScatterer(id=1, position=(0.0, 0.10, 0.0)),
        ReferenceScatterer(id=2, position=(0.0, 0.15 * s, 0.15 * c)),
        ReferenceScatterer(id=3, position=(0.0, -0.20 * s, 0.20 * c)),
    ]


@pytest.fixture
def noiseless():
    return NoiseSpec(reference_snr_db=20.0, reference_range_m=3.0, noiseless=True)
