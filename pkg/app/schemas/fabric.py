from typing import Dict, List, Literal, Tuple

import numpy as np
from pydantic import Field, field_validator, model_validator

from app.schemas.base import StrictModel, Vec3
from app.schemas.waveform import Subband
from app.utils.normalizer import is_unit


class RippleProfile(StrictModel):
    """
    Frequency-dependent mismatch ripple of one module.

    - none:        flat 0 dB
    - sinusoidal:  two sinusoids in f, phases drawn from `seed`, rescaled so the
                   largest |ripple| over the passband equals the module's peak
    - tabulated:   explicit (f, dB) knots, linear interpolation, clamped
    """

    kind: Literal["none", "sinusoidal", "tabulated"] = "none"
    amplitudes: Tuple[float, float] = (1.0, 0.5)
    periods_hz: Tuple[float, float] = (1.5e9, 0.55e9)
    seed: int = 0
    knots_hz: List[float] = []
    knots_db: List[float] = []
    fixture: str | None = Field(
        default=None,
        description="Name of a shipped tabulated profile (e.g. 'ripple_m64'); resolved at load time",
    )

    @model_validator(mode="after")
    def _knots(self) -> "RippleProfile":
        if self.kind == "tabulated" and self.fixture is None:
            if len(self.knots_hz) < 2 or len(self.knots_hz) != len(self.knots_db):
                raise ValueError("tabulated ripple needs >= 2 knots with matching dB values")
            if np.any(np.diff(self.knots_hz) <= 0):
                raise ValueError("ripple knots must be strictly increasing in frequency")
        if any(p <= 0 for p in self.periods_hz):
            raise ValueError("ripple periods must be positive")
        return self


class LossComponents(StrictModel):
    coupling_db: float = Field(0.0, ge=0)
    guided_wave_db: float = Field(0.0, ge=0)
    insertion_db: float = Field(0.0, ge=0)
    ripple_db_peak: float = Field(0.0, ge=0)
    ripple: RippleProfile = RippleProfile()

    @property
    def fixed_db(self) -> float:
        return self.coupling_db + self.guided_wave_db + self.insertion_db

    @model_validator(mode="after")
    def _tabulated_within_peak(self) -> "LossComponents":
        if self.ripple.kind == "tabulated" and self.ripple.knots_db:
            peak = max(abs(v) for v in self.ripple.knots_db)
            if peak > self.ripple_db_peak + 1e-12:
                raise ValueError(
                    f"tabulated ripple reaches {peak} dB but ripple_db_peak is {self.ripple_db_peak} dB"
                )
        return self


class ClipOnModule(StrictModel):
    id: int = Field(..., ge=0)
    anchor: Vec3 = Field(..., description="c_k, aperture centre (m)")
    axis: Vec3 = Field(..., description="u_k, unit scan direction")
    aperture_length: float = Field(..., gt=0, description="L_k (m)")
    passband: Subband
    losses: LossComponents = LossComponents()
    mapping_law: Literal["linear", "sine"] = "linear"

    @field_validator("axis")
    @classmethod
    def _unit_axis(cls, v: Vec3) -> Vec3:
        if not is_unit(v):
            raise ValueError(f"module axis must be a unit vector (|u| = {np.linalg.norm(v):.12f})")
        return v

    @model_validator(mode="after")
    def _owns_passband(self) -> "ClipOnModule":
        if self.passband.module_id != self.id:
            raise ValueError(f"module {self.id} carries a passband tagged for module {self.passband.module_id}")
        return self


class FabricConfig(StrictModel):
    modules: List[ClipOnModule] = Field(..., min_length=1)
    trunk_feed_origin: Vec3 = (0.0, 0.0, 0.0)

    @model_validator(mode="after")
    def _disjoint(self) -> "FabricConfig":
        ids = [m.id for m in self.modules]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate module ids: {ids}")
        bands = sorted((m.passband for m in self.modules), key=lambda b: b.f_lo)
        for a, b in zip(bands, bands[1:]):
            if b.f_lo < a.f_hi:
                raise ValueError(f"passbands of modules {a.module_id} and {b.module_id} overlap")
        return self

    def module(self, module_id: int) -> ClipOnModule:
        for m in self.modules:
            if m.id == module_id:
                return m
        raise KeyError(module_id)

    @property
    def module_ids(self) -> List[int]:
        return sorted(m.id for m in self.modules)


class PerturbationState(StrictModel):
    delay_offset_s: float = Field(0.0, description="tau0 (s)")
    gain_tilt_db: float = Field(0.0, description="Gain change across the fabric span, linear in f (dB)")
    module_offsets: Dict[int, Vec3] = Field(default_factory=dict, description="delta_k per module (m)")
    max_offset_m: float = Field(0.01, gt=0, description="Validity bound on |delta_k|")

    @model_validator(mode="after")
    def _small_offsets(self) -> "PerturbationState":
        for k, d in self.module_offsets.items():
            if np.linalg.norm(d) > self.max_offset_m:
                raise ValueError(f"module {k} offset {np.linalg.norm(d)} m exceeds bound {self.max_offset_m} m")
        return self

    def offset(self, module_id: int) -> np.ndarray:
        return np.asarray(self.module_offsets.get(module_id, (0.0, 0.0, 0.0)), dtype=np.float64)
