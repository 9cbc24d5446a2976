from typing import List, Literal, Optional

import numpy as np
from pydantic import Field, model_validator

from app.schemas.base import StrictModel, Vec3
from app.schemas.budget import BudgetInput
from app.schemas.calibration import CalibParams
from app.schemas.fabric import LossComponents, PerturbationState
from app.schemas.imaging import ImagingGrid
from app.schemas.scene import NoiseSpec, ReferenceScatterer, Target
from app.schemas.waveform import Band, Subband

SCHEMA_VERSION = 1


class ScheduleBlock(StrictModel):
    band: Band = Band(f_lo=60e9, f_hi=66e9)
    guard_band_hz: float = Field(100e6, ge=0)
    subbands: Optional[List[Subband]] = Field(None, description="Explicit override of the equal split")
    num_states: int = Field(64, ge=1)
    chirp_bandwidth_hz: float = Field(80e6, gt=0)
    chirp_duration_s: float = Field(40e-6, gt=0)
    guard_time_s: float = Field(200e-9, ge=0)
    evolutions: int = Field(16, ge=1)
    sample_rate_hz: float = Field(2e6, gt=0)


class GuardBlock(StrictModel):
    max_range_m: float = Field(5.0, gt=0, description="R_max; sets T_max = 2 R_max / c")
    ringing_s: float = Field(50e-9, ge=0)
    multipath_s: float = Field(100e-9, ge=0)


class ModuleBlock(StrictModel):
    id: int = Field(..., ge=0)
    anchor: Vec3
    axis: Vec3 = (1.0, 0.0, 0.0)
    aperture_length: float = Field(0.04, gt=0)
    losses: LossComponents = LossComponents()
    mapping_law: Literal["linear", "sine"] = "linear"


class FabricBlock(StrictModel):
    modules: List[ModuleBlock] = Field(..., min_length=1)
    trunk_feed_origin: Vec3 = (0.0, 0.0, 0.0)


class CalibrationBlock(StrictModel):
    enabled: bool = True
    chirp_bandwidth_hz: float = Field(1.5e9, gt=0, description="Chirp bandwidth of the start-up pass")
    max_range_m: float = Field(0.5, gt=0, description="Enclosure range bound used for the pass's guard budget")
    initial: CalibParams = CalibParams()
    max_iterations: int = Field(200, ge=1)
    delay_search_s: float = Field(5e-9, gt=0, description="Half-width of the coarse delay search")


class ProcessingBlock(StrictModel):
    window: str = "hann"
    zero_pad: int = Field(4, ge=1)
    threshold_db: float = 10.0
    evolution_index: int = Field(0, ge=0)
    # usable states from SNR averaged over all evolutions, else from evolution_index alone
    integrate_snr: bool = True


class BudgetBlock(BudgetInput):
    ripple_fixture: Optional[str] = Field(None, description="Shipped per-state ripple table, e.g. 'ripple_m64'")


class Scenario(StrictModel):
    schema_version: Literal[1]
    # used as the output sub-directory
    name: str = Field(..., pattern=r"^[A-Za-z0-9][A-Za-z0-9_.-]*$", max_length=128)
    seed: int = Field(0, ge=0, lt=2**64)
    schedule: ScheduleBlock = ScheduleBlock()
    guard: GuardBlock = GuardBlock()
    fabric: FabricBlock
    truth: PerturbationState = PerturbationState()
    scene: List[Target] = []
    references: List[ReferenceScatterer] = []
    noise: NoiseSpec = NoiseSpec()
    calibration: CalibrationBlock = CalibrationBlock()
    processing: ProcessingBlock = ProcessingBlock()
    grid: ImagingGrid = ImagingGrid()
    budget: Optional[BudgetBlock] = None

    @model_validator(mode="after")
    def _referential_integrity(self) -> "Scenario":
        module_ids = {m.id for m in self.fabric.modules}
        if len(module_ids) != len(self.fabric.modules):
            raise ValueError("fabric.modules: duplicate module id")

        if self.schedule.subbands is not None:
            cited = [s.module_id for s in self.schedule.subbands]
            missing = sorted(set(cited) - module_ids)
            if missing:
                raise ValueError(f"schedule.subbands cite unknown modules {missing}")
            if sorted(cited) != sorted(module_ids):
                raise ValueError("schedule.subbands must give every module exactly one subband")

        unknown = sorted(set(self.truth.module_offsets) - module_ids)
        if unknown:
            raise ValueError(f"truth.module_offsets cite unknown modules {unknown}")
        unknown = sorted(set(self.calibration.initial.module_offsets) - module_ids)
        if unknown:
            raise ValueError(f"calibration.initial.module_offsets cite unknown modules {unknown}")

        if self.calibration.enabled:
            ids = sorted(r.id for r in self.references)
            if ids != [1, 2, 3]:
                raise ValueError("calibration needs exactly three references with ids 1, 2, 3")

        target_positions = [np.asarray(t.position) for t in self.scene]
        for r in self.references:
            for p in target_positions:
                if np.allclose(p, r.position, atol=1e-9):
                    raise ValueError(f"reference {r.id} coincides with a scene target")
        if self.processing.evolution_index >= self.schedule.evolutions:
            raise ValueError("processing.evolution_index must be below schedule.evolutions")
        return self
