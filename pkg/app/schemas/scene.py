from typing import List

import numpy as np
from pydantic import Field, model_validator

from app.schemas.base import ArrayModel, StrictModel, Vec3
from app.schemas.waveform import ChirpSchedule


class Target(StrictModel):
    position: Vec3 = Field(..., description="p (m)")
    rcs: float = Field(1.0, gt=0, description="sigma (m^2)")
    radial_velocity: float = Field(
        0.0,
        description="m/s along the line of sight from the active virtual sample; positive = receding",
    )


class NoiseSpec(StrictModel):
    reference_snr_db: float = Field(20.0, description="Post-FFT SNR of a 1 m^2 target at the reference range")
    reference_range_m: float = Field(3.0, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    noiseless: bool = False


class ReferenceScatterer(StrictModel):
    id: int = Field(..., ge=1, le=3)
    position: Vec3
    rcs: float = Field(0.01, gt=0)


class RawDataCube(ArrayModel):
    samples: np.ndarray = Field(..., description="complex (M, evolutions, n_fast)")
    schedule: ChirpSchedule
    fabric_hash: str
    seed: int
    noiseless: bool = False

    @model_validator(mode="after")
    def _dims(self) -> "RawDataCube":
        expected = (self.schedule.num_states, self.schedule.evolutions, self.schedule.n_fast)
        if self.samples.shape != expected:
            raise ValueError(f"cube shape {self.samples.shape} does not match schedule {expected}")
        return self

    def slice(self, m: int, q: int) -> np.ndarray:
        return self.samples[m, q]

    @property
    def shape(self) -> tuple:
        return self.samples.shape


def targets_from_references(refs: List[ReferenceScatterer]) -> List[Target]:
    return [Target(position=r.position, rcs=r.rcs) for r in refs]
