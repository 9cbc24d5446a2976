from typing import List, Optional

import numpy as np

from app.schemas.base import ArrayModel, StrictModel, Vec3
from app.schemas.budget import BudgetReport
from app.schemas.calibration import FitReport
from app.schemas.dsp import RangeProfile, UsableSet
from app.schemas.fabric import FabricConfig
from app.schemas.imaging import FocusedImage, ImageMetrics
from app.schemas.scene import RawDataCube
from app.schemas.waveform import ChirpSchedule, ValidationReport


class ScheduleResult(StrictModel):
    schedule: ChirpSchedule
    report: ValidationReport


class SimulationResult(ArrayModel):
    schedule: ChirpSchedule
    fabric: FabricConfig
    cube: RawDataCube
    profiles: List[RangeProfile]
    snr_db: List[float]
    usable: UsableSet


class ImagingResult(ArrayModel):
    simulation: SimulationResult
    fit: Optional[FitReport] = None
    positions: np.ndarray
    image: FocusedImage
    metrics: ImageMetrics
    localization_error_m: Optional[float] = None


class RunSummary(StrictModel):
    """What an end-to-end run reports back to the caller."""

    scenario: str
    seed: int
    out_dir: str
    guard_margin_s: float
    m_eff: int
    calibrated: bool
    fit_converged: Optional[bool] = None
    fit_objective: Optional[float] = None
    peak_position: Optional[Vec3] = None
    peak_magnitude: Optional[float] = None
    pslr_db: Optional[float] = None
    width_3db_m: Optional[float] = None
    localization_error_m: Optional[float] = None
    budget: Optional[BudgetReport] = None
    files: List[str] = []
