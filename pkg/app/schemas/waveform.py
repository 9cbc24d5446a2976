from typing import List

import numpy as np
from pydantic import Field, model_validator

from app.schemas.base import StrictModel


class Band(StrictModel):
    f_lo: float = Field(..., gt=0, description="Lower band edge (Hz)")
    f_hi: float = Field(..., gt=0, description="Upper band edge (Hz)")

    @model_validator(mode="after")
    def _ordered(self) -> "Band":
        if not self.f_hi > self.f_lo:
            raise ValueError(f"band upper edge {self.f_hi} Hz must exceed lower edge {self.f_lo} Hz")
        return self

    @property
    def width(self) -> float:
        return self.f_hi - self.f_lo


class Subband(StrictModel):
    """Passband B_k owned by one clip-on module. Closed below, open above."""

    module_id: int = Field(..., ge=0)
    f_lo: float = Field(..., gt=0)
    f_hi: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "Subband":
        if not self.f_hi > self.f_lo:
            raise ValueError(f"subband of module {self.module_id}: f_hi must exceed f_lo")
        return self

    @property
    def width(self) -> float:
        return self.f_hi - self.f_lo

    @property
    def center(self) -> float:
        return 0.5 * (self.f_lo + self.f_hi)

    def contains(self, f: float) -> bool:
        return self.f_lo <= f < self.f_hi

    def contains_span(self, f_lo: float, f_hi: float, tol: float = 0.0) -> bool:
        # A chirp span touching the upper edge still belongs here.
        return self.f_lo - tol <= f_lo and f_hi <= self.f_hi + tol


class ChirpSpec(StrictModel):
    state_index: int = Field(..., ge=0)
    evolution: int = Field(..., ge=0)
    module_id: int = Field(..., ge=0)
    f_center: float = Field(..., gt=0, description="f_c[m] (Hz)")
    bandwidth: float = Field(..., gt=0, description="B_chirp (Hz)")
    duration: float = Field(..., gt=0, description="T_chirp (s)")
    sample_rate: float = Field(..., gt=0, description="Fast-time sample rate (Hz)")
    t_start: float = Field(..., ge=0, description="Chirp start time (s)")

    @property
    def slope(self) -> float:
        return self.bandwidth / self.duration

    @property
    def n_fast(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration


class ChirpSchedule(StrictModel):
    band: Band
    subbands: List[Subband]
    chirps: List[ChirpSpec]
    guard_time: float = Field(..., ge=0, description="T_g (s)")
    num_states: int = Field(..., ge=1)
    evolutions: int = Field(..., ge=1)

    @property
    def first_pass(self) -> List[ChirpSpec]:
        return self.chirps[: self.num_states]

    @property
    def state_centers(self) -> np.ndarray:
        return np.array([c.f_center for c in self.first_pass], dtype=np.float64)

    @property
    def state_modules(self) -> List[int]:
        return [c.module_id for c in self.first_pass]

    @property
    def slope(self) -> float:
        return self.chirps[0].slope

    @property
    def n_fast(self) -> int:
        return self.chirps[0].n_fast

    @property
    def sample_rate(self) -> float:
        return self.chirps[0].sample_rate

    @property
    def chirp_bandwidth(self) -> float:
        return self.chirps[0].bandwidth

    @property
    def chirp_duration(self) -> float:
        return self.chirps[0].duration

    @property
    def pri(self) -> float:
        """Evolution repetition interval: every state is revisited once per sweep."""
        return self.num_states * (self.chirp_duration + self.guard_time)


class GuardBudget(StrictModel):
    t_max: float = Field(..., ge=0, description="Max round-trip delay (s)")
    t_ringing: float = Field(0.0, ge=0)
    t_multipath: float = Field(0.0, ge=0)

    @property
    def total(self) -> float:
        return self.t_max + self.t_ringing + self.t_multipath


class ValidationReport(StrictModel):
    passed: bool
    guard_time_s: float
    budget_sum_s: float
    margin_s: float = Field(..., description="T_g - (T_max + T_ringing + T_multipath)")
    realized_min_gap_s: float
    messages: List[str] = []
