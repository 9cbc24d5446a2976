from typing import List, Optional

from pydantic import Field, model_validator

from app.schemas.base import StrictModel


class BudgetInput(StrictModel):
    coupling_db: float = Field(4.0, ge=0)
    guided_wave_db: float = Field(1.0, ge=0)
    insertion_db: float = Field(2.0, ge=0)
    ripple_db: float = Field(1.0, ge=0, description="Residual mismatch ripple line of the budget")
    baseline_snr_db: float = Field(20.0, description="Direct-fed baseline SNR at the reference range")
    reference_range_m: float = Field(3.0, gt=0)
    baseline_max_range_m: float = Field(5.0, gt=0)
    num_states: int = Field(64, ge=1, description="M")
    threshold_db: float = 10.0
    per_state_ripple_db: Optional[List[float]] = Field(
        None,
        description="Ripple loss of each state (dB); defaults to the flat ripple line",
    )

    @model_validator(mode="after")
    def _lengths(self) -> "BudgetInput":
        if self.per_state_ripple_db is not None and len(self.per_state_ripple_db) != self.num_states:
            raise ValueError(
                f"per-state ripple has {len(self.per_state_ripple_db)} entries for M = {self.num_states}"
            )
        return self


class BudgetReport(StrictModel):
    total_loss_db: float
    snr_at_reference_db: float
    range_reduction_factor: float
    reduced_max_range_m: float
    m_eff: int
    below_threshold_states: List[int]
    per_state_snr_db: List[float]

    @model_validator(mode="after")
    def _partition(self) -> "BudgetReport":
        if self.m_eff + len(self.below_threshold_states) != len(self.per_state_snr_db):
            raise ValueError("M_eff and below-threshold states must partition the state set")
        return self
