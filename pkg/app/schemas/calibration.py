from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import Field

from app.schemas.base import ArrayModel, StrictModel, Vec3

# Natural scales of theta: 1 ps, 0.01 dB, 10 um
TAU_SCALE_S = 1e-12
GAIN_SCALE_DB = 0.01
OFFSET_SCALE_M = 1e-5


class CalibParams(StrictModel):
    """theta = (tau0, quadratic gain in dB over nu, rigid per-module offsets)."""

    tau0_s: float = 0.0
    gain_coeffs: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    module_offsets: Dict[int, Vec3] = Field(default_factory=dict)

    def gain_db(self, nu: np.ndarray | float) -> np.ndarray | float:
        g0, g1, g2 = self.gain_coeffs
        nu = np.asarray(nu, dtype=np.float64)
        return g0 + g1 * nu + g2 * nu * nu

    def offset(self, module_id: int) -> np.ndarray:
        return np.asarray(self.module_offsets.get(module_id, (0.0, 0.0, 0.0)), dtype=np.float64)

    @staticmethod
    def dimension(num_modules: int) -> int:
        return 4 + 3 * num_modules

    @staticmethod
    def scales(module_ids: Sequence[int]) -> np.ndarray:
        return np.concatenate((
            [TAU_SCALE_S],
            np.full(3, GAIN_SCALE_DB),
            np.full(3 * len(module_ids), OFFSET_SCALE_M),
        ))

    def to_vector(self, module_ids: Sequence[int]) -> np.ndarray:
        """Flat theta in SI units, ordered (tau0, g0, g1, g2, delta_k... by module id)."""
        parts: List[float] = [self.tau0_s, *self.gain_coeffs]
        for k in module_ids:
            parts.extend(self.offset(k).tolist())
        return np.asarray(parts, dtype=np.float64)

    @classmethod
    def from_vector(cls, vec: np.ndarray, module_ids: Sequence[int]) -> "CalibParams":
        vec = np.asarray(vec, dtype=np.float64)
        offsets = {
            int(k): tuple(float(v) for v in vec[4 + 3 * i: 7 + 3 * i])
            for i, k in enumerate(module_ids)
        }
        return cls(
            tau0_s=float(vec[0]),
            gain_coeffs=(float(vec[1]), float(vec[2]), float(vec[3])),
            module_offsets=offsets,
        )


class CalibMeasurement(ArrayModel):
    """S_cal^(p)(f_c[m]) on the (reference, usable state) grid, in model units."""

    ref_ids: Tuple[int, ...]
    states: Tuple[int, ...]
    f_centers: np.ndarray = Field(..., description="(S,) Hz")
    values: np.ndarray = Field(..., description="complex (3, S)")
    bins: np.ndarray = Field(..., description="int (3, S) nearest bin of the nominal range")
    slope: float
    sample_rate: float
    n_fast: int
    zero_pad: int
    window: str

    @property
    def n_fft(self) -> int:
        return self.n_fast * self.zero_pad


class FitReport(StrictModel):
    theta_hat: CalibParams
    residual_history: List[float] = Field(..., description="Objective after each accepted iteration")
    converged: bool
    iterations: int
    objective: float
    n_equations: int
    n_params: int
    diagnostic: str = ""
