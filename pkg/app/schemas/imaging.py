from typing import Optional, Tuple

import numpy as np
from pydantic import Field, model_validator

from app.schemas.base import ArrayModel, StrictModel, Vec3
from app.schemas.dsp import UsableSet
from app.utils.normalizer import UNIT_TOL


class ImagingGrid(StrictModel):
    """Planar grid centred on `origin`, spanned by two orthonormal axes."""

    origin: Vec3 = (0.0, 0.5, 0.0)
    axis_u: Vec3 = (1.0, 0.0, 0.0)
    axis_v: Vec3 = (0.0, 1.0, 0.0)
    extent_u: float = Field(1.0, gt=0)
    extent_v: float = Field(1.0, gt=0)
    spacing: float = Field(0.005, gt=0)

    @model_validator(mode="after")
    def _orthonormal(self) -> "ImagingGrid":
        u = np.asarray(self.axis_u)
        v = np.asarray(self.axis_v)
        if abs(np.linalg.norm(u) - 1) > UNIT_TOL or abs(np.linalg.norm(v) - 1) > UNIT_TOL:
            raise ValueError("grid axes must be unit vectors")
        if abs(float(u @ v)) > UNIT_TOL:
            raise ValueError("grid axes must be orthogonal")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return (
            int(round(self.extent_u / self.spacing)) + 1,
            int(round(self.extent_v / self.spacing)) + 1,
        )

    def coords(self) -> Tuple[np.ndarray, np.ndarray]:
        n_u, n_v = self.shape
        cu = (np.arange(n_u) - 0.5 * (n_u - 1)) * self.spacing
        cv = (np.arange(n_v) - 0.5 * (n_v - 1)) * self.spacing
        return cu, cv

    def points(self) -> np.ndarray:
        """(n_u, n_v, 3) positions in metres."""
        cu, cv = self.coords()
        return (
            np.asarray(self.origin)[None, None, :]
            + cu[:, None, None] * np.asarray(self.axis_u)[None, None, :]
            + cv[None, :, None] * np.asarray(self.axis_v)[None, None, :]
        )

    @property
    def half_diagonal(self) -> float:
        return float(np.sqrt(2.0) * self.spacing / 2.0)


class FocusedImage(ArrayModel):
    values: np.ndarray = Field(..., description="complex Z(p), shape = grid.shape")
    grid: ImagingGrid
    usable: UsableSet

    @model_validator(mode="after")
    def _dims(self) -> "FocusedImage":
        if self.values.shape != self.grid.shape:
            raise ValueError(f"image shape {self.values.shape} does not match grid {self.grid.shape}")
        return self


class ImageMetrics(StrictModel):
    peak_index: Tuple[int, int]
    peak_position: Vec3
    peak_magnitude: float
    pslr_db: Optional[float] = Field(None, description="None when no sidelobe exists outside the main lobe")
    width_3db: float
