from typing import Tuple

from pydantic import BaseModel, ConfigDict

Vec3 = Tuple[float, float, float]


class StrictModel(BaseModel):
    """Immutable value object; unknown keys are errors, not warnings."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class ArrayModel(BaseModel):
    """Container for numpy payloads (cubes, profiles, images)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
