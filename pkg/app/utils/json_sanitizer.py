import json
import math
import logging
from typing import Any

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """
    Convert report payloads into plain JSON types.
    - pydantic models -> dicts (recursively cleaned)
    - numpy scalars / arrays -> python floats / lists
    - complex -> {"re": .., "im": ..}
    - non-finite floats -> None (JSON has no inf/nan)
    """
    if isinstance(value, BaseModel):
        return to_jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if not math.isfinite(value):
            logger.debug("Non-finite float replaced by null in report")
            return None
        return value
    return value


def dumps_report(payload: Any) -> str:
    """Deterministic JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"
