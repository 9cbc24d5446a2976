import numpy as np
from typing import Sequence

# Tolerance on unit-vector / orthonormality checks
UNIT_TOL = 1e-9


def as_vec3(value: Sequence[float]) -> np.ndarray:
    """Coerce a length-3 sequence to a float64 array."""
    vec = np.asarray(value, dtype=np.float64)
    if vec.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {vec.shape}")
    return vec


def is_unit(value: Sequence[float], tol: float = UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(value)) - 1.0) <= tol


def normalized_frequency(f: np.ndarray | float, f_lo: float, f_hi: float) -> np.ndarray | float:
    """nu = (f - f_lo) / (f_hi - f_lo); 0 at the lower edge, 1 at the upper edge."""
    return (np.asarray(f, dtype=np.float64) - f_lo) / (f_hi - f_lo)


def db_to_amplitude(db: np.ndarray | float) -> np.ndarray | float:
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 20.0)


def db_to_power(db: np.ndarray | float) -> np.ndarray | float:
    return 10.0 ** (np.asarray(db, dtype=np.float64) / 10.0)


def power_to_db(power: np.ndarray | float) -> np.ndarray | float:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(power, dtype=np.float64))
