import hashlib
import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from app.schemas.fabric import ClipOnModule, FabricConfig, PerturbationState
from app.schemas.waveform import Band, ChirpSchedule
from app.utils.errors import FabricError
from app.utils.normalizer import as_vec3

logger = logging.getLogger(__name__)

# Dense sweep used to normalise sinusoidal ripple to its configured peak
_RIPPLE_SWEEP_POINTS = 4097


def active_module(fabric: FabricConfig, f: float) -> Optional[int]:
    """Id of the unique module whose passband holds f, or None inside a guard band."""
    for m in fabric.modules:
        if m.passband.contains(f):
            return m.id
    return None


def _require_module(fabric: FabricConfig, f: float) -> ClipOnModule:
    module_id = active_module(fabric, f)
    if module_id is None:
        raise FabricError(f"no active module at {f / 1e9:.6f} GHz")
    return fabric.module(module_id)


def scan_fraction(module: ClipOnModule, f: float) -> float:
    """Signed position along the module axis in units of L_k, in [-1/2, +1/2)."""
    nu = (f - module.passband.f_lo) / module.passband.width
    if module.mapping_law == "sine":
        return 0.5 * float(np.sin(np.pi * (nu - 0.5)))
    return nu - 0.5


def _map(module: ClipOnModule, f: float, offset: np.ndarray) -> np.ndarray:
    anchor = as_vec3(module.anchor) + offset
    return anchor + as_vec3(module.axis) * module.aperture_length * scan_fraction(module, f)


def nominal_map(fabric: FabricConfig, f: float) -> np.ndarray:
    """x(f) = c_k + u_k L_k ((f - f_lo,k)/(f_hi,k - f_lo,k) - 1/2)."""
    module = _require_module(fabric, f)
    return _map(module, f, np.zeros(3))


def perturbed_map(fabric: FabricConfig, perturbation: PerturbationState, f: float) -> np.ndarray:
    """nominal_map with the active module's anchor moved by delta_k."""
    module = _require_module(fabric, f)
    return _map(module, f, perturbation.offset(module.id))


def positions_with_offsets(
    fabric: FabricConfig,
    freqs: Sequence[float],
    offsets: Dict[int, np.ndarray],
) -> np.ndarray:
    """(S, 3) virtual sample positions for many states under per-module offsets."""
    out = np.empty((len(freqs), 3), dtype=np.float64)
    for i, f in enumerate(freqs):
        module = _require_module(fabric, float(f))
        out[i] = _map(module, float(f), np.asarray(offsets.get(module.id, np.zeros(3)), dtype=np.float64))
    return out


def ripple_db(module: ClipOnModule, f: float | np.ndarray) -> float | np.ndarray:
    """Ripple profile of a module at f, bounded by +/- ripple_db_peak."""
    losses = module.losses
    profile = losses.ripple
    f = np.asarray(f, dtype=np.float64)

    if profile.kind == "none" or losses.ripple_db_peak == 0.0:
        return np.zeros_like(f) if f.ndim else 0.0

    if profile.kind == "tabulated":
        if not profile.knots_hz:
            raise FabricError(f"module {module.id}: ripple fixture '{profile.fixture}' was not resolved")
        values = np.interp(f, profile.knots_hz, profile.knots_db)
        return values if f.ndim else float(values)

    # sinusoidal
    rng = np.random.default_rng(profile.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=2)
    lo = module.passband.f_lo

    def raw(x: np.ndarray) -> np.ndarray:
        return sum(
            a * np.sin(2.0 * np.pi * (x - lo) / p + ph)
            for a, p, ph in zip(profile.amplitudes, profile.periods_hz, phases)
        )

    sweep = np.linspace(module.passband.f_lo, module.passband.f_hi, _RIPPLE_SWEEP_POINTS)
    peak = float(np.max(np.abs(raw(sweep))))
    if peak == 0.0:
        return np.zeros_like(f) if f.ndim else 0.0
    values = np.clip(raw(f) * (losses.ripple_db_peak / peak), -losses.ripple_db_peak, losses.ripple_db_peak)
    return values if f.ndim else float(values)


def loss_at(fabric: FabricConfig, f: float) -> float:
    """Total fixed loss of the active module plus its ripple at f (dB)."""
    module = _require_module(fabric, f)
    return module.losses.fixed_db + float(ripple_db(module, f))


def fabric_span(fabric: FabricConfig) -> Band:
    """Lowest to highest passband edge; the band normalised frequency refers to."""
    return Band(
        f_lo=min(m.passband.f_lo for m in fabric.modules),
        f_hi=max(m.passband.f_hi for m in fabric.modules),
    )


def fabric_hash(fabric: FabricConfig) -> str:
    return hashlib.sha256(fabric.model_dump_json().encode("utf-8")).hexdigest()[:16]


def mapping_rows(fabric: FabricConfig, schedule: ChirpSchedule, perturbation: Optional[PerturbationState] = None) -> List[Dict[str, Any]]:
    """Sampled mapping {(f_c[m], x)} for CSV export."""
    rows = []
    for m, f in enumerate(schedule.state_centers):
        x = perturbed_map(fabric, perturbation, f) if perturbation else nominal_map(fabric, f)
        rows.append({
            "state_index": m,
            "f_center_hz": float(f),
            "module_id": active_module(fabric, f),
            "x_m": float(x[0]),
            "y_m": float(x[1]),
            "z_m": float(x[2]),
        })
    return rows
