import logging
from typing import Any, Dict, List, Sequence

import numpy as np
from scipy import ndimage
from scipy.constants import speed_of_light as C

from app.schemas.dsp import RangeProfile, UsableSet
from app.schemas.imaging import FocusedImage, ImageMetrics, ImagingGrid
from app.utils.chunking import MAX_POINTS_PER_CHUNK, chunk_slices
from app.utils.errors import ImagingError
from app.utils.normalizer import power_to_db

logger = logging.getLogger(__name__)

# Dynamic range of exported heatmaps
HEATMAP_FLOOR_DB = -40.0


def focusing_kernel(f: float, distance: np.ndarray | float) -> np.ndarray:
    """exp(+j 4 pi f d / c)."""
    return np.exp(4j * np.pi * f * np.asarray(distance, dtype=np.float64) / C)


def focus(
    profiles: Sequence[RangeProfile],
    positions: np.ndarray,
    grid: ImagingGrid,
    usable: UsableSet,
    max_points: int = MAX_POINTS_PER_CHUNK,
) -> FocusedImage:
    """
    Z(p) = sum over usable m of Y_m(|p - x_m|) exp(+j 4 pi f_m |p - x_m| / c).

    profiles[m] and positions[m] belong to state m. States are accumulated in
    ascending m for every grid chunk, so Z does not depend on the chunk size.
    """
    if usable.size == 0:
        raise ImagingError("no usable frequency states")
    by_state = {p.state: p for p in profiles}
    missing = [m for m in usable.members if m not in by_state]
    if missing:
        raise ImagingError(f"usable states {missing} have no normalized profile")
    positions = np.asarray(positions, dtype=np.float64)

    points = grid.points().reshape(-1, 3)
    z = np.zeros(points.shape[0], dtype=np.complex128)
    members = sorted(usable.members)

    for sl in chunk_slices(points.shape[0], max_points):
        chunk = points[sl]
        acc = np.zeros(chunk.shape[0], dtype=np.complex128)
        for m in members:
            profile = by_state[m]
            d = np.linalg.norm(chunk - positions[m], axis=-1)
            acc += profile.sample(d) * focusing_kernel(profile.f_center, d)
        z[sl] = acc

    logger.info("Focused %d grid points over %d usable states", points.shape[0], len(members))
    return FocusedImage(values=z.reshape(grid.shape), grid=grid, usable=usable)


def image_metrics(img: FocusedImage) -> ImageMetrics:
    """Peak, PSLR against the highest local maximum outside the -3 dB main lobe, and main-lobe width."""
    mag = np.abs(img.values)
    flat = int(np.argmax(mag))
    peak = float(mag.flat[flat])
    if peak == 0.0:
        raise ImagingError("image is identically zero")
    peak_index = np.unravel_index(flat, mag.shape)

    labels, _ = ndimage.label(mag >= peak / np.sqrt(2.0))
    main_lobe = labels == labels[peak_index]

    local_max = (mag == ndimage.maximum_filter(mag, size=3, mode="constant", cval=0.0)) & (mag > 0.0)
    sidelobes = mag[local_max & ~main_lobe]
    pslr_db = float(20.0 * np.log10(peak / sidelobes.max())) if sidelobes.size else None

    rows, cols = np.nonzero(main_lobe)
    # extent between the outermost main-lobe points; a single-point lobe has width 0
    width = max(rows.max() - rows.min(), cols.max() - cols.min()) * img.grid.spacing

    position = img.grid.points()[peak_index]
    return ImageMetrics(
        peak_index=(int(peak_index[0]), int(peak_index[1])),
        peak_position=tuple(float(v) for v in position),
        peak_magnitude=peak,
        pslr_db=pslr_db,
        width_3db=float(width),
    )


def localization_error(img: FocusedImage, true_position: Sequence[float]) -> float:
    metrics = image_metrics(img)
    return float(np.linalg.norm(np.asarray(metrics.peak_position) - np.asarray(true_position, dtype=np.float64)))


def value_at(img: FocusedImage, position: Sequence[float]) -> complex:
    """Z at the grid point nearest `position`."""
    pts = img.grid.points()
    d = np.linalg.norm(pts - np.asarray(position, dtype=np.float64), axis=-1)
    return complex(img.values.flat[int(np.argmin(d))])


# =========================
# Export
# =========================

def image_rows(img: FocusedImage) -> List[Dict[str, Any]]:
    pts = img.grid.points().reshape(-1, 3)
    vals = img.values.ravel()
    mag_db = power_to_db(np.abs(vals) ** 2)
    return [
        {
            "x_m": float(p[0]),
            "y_m": float(p[1]),
            "z_m": float(p[2]),
            "real": float(v.real),
            "imag": float(v.imag),
            "magnitude_db": float(d),
        }
        for p, v, d in zip(pts, vals, mag_db)
    ]


def heatmap_levels(img: FocusedImage, floor_db: float = HEATMAP_FLOOR_DB) -> np.ndarray:
    """8-bit grey levels of |Z| in dB relative to the peak, clipped at floor_db."""
    mag = np.abs(img.values)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=np.uint8)
    rel_db = np.clip(power_to_db((mag / peak) ** 2), floor_db, 0.0)
    return np.round((rel_db - floor_db) / -floor_db * 255.0).astype(np.uint8)
