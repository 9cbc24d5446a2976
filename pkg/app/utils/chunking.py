from typing import Iterator

from app.config import settings

# Grid points per focusing chunk; bounds the (chunk x |M|) temporaries
MAX_POINTS_PER_CHUNK = settings.MAX_GRID_CHUNK


def chunk_slices(n_points: int, max_points: int = MAX_POINTS_PER_CHUNK) -> Iterator[slice]:
    """
    Split a flat index range [0, n_points) into contiguous slices.
    Strategy:
    1. Small input -> a single slice
    2. Otherwise -> fixed-size slices in ascending order, last one short

    Slices are always produced in ascending order so accumulation order per
    point never depends on the chunk size.
    """
    if n_points <= 0:
        return
    if max_points <= 0:
        raise ValueError("max_points must be positive")

    # Fast path for small input
    if n_points <= max_points:
        yield slice(0, n_points)
        return

    for start in range(0, n_points, max_points):
        yield slice(start, min(start + max_points, n_points))
