from typing import Tuple

import numpy as np
from pydantic import Field

from app.schemas.base import ArrayModel, StrictModel


class RangeProfile(ArrayModel):
    """Y_m(r): windowed, zero-padded beat spectrum of one chirp."""

    state: int
    f_center: float
    slope: float
    sample_rate: float
    n_fast: int
    zero_pad: int
    window: str
    bins: np.ndarray
    range_axis: np.ndarray
    noise_floor: float
    noiseless: bool = False

    @property
    def n_fft(self) -> int:
        return int(self.bins.shape[-1])

    @property
    def bin_width_m(self) -> float:
        return float(self.range_axis[1] - self.range_axis[0])

    @property
    def peak_index(self) -> int:
        # argmax returns the first maximum, i.e. ties go to the lower bin
        return int(np.argmax(np.abs(self.bins)))

    @property
    def peak_power(self) -> float:
        return float(np.abs(self.bins[self.peak_index]) ** 2)

    def sample(self, r: np.ndarray | float) -> np.ndarray:
        """
        Complex value of the profile at arbitrary range(s).

        The linear phase ramp that a fast-time origin at n=0 puts across bins is
        removed before linear interpolation and restored at the query point, so
        interpolating between bins only loses magnitude. Ranges outside the
        axis evaluate to 0.
        """
        r = np.asarray(r, dtype=np.float64)
        n_c = 0.5 * (self.n_fast - 1)
        k = np.arange(self.n_fft, dtype=np.float64)
        deramped = self.bins * np.exp(2j * np.pi * k * n_c / self.n_fft)
        pos = r / self.bin_width_m
        re = np.interp(pos, k, deramped.real, left=0.0, right=0.0)
        im = np.interp(pos, k, deramped.imag, left=0.0, right=0.0)
        return (re + 1j * im) * np.exp(-2j * np.pi * pos * n_c / self.n_fft)


class UsableSet(StrictModel):
    members: Tuple[int, ...] = Field(..., description="State indices with SNR > threshold")
    threshold_db: float

    @property
    def size(self) -> int:
        return len(self.members)

    def __contains__(self, m: int) -> bool:
        return m in self.members


class DopplerProfile(ArrayModel):
    state: int
    f_center: float
    bins: np.ndarray = Field(..., description="complex (n_doppler, n_range), zero Doppler centred")
    doppler_axis_hz: np.ndarray
    velocity_axis: np.ndarray
    range_axis: np.ndarray

    def peak(self) -> Tuple[int, int]:
        """(doppler_bin, range_bin) of the strongest cell."""
        idx = np.unravel_index(int(np.argmax(np.abs(self.bins))), self.bins.shape)
        return int(idx[0]), int(idx[1])
