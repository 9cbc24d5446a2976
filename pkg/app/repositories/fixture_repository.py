import logging
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from app.utils.errors import ConfigError

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"


class FixtureRepository:
    """
    Shipped, version-pinned per-state tables.

    A ripple fixture is tabulated on the state centres of the schedule it was
    built for: M states spread linearly over [f_lo + B/2, f_hi - B/2].
    """

    # name -> (file, f_lo, f_hi, chirp bandwidth)
    RIPPLE_FIXTURES: Dict[str, Tuple[str, float, float, float]] = {
        "ripple_m64": ("ripple_m64.csv", 60e9, 66e9, 80e6),
    }

    def __init__(self, data_dir: Path = DATA_DIR):
        self.data_dir = data_dir
        self._cache: Dict[str, pd.DataFrame] = {}

    def _table(self, name: str) -> pd.DataFrame:
        if name not in self.RIPPLE_FIXTURES:
            raise ConfigError(f"unknown ripple fixture '{name}' (known: {sorted(self.RIPPLE_FIXTURES)})")
        if name not in self._cache:
            path = self.data_dir / self.RIPPLE_FIXTURES[name][0]
            try:
                df = pd.read_csv(path)
            except FileNotFoundError as e:
                logger.error(f"Ripple fixture file missing: {path}")
                raise ConfigError(f"ripple fixture '{name}' not found at {path}") from e
            df = df.sort_values("state_index").reset_index(drop=True)
            if list(df["state_index"]) != list(range(len(df))):
                raise ConfigError(f"ripple fixture '{name}' must list states 0..M-1 exactly once")
            self._cache[name] = df
            logger.info(f"Loaded ripple fixture '{name}' with {len(df)} states")
        return self._cache[name]

    def ripple_values(self, name: str) -> list[float]:
        """Per-state ripple loss in dB, indexed by state."""
        return self._table(name)["ripple_db"].astype(float).tolist()

    def ripple_knots(self, name: str) -> Tuple[list[float], list[float]]:
        """(frequency knots, dB) of the fixture on its schedule's state centres."""
        values = self.ripple_values(name)
        _, f_lo, f_hi, bandwidth = self.RIPPLE_FIXTURES[name]
        freqs = np.linspace(f_lo + bandwidth / 2.0, f_hi - bandwidth / 2.0, len(values))
        return freqs.tolist(), values


fixture_repository = FixtureRepository()
