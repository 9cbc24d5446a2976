import hashlib
import logging
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from app.schemas.scene import RawDataCube
from app.utils.json_sanitizer import dumps_report

logger = logging.getLogger(__name__)

# Fixed float text so repeated runs are byte-identical
CSV_FLOAT_FORMAT = "%.9g"

# Cubes up to this many complex samples are also written as CSV
CUBE_CSV_MAX_SAMPLES = 50_000

_VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "fastapi")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ArtifactRepository:
    """
    Owns every file a run emits under one output directory and records each
    of them for the manifest.
    """

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._written: List[Path] = []
        logger.info(f"ArtifactRepository writing to {self.out_dir}")

    def _path(self, name: str) -> Path:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        if path not in self._written:
            self._written.append(path)
        return path

    # ==========================================
    # 1. TABLES & REPORTS
    # ==========================================
    def write_csv(self, name: str, rows: List[Dict[str, Any]], columns: Optional[List[str]] = None) -> Path:
        path = self._path(name)
        df = pd.DataFrame(rows, columns=columns)
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {len(df)} rows to {path}")
        return path

    def write_json(self, name: str, payload: Any) -> Path:
        path = self._path(name)
        path.write_text(dumps_report(payload), encoding="utf-8")
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        path.write_text(text, encoding="utf-8")
        return path

    # ==========================================
    # 2. BINARY PAYLOADS
    # ==========================================
    def write_cube(self, name: str, cube: RawDataCube, schedule_hash: str) -> Path:
        """Interleaved float32 re/im in C order (m, evolution, n) plus a text header."""
        path = self._path(f"{name}.bin")
        interleaved = np.empty(cube.samples.shape + (2,), dtype="<f4")
        interleaved[..., 0] = cube.samples.real
        interleaved[..., 1] = cube.samples.imag
        path.write_bytes(interleaved.tobytes(order="C"))

        m, q, n = cube.shape
        header = (
            f"format: interleaved float32 real/imag, little endian, C order\n"
            f"dims: states={m} evolutions={q} fast_time={n}\n"
            f"schedule_hash: {schedule_hash}\n"
            f"fabric_hash: {cube.fabric_hash}\n"
            f"seed: {cube.seed}\n"
            f"noiseless: {str(cube.noiseless).lower()}\n"
        )
        self.write_text(f"{name}.hdr", header)
        logger.info(f"Wrote cube {cube.shape} to {path}")
        return path

    def write_cube_csv(self, name: str, cube: RawDataCube) -> Path:
        """Long-form cube table (m, evolution, n, real, imag) in C order."""
        path = self._path(f"{name}.csv")
        m, q, n = np.meshgrid(*(np.arange(s) for s in cube.shape), indexing="ij")
        df = pd.DataFrame({
            "m": m.ravel(),
            "evolution": q.ravel(),
            "n": n.ravel(),
            "real": cube.samples.real.ravel(),
            "imag": cube.samples.imag.ravel(),
        })
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
        logger.debug(f"Wrote {len(df)} cube samples to {path}")
        return path

    def write_pgm(self, name: str, levels: np.ndarray) -> Path:
        """Binary greymap; rows run along the grid's v axis, top row = largest v."""
        path = self._path(name)
        image = np.flipud(np.asarray(levels, dtype=np.uint8).T)
        height, width = image.shape
        path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + image.tobytes())
        return path

    # ==========================================
    # 3. MANIFEST
    # ==========================================
    def write_manifest(self, config_hash: str, seed: int, extra: Optional[Dict[str, Any]] = None) -> Path:
        files = {
            str(p.relative_to(self.out_dir)): _sha256(p)
            for p in sorted(self._written)
            if p.exists()
        }
        manifest = {
            "config_hash": config_hash,
            "seed": seed,
            "versions": package_versions(),
            "files": files,
            **(extra or {}),
        }
        path = self.out_dir / "manifest.json"
        path.write_text(dumps_report(manifest), encoding="utf-8")
        logger.info(f"Manifest lists {len(files)} files")
        return path


def read_cube(path: str | Path, shape: tuple) -> np.ndarray:
    """Inverse of write_cube's payload layout."""
    raw = np.fromfile(path, dtype="<f4").reshape(tuple(shape) + (2,))
    return raw[..., 0].astype(np.float64) + 1j * raw[..., 1].astype(np.float64)
