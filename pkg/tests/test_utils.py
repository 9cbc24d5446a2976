import json
import math

import numpy as np
import pandas as pd
import pytest

from app.repositories.artifact_repository import ArtifactRepository, read_cube
from app.schemas.scene import RawDataCube
from app.utils.chunking import chunk_slices
from app.utils.json_sanitizer import dumps_report, to_jsonable
from app.utils.normalizer import as_vec3, db_to_amplitude, db_to_power, normalized_frequency, power_to_db


# =========================
# Helpers
# =========================

def test_chunk_slices_cover_range_in_order():
    slices = list(chunk_slices(10, 4))
    assert slices == [slice(0, 4), slice(4, 8), slice(8, 10)]
    assert list(chunk_slices(3, 4)) == [slice(0, 3)]
    assert list(chunk_slices(0, 4)) == []
    with pytest.raises(ValueError):
        list(chunk_slices(5, 0))


def test_json_sanitizer_handles_numpy_and_non_finite():
    payload = {"a": np.float32(1.5), "b": np.arange(2), "c": math.inf, "d": 1 + 2j, 3: (np.bool_(True),)}
    assert to_jsonable(payload) == {"a": 1.5, "b": [0, 1], "c": None, "d": {"re": 1.0, "im": 2.0}, "3": [True]}
    text = dumps_report({"z": 1, "a": 2})
    assert text.index('"a"') < text.index('"z"') and text.endswith("\n")


def test_normalizer_helpers():
    assert normalized_frequency(63e9, 60e9, 66e9) == pytest.approx(0.5)
    assert power_to_db(100.0) == pytest.approx(20.0)
    assert power_to_db(0.0) == -np.inf
    with pytest.raises(ValueError):
        as_vec3([1.0, 2.0])


def test_decibel_conversions_agree():
    assert db_to_amplitude(6.02) == pytest.approx(2.0, rel=1e-3)
    assert db_to_power(-10.0) == pytest.approx(0.1)
    db = np.array([-12.0, 0.0, 20.0])
    assert db_to_amplitude(db) ** 2 == pytest.approx(db_to_power(db))
    assert power_to_db(db_to_power(db)) == pytest.approx(db)


# =========================
# Artifact repository
# =========================

def test_csv_output_is_byte_stable(tmp_path):
    rows = [{"x": 0.1 + 0.2, "n": 3}, {"x": 1e-12, "n": 4}]
    first = ArtifactRepository(tmp_path / "a").write_csv("t.csv", rows).read_bytes()
    second = ArtifactRepository(tmp_path / "b").write_csv("t.csv", rows).read_bytes()
    assert first == second
    assert first.decode().splitlines() == ["x,n", "0.3,3", "1e-12,4"]


def test_cube_and_header_round_trip(tmp_path, schedule):
    rng = np.random.default_rng(0)
    shape = (schedule.num_states, schedule.evolutions, schedule.n_fast)
    samples = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)).astype(np.complex64)
    cube = RawDataCube(samples=samples.astype(np.complex128), schedule=schedule, fabric_hash="abc", seed=9)

    repo = ArtifactRepository(tmp_path)
    path = repo.write_cube("cube", cube, "sched")
    assert read_cube(path, shape) == pytest.approx(samples.astype(np.complex128))
    header = (tmp_path / "cube.hdr").read_text()
    assert f"dims: states={shape[0]} evolutions={shape[1]} fast_time={shape[2]}" in header
    assert "seed: 9" in header



def test_cube_csv_lists_samples_in_c_order(tmp_path, schedule):
    shape = (schedule.num_states, schedule.evolutions, schedule.n_fast)
    samples = np.arange(np.prod(shape)).reshape(shape) * (1 - 0.5j)
    cube = RawDataCube(samples=samples, schedule=schedule, fabric_hash="abc", seed=1)

    df = pd.read_csv(ArtifactRepository(tmp_path).write_cube_csv("cube", cube))
    assert list(df.columns) == ["m", "evolution", "n", "real", "imag"]
    assert len(df) == samples.size
    row = df.iloc[shape[2] * shape[1] + shape[2] + 2]
    assert (row["m"], row["evolution"], row["n"]) == (1, 1, 2)
    assert complex(row["real"], row["imag"]) == pytest.approx(samples[1, 1, 2])

def test_pgm_puts_largest_v_on_top(tmp_path):
    levels = np.zeros((3, 2), dtype=np.uint8)
    levels[0, 1] = 255  # u index 0, top v
    data = ArtifactRepository(tmp_path).write_pgm("img.pgm", levels).read_bytes()
    header, pixels = data[:len(b"P5\n3 2\n255\n")], data[len(b"P5\n3 2\n255\n"):]
    assert header == b"P5\n3 2\n255\n"
    assert list(pixels) == [255, 0, 0, 0, 0, 0]


def test_manifest_lists_every_file_with_hash(tmp_path):
    repo = ArtifactRepository(tmp_path)
    repo.write_text("notes.txt", "hello\n")
    repo.write_json("report.json", {"ok": True})
    manifest = json.loads(repo.write_manifest("cfg", 42, {"scenario": "s"}).read_text())
    assert sorted(manifest["files"]) == ["notes.txt", "report.json"]
    assert manifest["files"]["notes.txt"] == (
        "5891b5b522d5df086d0ff0b110fbd9d21bb4fc7163af34d08286a2e846f6be03"
    )
    assert manifest["seed"] == 42 and manifest["scenario"] == "s"
    assert "numpy" in manifest["versions"]
