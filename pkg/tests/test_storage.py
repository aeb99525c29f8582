import numpy as np
import pytest

from analysis.clusters import Snapshot, accumulate_stats
from experiment import storage
from physics.lattice import LatticeGeometry
from tensornet.evolve import TrajectoryRecord
from tensornet.mps import overlap, random_mps
from utils.errors import ConfigError, DomainError


def test_float_format_is_fixed():
    assert storage.format_value(0.1) == "1.000000000000000e-01"
    assert storage.format_value(np.float64(2.5)) == "2.500000000000000e+00"
    assert storage.format_value(3) == "3"
    assert storage.format_value(True) == "1"
    assert storage.format_value(None) == ""


def test_trajectory_csv(tmp_path):
    record = TrajectoryRecord(times=[0.0, 0.5], mz=[1.0, 0.9], ztot_var=[0.0, 0.1],
                              p_ret=[1.0, 0.8], energy=[-3.0, -3.0], max_bond=[1, 4],
                              discarded_weight=[0.0, 1e-12])
    path = storage.write_trajectory(str(tmp_path / "trajectory.csv"), record)
    data = storage.read_trajectory(path)
    assert list(data) == list(TrajectoryRecord.COLUMNS)
    assert data["p_ret"] == pytest.approx([1.0, 0.8])
    assert data["max_bond"] == pytest.approx([1, 4])


def test_csv_writer_flushes_each_row(tmp_path):
    path = tmp_path / "partial.csv"
    writer = storage.CsvWriter(str(path), ("a", "b")).start()
    writer.write_row((1, 0.5))
    assert path.read_text().splitlines() == ["a,b", "1,5.000000000000000e-01"]
    writer.stop()
    assert writer.rows_written == 1


def test_seed_comment_line(tmp_path):
    path = storage.write_table(str(tmp_path / "seeded.csv"), ("s", "n"), [(1, 0.5)], seed=7)
    assert open(path).readline() == '# {"seed": 7}\n'
    assert storage.table_seed(path) == 7
    assert storage.read_table(path) == (["s", "n"], [["1", "5.000000000000000e-01"]])
    plain = storage.write_table(str(tmp_path / "plain.csv"), ("s", "n"), [(1, 0.5)])
    assert storage.table_seed(plain) is None


def test_snapshot_file(tmp_path):
    geom = LatticeGeometry(2, 3)
    shots = [Snapshot(geom, [1, 0, 1, 1, 0, 0]), Snapshot(geom, [0] * 6)]
    path = storage.write_snapshots(str(tmp_path / "snaps" / "t1.txt"), shots, 1.0, 42)
    lines = open(path).read().splitlines()
    assert lines[0] == storage.SNAPSHOT_MAGIC
    assert '"seed": 42' in lines[1]
    assert len(lines) == 4
    read_geom, time, seed, read_shots = storage.read_snapshots(path)
    assert (read_geom, time, seed) == (geom, 1.0, 42)
    assert read_shots == shots
    with pytest.raises(DomainError):
        storage.write_snapshots(str(tmp_path / "empty.txt"), [], 0.0, 0)


def test_state_file_round_trip(tmp_path, rng):
    psi = random_mps(LatticeGeometry(2, 3), 4, rng)
    path = storage.save_state(str(tmp_path / "state.fvq"), psi, {"energy": -1.5})
    loaded, header = storage.load_state(path)
    assert loaded.geometry == psi.geometry
    assert loaded.bond_dims == psi.bond_dims
    assert abs(overlap(psi, loaded)) == pytest.approx(1.0)
    assert header["meta"] == {"energy": -1.5}
    assert storage.file_sha256(path) == storage.file_sha256(
        storage.save_state(str(tmp_path / "again.fvq"), psi, {"energy": -1.5}))


def test_truncated_state_file_is_rejected(tmp_path, rng):
    psi = random_mps(LatticeGeometry(1, 4), 2, rng)
    path = tmp_path / "state.fvq"
    storage.save_state(str(path), psi)
    path.write_bytes(path.read_bytes() + b"\x00" * 16)
    with pytest.raises(DomainError):
        storage.load_state(str(path))
    (tmp_path / "other.fvq").write_bytes(b"nope\n")
    with pytest.raises(DomainError):
        storage.load_state(str(tmp_path / "other.fvq"))
    with pytest.raises(ConfigError):
        storage.load_state(str(tmp_path / "missing.fvq"))
    with pytest.raises(ConfigError):
        storage.read_snapshots(str(tmp_path / "missing.txt"))


def test_cluster_tables(tmp_path, square3):
    shots = [Snapshot(square3, [1, 1, 0, 0, 0, 0, 0, 0, 0]), Snapshot(square3, [0] * 9)]
    paths = storage.write_cluster_tables(str(tmp_path), accumulate_stats(shots, square3))
    assert set(paths) == {"n_of_s", "p_smax", "hamming"}
    header, rows = storage.read_table(paths["p_smax"])
    assert header == ["s_max", "p"]
    assert [int(r[0]) for r in rows] == [0, 2]
