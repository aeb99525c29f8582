"""On-disk formats: CSV tables, snapshot files and binary state files.

Every writer produces byte-identical files for identical inputs: floats are
formatted with a fixed repr and nothing time-dependent is embedded. CSV
tables written for a run start with a `# {"seed": ...}` comment line.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from analysis.clusters import ClusterStats, Snapshot
from physics.lattice import LatticeGeometry, parse_label
from tensornet.evolve import TrajectoryRecord
from tensornet.mps import MpsState
from utils.errors import ConfigError, DomainError


logger = logging.getLogger(__name__)

STATE_MAGIC = b"FVQSTATE1"
SNAPSHOT_MAGIC = "# fvq-snapshots 1"


def format_value(value: Any) -> str:
    """Fixed textual form of a table cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.15e}"
    return str(value)


class CsvWriter:
    """Row-at-a-time CSV writer that flushes after each row."""

    def __init__(self, output_path: str, columns: Sequence[str], seed: Optional[int] = None):
        """
        Initialize the writer.

        Args:
            output_path: Path to the CSV file
            columns: Header row
            seed: Written as a comment line above the header when given
        """
        self.output_path = Path(output_path)
        self.columns = list(columns)
        self.seed = seed
        self._file = None
        self._writer = None
        self.rows_written = 0

    @property
    def is_open(self) -> bool:
        return self._file is not None

    def start(self) -> "CsvWriter":
        """Create the file and write the header."""
        if self.is_open:
            return self
        self.output_path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.output_path, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        if self.seed is not None:
            self._file.write("# " + json.dumps({"seed": int(self.seed)}) + "\n")
        self._writer.writerow(self.columns)
        self._file.flush()
        return self

    def write_row(self, row: Sequence[Any]) -> None:
        if not self.is_open:
            raise DomainError(f"CSV writer for {self.output_path} is not started")
        if len(row) != len(self.columns):
            raise DomainError(f"row has {len(row)} cells, header has {len(self.columns)}")
        self._writer.writerow([format_value(v) for v in row])
        self._file.flush()
        self.rows_written += 1

    def stop(self) -> None:
        if self._file is not None:
            self._file.close()
        self._file = None
        self._writer = None

    def __enter__(self) -> "CsvWriter":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def write_table(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                seed: Optional[int] = None) -> str:
    with CsvWriter(path, columns, seed) as writer:
        for row in rows:
            writer.write_row(row)
    return str(path)


def read_table(path: str) -> Tuple[List[str], List[List[str]]]:
    """(header, rows), skipping leading comment lines."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(line for line in f if not line.startswith("#"))
        header = next(reader)
        return header, [row for row in reader]


def table_seed(path: str) -> Optional[int]:
    """Seed from a table's comment line, None if it has none."""
    with open(path, "r", encoding="utf-8") as f:
        first = f.readline()
    if not first.startswith("# "):
        return None
    return int(json.loads(first[2:])["seed"])


def write_trajectory(path: str, record: TrajectoryRecord, seed: Optional[int] = None) -> str:
    """Trajectory CSV with the columns of TrajectoryRecord.COLUMNS."""
    return write_table(path, TrajectoryRecord.COLUMNS, record.rows(), seed)


def read_trajectory(path: str) -> Dict[str, np.ndarray]:
    header, rows = read_table(path)
    data = np.array([[float(cell) for cell in row] for row in rows]).reshape(len(rows), len(header))
    return {name: data[:, k] for k, name in enumerate(header)}


# Snapshots ------------------------------------------------------------------

def write_snapshots(path: str, shots: Sequence[Snapshot], time: float, seed: int) -> str:
    """
    One shot per line as a row-major bit string, after a commented header.

    Raises:
        DomainError: empty shot list or mixed geometries
    """
    if not shots:
        raise DomainError("no snapshots to write")
    geometry = shots[0].geometry
    if any(s.geometry != geometry for s in shots):
        raise DomainError("snapshots from different geometries")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    header = {"geometry": geometry.label, "time": format_value(float(time)), "seed": int(seed),
              "shots": len(shots)}
    with open(target, "w", encoding="utf-8", newline="") as f:
        f.write(SNAPSHOT_MAGIC + "\n")
        f.write("# " + json.dumps(header, sort_keys=True) + "\n")
        for snap in shots:
            f.write(snap.to_string() + "\n")
    return str(target)


def read_snapshots(path: str) -> Tuple[LatticeGeometry, float, int, List[Snapshot]]:
    """Inverse of write_snapshots: (geometry, time, seed, shots)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [line.rstrip("\n") for line in f]
    except OSError as e:
        raise ConfigError(f"cannot read snapshot file {path}: {e}") from e
    if len(lines) < 2 or lines[0] != SNAPSHOT_MAGIC:
        raise DomainError(f"{path} is not a snapshot file")
    header = json.loads(lines[1][2:])
    geometry = parse_label(header["geometry"])
    shots = [Snapshot.from_string(geometry, line) for line in lines[2:] if line.strip()]
    return geometry, float(header["time"]), int(header["seed"]), shots


# State files ----------------------------------------------------------------

def save_state(path: str, psi: MpsState, meta: Optional[Mapping[str, Any]] = None) -> str:
    """
    Binary MPS file: magic line, JSON header line, raw little-endian complex128.

    Args:
        path: Destination
        psi: State to persist
        meta: Extra header fields (model parameters, energy, ...)
    """
    header = {
        "geometry": psi.geometry.label,
        "shapes": [list(t.shape) for t in psi.tensors],
        "canonical_center": psi.canonical_center,
        "chi_max": psi.chi_max,
        "svd_min": psi.svd_min,
        "meta": dict(meta or {}),
    }
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as f:
        f.write(STATE_MAGIC + b"\n")
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for tensor in psi.tensors:
            f.write(np.ascontiguousarray(tensor, dtype="<c16").tobytes())
    return str(target)


def load_state(path: str) -> Tuple[MpsState, Dict[str, Any]]:
    """
    Read a state file; returns (state, header).

    Raises:
        ConfigError: the file is missing or unreadable
        DomainError: the file is not a well-formed state file
    """
    try:
        with open(path, "rb") as f:
            magic = f.readline().rstrip(b"\n")
            header_line = f.readline()
            payload = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read state file {path}: {e}") from e
    if magic != STATE_MAGIC:
        raise DomainError(f"{path} is not a state file")
    header = json.loads(header_line.decode("utf-8"))
    tensors, offset = [], 0
    for shape in header["shapes"]:
        count = int(np.prod(shape))
        chunk = np.frombuffer(payload, dtype="<c16", count=count, offset=offset)
        tensors.append(chunk.reshape(shape).astype(complex))
        offset += 16 * count
    if offset != len(payload):
        raise DomainError(f"{path}: payload has {len(payload) - offset} trailing bytes")
    psi = MpsState(tensors, header["canonical_center"], header["chi_max"], header["svd_min"],
                   parse_label(header["geometry"]))
    return psi, header


# Cluster tables -------------------------------------------------------------

def write_cluster_tables(directory: str, stats: ClusterStats, heatmap: Optional[np.ndarray] = None,
                         heatmap_times: Sequence[float] = (),
                         seed: Optional[int] = None) -> Dict[str, str]:
    """n_of_s.csv, p_smax.csv, hamming.csv and, if given, pmax_heatmap.csv."""
    out = Path(directory)
    paths = {
        "n_of_s": write_table(str(out / "n_of_s.csv"), ("s", "n"), stats.n_of_s.items(), seed),
        "p_smax": write_table(str(out / "p_smax.csv"), ("s_max", "p"), stats.p_smax.items(), seed),
        "hamming": write_table(str(out / "hamming.csv"), ("d", "p"), stats.hamming_hist.items(), seed),
    }
    if heatmap is not None:
        rows = [(t, s, heatmap[k, s]) for k, t in enumerate(heatmap_times)
                for s in range(heatmap.shape[1])]
        paths["pmax_heatmap"] = write_table(str(out / "pmax_heatmap.csv"), ("t", "s_max", "p"), rows, seed)
    return paths


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
