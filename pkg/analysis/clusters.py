"""Connected-cluster statistics of projective S^z snapshots.

A spin counts as flipped when it differs from the reference polarization
(all-down unless stated otherwise). Clusters use nearest-neighbour
connectivity on the lattice, not on the snake chain.
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from physics.lattice import LatticeGeometry
from utils.errors import DomainError


REFERENCES = ("down", "up")


class Snapshot:
    """One projective measurement: a bit per chain site, True = up."""

    def __init__(self, geometry: LatticeGeometry, bits: Sequence[bool]):
        self.geometry = geometry
        self.bits = np.asarray(bits, dtype=bool).reshape(-1)
        if self.bits.size != geometry.num_sites:
            raise DomainError(
                f"snapshot has {self.bits.size} bits, geometry {geometry.label} needs {geometry.num_sites}")

    def grid(self) -> np.ndarray:
        """Bits arranged as a (rows, cols) boolean image."""
        image = np.zeros((self.geometry.rows, self.geometry.cols), dtype=bool)
        for index, bit in enumerate(self.bits):
            image[self.geometry.coordinates(index)] = bit
        return image

    def to_string(self) -> str:
        """Row-major bit string, '1' = up."""
        return "".join("1" if b else "0" for b in self.grid().reshape(-1))

    @classmethod
    def from_string(cls, geometry: LatticeGeometry, text: str) -> "Snapshot":
        text = text.strip()
        if len(text) != geometry.num_sites or set(text) - {"0", "1"}:
            raise DomainError(f"invalid snapshot string for {geometry.label}: {text!r}")
        image = np.array([c == "1" for c in text], dtype=bool).reshape(geometry.rows, geometry.cols)
        bits = [image[geometry.coordinates(k)] for k in range(geometry.num_sites)]
        return cls(geometry, bits)

    @property
    def up_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def flipped(self, reference: str = "down") -> np.ndarray:
        _check_reference(reference)
        return self.bits.copy() if reference == "down" else ~self.bits

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Snapshot):
            return NotImplemented
        return self.geometry == other.geometry and bool(np.array_equal(self.bits, other.bits))

    def __repr__(self) -> str:
        return f"Snapshot({self.geometry.label}, {self.to_string()})"


def _check_reference(reference: str) -> None:
    if reference not in REFERENCES:
        raise DomainError(f"reference must be one of {REFERENCES}, got {reference!r}")


class UnionFind:
    """Disjoint sets over 0..size-1 with path compression and union by size."""

    def __init__(self, size: int):
        self.parents = list(range(size))
        self.sizes = [1] * size

    def find(self, elem: int) -> int:
        root = elem
        while root != self.parents[root]:
            root = self.parents[root]
        # compress the path to the root
        while elem != root:
            self.parents[elem], elem = root, self.parents[elem]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.sizes[ra] < self.sizes[rb]:
            ra, rb = rb, ra
        self.parents[rb] = ra
        self.sizes[ra] += self.sizes[rb]


def _check_geometry(snap: Snapshot, geom: LatticeGeometry) -> None:
    if snap.geometry != geom:
        raise DomainError(f"snapshot geometry {snap.geometry.label} does not match {geom.label}")


def find_clusters(snap: Snapshot, geom: LatticeGeometry, reference: str = "down") -> List[int]:
    """
    Sizes of the nearest-neighbour connected clusters of flipped spins.

    Args:
        snap: Measured snapshot
        geom: Lattice the snapshot was taken on
        reference: Polarization a spin is compared against ("down" or "up")

    Returns:
        Cluster sizes, largest first; empty when nothing is flipped
    """
    _check_geometry(snap, geom)
    flipped = snap.flipped(reference)
    sites = np.flatnonzero(flipped)
    uf = UnionFind(geom.num_sites)
    for i, j in geom.bonds():
        if flipped[i] and flipped[j]:
            uf.union(i, j)
    counts = Counter(uf.find(int(site)) for site in sites)
    return sorted(counts.values(), reverse=True)


def flood_fill_clusters(snap: Snapshot, geom: LatticeGeometry, reference: str = "down") -> List[int]:
    """Cluster sizes by depth-first flood fill on the (row, col) grid."""
    _check_geometry(snap, geom)
    _check_reference(reference)
    image = snap.grid() if reference == "down" else ~snap.grid()
    seen = np.zeros_like(image)
    sizes = []
    for start in zip(*np.nonzero(image)):
        if seen[start]:
            continue
        seen[start] = True
        stack, size = [start], 0
        while stack:
            r, c = stack.pop()
            size += 1
            for nr, nc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= nr < geom.rows and 0 <= nc < geom.cols and image[nr, nc] and not seen[nr, nc]:
                    seen[nr, nc] = True
                    stack.append((nr, nc))
        sizes.append(size)
    return sorted(sizes, reverse=True)


def hamming_distance(snap: Snapshot, reference: str = "down") -> int:
    """Number of spins differing from the uniform reference polarization."""
    return int(np.count_nonzero(snap.flipped(reference)))


@dataclass
class ClusterStats:
    """
    Aggregated cluster statistics over a set of shots.

    The raw counters are kept so that partial results merge exactly; the
    normalized views are derived on access.
    """

    shots: int = 0
    time: Optional[float] = None
    cluster_counts: Counter = field(default_factory=Counter)
    smax_counts: Counter = field(default_factory=Counter)
    hamming_counts: Counter = field(default_factory=Counter)

    def add(self, sizes: Sequence[int], distance: int) -> None:
        self.shots += 1
        self.cluster_counts.update(sizes)
        self.smax_counts[max(sizes, default=0)] += 1
        self.hamming_counts[distance] += 1

    def merge(self, other: "ClusterStats") -> "ClusterStats":
        """Combine two disjoint shot sets into a new ClusterStats."""
        time = self.time if self.time is not None else other.time
        return ClusterStats(self.shots + other.shots, time,
                            self.cluster_counts + other.cluster_counts,
                            self.smax_counts + other.smax_counts,
                            self.hamming_counts + other.hamming_counts)

    def _normalized(self, counts: Mapping[int, int]) -> Dict[int, float]:
        if self.shots == 0:
            return {}
        return {key: counts[key] / self.shots for key in sorted(counts)}

    @property
    def n_of_s(self) -> Dict[int, float]:
        """Mean number of clusters of each size per shot."""
        return self._normalized(self.cluster_counts)

    @property
    def p_smax(self) -> Dict[int, float]:
        """Distribution of the largest cluster size (0 = nothing flipped)."""
        return self._normalized(self.smax_counts)

    @property
    def hamming_hist(self) -> Dict[int, float]:
        """Distribution of the Hamming distance from the reference."""
        return self._normalized(self.hamming_counts)

    @property
    def flipped_total(self) -> int:
        return sum(d * c for d, c in self.hamming_counts.items())


def accumulate_stats(shots: Iterable[Snapshot], geom: LatticeGeometry, reference: str = "down",
                     time: Optional[float] = None) -> ClusterStats:
    """
    Cluster statistics of a shot set.

    Raises:
        DomainError: empty shot list or a snapshot from another geometry
    """
    stats = ClusterStats(time=time)
    for snap in shots:
        sizes = find_clusters(snap, geom, reference)
        stats.add(sizes, hamming_distance(snap, reference))
    if stats.shots == 0:
        raise DomainError("cannot accumulate statistics over zero shots")
    return stats


def pmax_heatmap(shot_sets: Mapping[float, Sequence[Snapshot]], geom: LatticeGeometry,
                 reference: str = "down") -> np.ndarray:
    """
    Time-resolved largest-cluster distribution.

    Args:
        shot_sets: Shots per measurement time
        geom: Lattice geometry

    Returns:
        Array of shape (len(times), N + 1); row k is P(s_max) at the k-th
        time in ascending order, column s is s_max = s.
    """
    times = sorted(shot_sets)
    table = np.zeros((len(times), geom.num_sites + 1))
    for row, t in enumerate(times):
        stats = accumulate_stats(shot_sets[t], geom, reference, time=t)
        for smax, p in stats.p_smax.items():
            table[row, smax] = p
    return table
