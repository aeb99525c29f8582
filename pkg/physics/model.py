"""Transverse-field longitudinal Ising model and bubble energetics.

    H = -J sum_<ij> Z_i Z_j - g sum_i X_i - h sum_i Z_i

with Pauli operators (eigenvalues +-1). The local basis is ordered
(down, up), so Z = diag(-1, +1).
"""

import math
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from physics.lattice import LatticeGeometry
from utils.errors import DomainError


PAULI: Dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "Z": np.array([[-1, 0], [0, 1]], dtype=complex),
}

# Eigenvalue of Z on the basis index (0 = down, 1 = up).
Z_VALUES = np.array([-1.0, 1.0])


@dataclass(frozen=True)
class ModelParams:
    """Couplings of one Hamiltonian. J > 0 is ferromagnetic."""

    J: float
    g: float
    h: float

    def __post_init__(self):
        for name in ("J", "g", "h"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class QuenchProtocol:
    """Sudden quench of the longitudinal field h0 -> hq at fixed J, g."""

    pre: ModelParams
    post: ModelParams
    t_max: float
    dt: float
    observable_stride: int = 1

    def __post_init__(self):
        if self.pre.J != self.post.J or self.pre.g != self.post.g:
            raise DomainError("a quench may only change h; J and g must match")
        if not self.t_max > 0:
            raise DomainError(f"t_max must be positive, got {self.t_max}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.observable_stride < 1:
            raise DomainError(f"observable_stride must be >= 1, got {self.observable_stride}")

    @classmethod
    def from_fields(cls, J: float, g: float, h0: float, hq: float, t_max: float,
                    dt: float, observable_stride: int = 1) -> "QuenchProtocol":
        return cls(ModelParams(J, g, h0), ModelParams(J, g, hq), t_max, dt, observable_stride)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass(frozen=True)
class Term:
    """Weighted product of single-site Pauli operators."""

    ops: Tuple[str, ...]
    sites: Tuple[int, ...]
    weight: float


def hamiltonian_terms(geom: LatticeGeometry, p: ModelParams) -> List[Term]:
    """
    Coupling list of the Hamiltonian.

    Args:
        geom: Lattice geometry
        p: Model couplings

    Returns:
        ZZ terms (weight -J) for every bond, then X (-g) and Z (-h) terms for
        every site. Zero weights are kept so the count is |bonds| + 2N.
    """
    terms = [Term(("Z", "Z"), bond, -p.J) for bond in geom.bonds()]
    for site in range(geom.num_sites):
        terms.append(Term(("X",), (site,), -p.g))
        terms.append(Term(("Z",), (site,), -p.h))
    return terms


def classical_energy(terms: Sequence[Term], bits: Sequence[int]) -> float:
    """
    Energy of a computational basis state.

    Args:
        terms: Coupling list
        bits: Spin per chain index (0 = down, 1 = up)

    Returns:
        Diagonal matrix element; X and Y terms contribute zero.
    """
    z = Z_VALUES[np.asarray(bits, dtype=int)]
    energy = 0.0
    for term in terms:
        if any(op not in ("Z", "I") for op in term.ops):
            continue
        value = term.weight
        for op, site in zip(term.ops, term.sites):
            if op == "Z":
                value *= z[site]
        energy += value
    return float(energy)


@dataclass
class Mpo:
    """Matrix-product operator; tensors are (left, right, out, in)."""

    tensors: List[np.ndarray]

    @property
    def num_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> List[int]:
        return [w.shape[1] for w in self.tensors[:-1]]

    def to_matrix(self) -> np.ndarray:
        """Dense matrix where bit k of a basis index is the spin at site k."""
        n = self.num_sites
        if n > 14:
            raise DomainError(f"refusing to densify a {n}-site MPO")
        block = self.tensors[0][0]  # (right, out, in)
        block = block.reshape(block.shape[0], 2, 2)
        for w in self.tensors[1:]:
            # block: (bond, out..., in...) flattened as (bond, dout, din)
            bond, dout, din = block.shape
            block = np.einsum("aij,abst->bisjt", block, w)
            block = block.reshape(w.shape[1], dout * 2, din * 2)
        matrix = block[0]
        # C-order puts site 0 most significant; reverse the site axes.
        axes = list(range(n))[::-1]
        tensor = matrix.reshape((2,) * (2 * n))
        tensor = tensor.transpose(axes + [n + a for a in axes])
        return tensor.reshape(2 ** n, 2 ** n)


def hamiltonian_mpo(geom: LatticeGeometry, p: ModelParams) -> Mpo:
    """
    Exact MPO of the Hamiltonian along the snake chain.

    Built from a finite-state machine with one channel per source site of a
    pending ZZ string, so snake-induced long-range vertical bonds are encoded
    without approximation. The bond dimension depends only on the geometry.
    """
    return mpo_from_terms(geom.num_sites, hamiltonian_terms(geom, p))


def mpo_from_terms(n_sites: int, terms: Sequence[Term]) -> Mpo:
    """
    Finite-state-machine MPO for one- and two-site terms.

    Channel "start" carries the identity from the left, "done" carries it to
    the right, and channel (i, op) means op was placed on site i and its
    partner lies further right.
    """
    onsite = [np.zeros((2, 2), dtype=complex) for _ in range(n_sites)]
    closing: Dict[int, List[Tuple[Tuple[int, str], str, float]]] = {k: [] for k in range(n_sites)}
    last_partner: Dict[Tuple[int, str], int] = {}

    for term in terms:
        if len(term.sites) == 1:
            onsite[term.sites[0]] += term.weight * PAULI[term.ops[0]]
        elif len(term.sites) == 2:
            (a, op_a), (b, op_b) = sorted(zip(term.sites, term.ops))
            if a == b:
                raise DomainError(f"two-site term on a single site {a}")
            key = (a, op_a)
            closing[b].append((key, op_b, term.weight))
            last_partner[key] = max(last_partner.get(key, b), b)
        else:
            raise DomainError(f"terms on {len(term.sites)} sites are not supported")

    def channels(bond: int) -> "OrderedDict[object, int]":
        # bond k sits between sites k and k+1
        open_keys = sorted(key for key, end in last_partner.items() if key[0] <= bond < end)
        labels: List[object] = ["start", *open_keys, "done"]
        return OrderedDict((label, pos) for pos, label in enumerate(labels))

    identity = PAULI["I"]
    tensors = []
    for site in range(n_sites):
        left = channels(site - 1)
        right = channels(site)
        w = np.zeros((len(left), len(right), 2, 2), dtype=complex)
        w[left["start"], right["start"]] = identity
        w[left["done"], right["done"]] = identity
        w[left["start"], right["done"]] += onsite[site]
        for key in right:
            if isinstance(key, tuple):
                if key[0] == site:
                    w[left["start"], right[key]] = PAULI[key[1]]
                elif key in left:
                    w[left[key], right[key]] = identity
        for key, op, weight in closing[site]:
            w[left[key], right["done"]] += weight * PAULI[op]
        if site == 0:
            w = w[left["start"]:left["start"] + 1]
        if site == n_sites - 1:
            w = w[:, right["done"]:right["done"] + 1]
        tensors.append(w)
    return Mpo(tensors)


def ztot_mpo(n_sites: int, power: int) -> Mpo:
    """MPO of S^z_tot (power 1) or (S^z_tot)^2 (power 2) in Pauli units."""
    identity, z = PAULI["I"], PAULI["Z"]
    if power == 1:
        w = np.zeros((2, 2, 2, 2), dtype=complex)
        w[0, 0] = identity
        w[0, 1] = z
        w[1, 1] = identity
        start, done = 0, 1
    elif power == 2:
        # (sum Z)^2 = N + 2 sum_{i<j} Z_i Z_j
        w = np.zeros((3, 3, 2, 2), dtype=complex)
        w[0, 0] = identity
        w[0, 1] = z
        w[0, 2] = identity
        w[1, 1] = identity
        w[1, 2] = 2 * z
        w[2, 2] = identity
        start, done = 0, 2
    else:
        raise DomainError(f"unsupported power {power}")
    tensors = [w.copy() for _ in range(n_sites)]
    tensors[0] = tensors[0][start:start + 1]
    tensors[-1] = tensors[-1][:, done:done + 1]
    return Mpo(tensors)


@dataclass(frozen=True)
class BubbleParams:
    """Phenomenological bubble couplings: wall tension and energy gain density."""

    sigma: float
    delta_eps: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.delta_eps > 0:
            raise DomainError(f"delta_eps must be positive, got {self.delta_eps}")


def bubble_energy_2d(b: BubbleParams, R: float) -> float:
    """E(R) = 2 pi R sigma - pi R^2 delta_eps for a circular bubble."""
    if R < 0:
        raise DomainError(f"radius must be non-negative, got {R}")
    return 2.0 * math.pi * R * b.sigma - math.pi * R * R * b.delta_eps


def bubble_energy_2d_slope(b: BubbleParams, R: float) -> float:
    """dE/dR of the 2D bubble energy."""
    return 2.0 * math.pi * b.sigma - 2.0 * math.pi * R * b.delta_eps


def bubble_energy_1d(b: BubbleParams, L: float) -> float:
    """E(L) = 2 sigma - L delta_eps: two walls, no barrier in 1D."""
    if L < 0:
        raise DomainError(f"length must be non-negative, got {L}")
    return 2.0 * b.sigma - L * b.delta_eps


def critical_radius(b: BubbleParams) -> float:
    return b.sigma / b.delta_eps


def nucleation_barrier(b: BubbleParams) -> float:
    """Height of the 2D barrier, E(R_c) = pi sigma^2 / delta_eps."""
    return math.pi * b.sigma ** 2 / b.delta_eps


def find_critical_radius(b: BubbleParams) -> float:
    """Numerical argmax of the 2D bubble energy (root of its slope)."""
    upper = 2.0 * b.sigma / b.delta_eps
    return brentq(lambda r: bubble_energy_2d_slope(b, r), 0.0, upper,
                  xtol=1e-15, rtol=4 * np.finfo(float).eps)
