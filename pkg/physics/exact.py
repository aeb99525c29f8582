"""Dense state-vector oracle for small lattices.

Bit k of a basis index is the spin at chain index k (0 = down), the same
convention as Mpo.to_matrix and the snapshot bits.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, expm_multiply

from physics.lattice import LatticeGeometry
from physics.model import ModelParams, PAULI, Term, hamiltonian_terms
from utils.errors import ConvergenceError, DomainError


logger = logging.getLogger(__name__)

MAX_SITES = 20
FULL_SOLVE_SITES = 12
NORM_TOL = 1e-8


@dataclass
class DenseState:
    """Normalized amplitude vector over all 2^N basis states."""

    amplitudes: np.ndarray
    geometry: LatticeGeometry

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if self.amplitudes.size != 2 ** self.geometry.num_sites:
            raise DomainError(f"{self.amplitudes.size} amplitudes do not fit {self.geometry.label}")
        nrm = np.linalg.norm(self.amplitudes)
        if abs(nrm - 1.0) > NORM_TOL:
            raise DomainError(f"dense state is not normalized (norm {nrm:.12f})")

    @classmethod
    def normalized(cls, amplitudes: np.ndarray, geometry: LatticeGeometry) -> "DenseState":
        amplitudes = np.asarray(amplitudes, dtype=complex)
        return cls(amplitudes / np.linalg.norm(amplitudes), geometry)

    @property
    def num_sites(self) -> int:
        return self.geometry.num_sites


def _site_bits(dim: int, site: int) -> np.ndarray:
    return (np.arange(dim) >> site) & 1


def _term_elements(term: Term, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row indices and values of a Pauli-string term acting on every basis column."""
    cols = np.arange(dim)
    rows = cols.copy()
    values = np.full(dim, term.weight, dtype=complex)
    for op, site in zip(term.ops, term.sites):
        bits = _site_bits(dim, site)
        if op == "Z":
            values *= 2.0 * bits - 1.0
        elif op == "X":
            rows ^= 1 << site
        elif op == "Y":
            # Y|down> = -i|up>, Y|up> = i|down>
            values *= np.where(bits == 0, -1j, 1j)
            rows ^= 1 << site
        elif op != "I":
            raise DomainError(f"unknown operator label {op!r}")
    return rows, values


def dense_hamiltonian(geom: LatticeGeometry, p: ModelParams,
                      max_sites: int = MAX_SITES) -> scipy.sparse.csr_matrix:
    """
    Sparse 2^N x 2^N Hamiltonian built term by term with bit operations.

    Raises:
        DomainError: N above max_sites
    """
    n = geom.num_sites
    if n > max_sites:
        raise DomainError(f"{n} sites exceed the dense limit of {max_sites}")
    dim = 2 ** n
    rows, cols, values = [], [], []
    for term in hamiltonian_terms(geom, p):
        if term.weight == 0:
            continue
        r, v = _term_elements(term, dim)
        rows.append(r)
        cols.append(np.arange(dim))
        values.append(v)
    if not rows:
        return scipy.sparse.csr_matrix((dim, dim), dtype=complex)
    matrix = scipy.sparse.coo_matrix(
        (np.concatenate(values), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim))
    return matrix.tocsr()


def dense_evolve(psi: DenseState, H, t_grid: Sequence[float]) -> List[DenseState]:
    """
    exp(-i H t) psi at every time of the grid.

    Uses a full eigendecomposition up to FULL_SOLVE_SITES sites and Krylov
    exponentials (scipy expm_multiply) above.
    """
    times = [float(t) for t in t_grid]
    if psi.num_sites <= FULL_SOLVE_SITES:
        matrix = H.toarray() if scipy.sparse.issparse(H) else np.asarray(H)
        evals, evecs = eigh(matrix)
        coeffs = evecs.conj().T @ psi.amplitudes
        return [DenseState.normalized(evecs @ (np.exp(-1j * evals * t) * coeffs), psi.geometry)
                for t in times]
    states = []
    vec, previous = psi.amplitudes, 0.0
    for t in times:
        vec = expm_multiply(-1j * (t - previous) * H, vec)
        previous = t
        states.append(DenseState.normalized(vec, psi.geometry))
    return states


def dense_eigs(H, k: int, geometry: Optional[LatticeGeometry] = None) -> List[Tuple[float, DenseState]]:
    """
    Lowest k eigenpairs in ascending order.

    Raises:
        ConvergenceError: iterative solver failed to converge
    """
    dim = H.shape[0]
    n = int(round(math.log2(dim)))
    geometry = geometry if geometry is not None else LatticeGeometry(n, 1)
    if not 1 <= k <= dim:
        raise DomainError(f"k must be in [1, {dim}], got {k}")
    if n <= FULL_SOLVE_SITES or k >= dim - 1:
        matrix = H.toarray() if scipy.sparse.issparse(H) else np.asarray(H)
        evals, evecs = eigh(matrix)
    else:
        try:
            evals, evecs = eigsh(H, k=k, which="SA", tol=1e-14)
        except ArpackNoConvergence as exc:
            raise ConvergenceError(f"dense eigensolver did not converge: {exc}") from exc
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    return [(float(evals[j]), DenseState.normalized(evecs[:, j], geometry)) for j in range(k)]


def born_probabilities(psi: DenseState) -> np.ndarray:
    """Probability of every basis outcome, indexed by the bit convention."""
    probs = np.abs(psi.amplitudes) ** 2
    return probs / probs.sum()


def dense_product_state(geom: LatticeGeometry, local: Union[str, Sequence]) -> DenseState:
    """Basis (or product) state; local is "up"/"down" or one 2-vector/label per site."""
    specs = [local] * geom.num_sites if isinstance(local, str) else list(local)
    if len(specs) != geom.num_sites:
        raise DomainError(f"expected {geom.num_sites} local spins, got {len(specs)}")
    vec = np.ones(1, dtype=complex)
    for spec in specs:
        if isinstance(spec, str):
            local_vec = np.array([0, 1] if spec == "up" else [1, 0], dtype=complex)
        else:
            local_vec = np.asarray(spec, dtype=complex)
        # later sites are more significant bits
        vec = np.kron(local_vec, vec)
    return DenseState.normalized(vec, geom)


def dense_from_mps(psi) -> DenseState:
    """Contract an MpsState into a dense vector."""
    n = psi.num_sites
    if n > MAX_SITES:
        raise DomainError(f"{n} sites exceed the dense limit of {MAX_SITES}")
    block = psi.tensors[0][0]  # (s0, right)
    for A in psi.tensors[1:]:
        block = np.tensordot(block, A, axes=(-1, 0))
    tensor = block[..., 0]
    # axis k is site k; bit k must be the least significant for site 0
    vec = tensor.transpose(list(range(n))[::-1]).reshape(-1)
    return DenseState.normalized(vec, psi.geometry)


def dense_expect_local(psi: DenseState, op: str, site: int) -> float:
    """<op_site> for a Pauli label."""
    if not 0 <= site < psi.num_sites:
        raise DomainError(f"site {site} outside [0, {psi.num_sites})")
    dim = psi.amplitudes.size
    rows, values = _term_elements(Term((op.upper(),), (site,), 1.0), dim)
    applied = np.zeros(dim, dtype=complex)
    np.add.at(applied, rows, values * psi.amplitudes)
    return float(np.vdot(psi.amplitudes, applied).real)


def dense_expect_z(psi: DenseState, site: int) -> float:
    bits = _site_bits(psi.amplitudes.size, site)
    return float(np.sum(born_probabilities(psi) * (2.0 * bits - 1.0)))


def dense_magnetization(psi: DenseState) -> float:
    return float(np.mean([dense_expect_z(psi, k) for k in range(psi.num_sites)]))


def dense_ztot_moments(psi: DenseState) -> Tuple[float, float]:
    probs = born_probabilities(psi)
    dim = probs.size
    ztot = sum(2.0 * _site_bits(dim, k) - 1.0 for k in range(psi.num_sites))
    return float(np.sum(probs * ztot)), float(np.sum(probs * ztot ** 2))


def dense_overlap(a: DenseState, b: DenseState) -> complex:
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def dense_return_probability(a: DenseState, b: DenseState) -> float:
    return abs(dense_overlap(a, b)) ** 2


def dense_energy(psi: DenseState, H) -> float:
    return float(np.vdot(psi.amplitudes, H @ psi.amplitudes).real)


def dense_schmidt_values(psi: DenseState, cut: int) -> np.ndarray:
    """Schmidt coefficients between sites [0, cut) and [cut, N)."""
    n = psi.num_sites
    if not 1 <= cut <= n - 1:
        raise DomainError(f"cut {cut} outside [1, {n - 1}]")
    # C order: rows are the high bits (right block), columns the low bits
    matrix = psi.amplitudes.reshape(2 ** (n - cut), 2 ** cut)
    return np.linalg.svd(matrix, compute_uv=False)


def dense_entropy(psi: DenseState, cut: int) -> float:
    p = dense_schmidt_values(psi, cut) ** 2
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log(p))))
