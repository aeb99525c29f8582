"""Matrix-product states over the snake-ordered chain.

Site tensors are complex128 arrays A[left, phys, right] with phys index
0 = down, 1 = up. Operations return new states and never mutate their
inputs, except where a method says otherwise.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.linalg import null_space

from analysis.clusters import Snapshot
from physics.lattice import LatticeGeometry
from physics.model import Mpo, PAULI, ztot_mpo
from tensornet.environments import boundary, extend_left
from utils.errors import ConvergenceError, DomainError, NumericalFault


logger = logging.getLogger(__name__)

DEFAULT_SVD_MIN = 1e-10
DEFAULT_CHI = 256

LocalSpec = Union[str, int, bool, Sequence[complex]]


class MpsState:
    """Finite MPS with canonical-form metadata and truncation controls."""

    def __init__(self, tensors: Sequence[np.ndarray], canonical_center: Optional[int] = None,
                 chi_max: int = DEFAULT_CHI, svd_min: float = DEFAULT_SVD_MIN,
                 geometry: Optional[LatticeGeometry] = None):
        """
        Initialize an MPS.

        Args:
            tensors: Site tensors (left, 2, right); boundary bonds must be 1
            canonical_center: Orthogonality center, or None if unknown
            chi_max: Bond-dimension cap used by truncating operations
            svd_min: Singular values below this are discarded when truncating
            geometry: Lattice the chain was mapped from (defaults to a chain)
        """
        self.tensors = [np.asarray(t, dtype=complex) for t in tensors]
        if not self.tensors:
            raise DomainError("an MPS needs at least one site")
        self._validate()
        self.canonical_center = canonical_center
        self.chi_max = int(chi_max)
        self.svd_min = float(svd_min)
        self.geometry = geometry if geometry is not None else LatticeGeometry(len(self.tensors), 1)
        if self.geometry.num_sites != len(self.tensors):
            raise DomainError(f"geometry {self.geometry.label} does not match {len(self.tensors)} sites")

    def _validate(self) -> None:
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[2] != 1:
            raise DomainError("boundary bond dimensions must be 1")
        for k, t in enumerate(self.tensors):
            if t.ndim != 3 or t.shape[1] != 2:
                raise DomainError(f"site {k} tensor has shape {t.shape}, expected (l, 2, r)")
            if k > 0 and self.tensors[k - 1].shape[2] != t.shape[0]:
                raise DomainError(f"bond mismatch between sites {k - 1} and {k}")

    @property
    def num_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self) -> "MpsState":
        return MpsState([t.copy() for t in self.tensors], self.canonical_center,
                        self.chi_max, self.svd_min, self.geometry)

    def with_tensors(self, tensors: Sequence[np.ndarray], center: Optional[int]) -> "MpsState":
        return MpsState(tensors, center, self.chi_max, self.svd_min, self.geometry)

    def __repr__(self) -> str:
        return (f"MpsState(N={self.num_sites}, bonds={self.bond_dims}, "
                f"center={self.canonical_center})")


@dataclass
class TruncationReport:
    """Discarded weight per bond (bond k sits between sites k and k+1)."""

    discarded: List[float] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(sum(self.discarded))


# ---------------------------------------------------------------------------
# Linear algebra helpers

def svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with a fallback to the slower but more robust gesvd driver."""
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError:
        logger.warning("gesdd failed on a %s matrix, retrying with gesvd", matrix.shape)
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def truncation_rank(S: np.ndarray, chi_max: int, svd_min: float,
                    min_keep: int = 1) -> Tuple[int, float]:
    """
    Number of singular values to keep and the relative weight dropped.

    Args:
        S: Singular values in descending order
        chi_max: Cap on the kept count
        svd_min: Floor on kept values after normalizing the spectrum
        min_keep: Keep at least this many values (zero ones included) when
            chi_max and the spectrum length allow it

    Returns:
        (keep, discarded_weight)
    """
    norm2 = float(np.sum(S ** 2))
    if norm2 == 0.0:
        return 1, 0.0
    normalized = S / math.sqrt(norm2)
    keep = int(np.count_nonzero(normalized >= svd_min))
    keep = max(keep, min(int(min_keep), len(S)))
    keep = max(1, min(keep, int(chi_max)))
    discarded = float(np.sum(normalized[keep:] ** 2))
    return keep, discarded


def split_matrix(matrix: np.ndarray, chi_max: int, svd_min: float,
                 min_keep: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """
    Truncated SVD that preserves the Frobenius norm of the input.

    Returns:
        (U, S, Vh, discarded_weight) with len(S) kept values
    """
    U, S, Vh = svd(matrix)
    keep, discarded = truncation_rank(S, chi_max, svd_min, min_keep)
    total = np.linalg.norm(S)
    kept = S[:keep]
    kept_norm = np.linalg.norm(kept)
    if kept_norm > 0:
        kept = kept * (total / kept_norm)
    return U[:, :keep], kept, Vh[:keep], discarded


def _local_vector(spec: LocalSpec) -> np.ndarray:
    if isinstance(spec, str):
        key = spec.lower()
        if key in ("up", "u", "1"):
            return np.array([0.0, 1.0], dtype=complex)
        if key in ("down", "d", "0"):
            return np.array([1.0, 0.0], dtype=complex)
        raise DomainError(f"unknown spin label {spec!r}")
    if isinstance(spec, (bool, int, np.integer)):
        if int(spec) not in (0, 1):
            raise DomainError(f"spin index must be 0 or 1, got {spec}")
        vec = np.zeros(2, dtype=complex)
        vec[int(spec)] = 1.0
        return vec
    vec = np.asarray(spec, dtype=complex).reshape(-1)
    if vec.shape != (2,):
        raise DomainError(f"local state must have 2 amplitudes, got {vec.shape}")
    nrm = np.linalg.norm(vec)
    if nrm == 0:
        raise DomainError("local state has zero norm")
    return vec / nrm


# ---------------------------------------------------------------------------
# Construction

def product_state(geom: LatticeGeometry, local: Union[LocalSpec, Sequence[LocalSpec]],
                  chi_max: int = DEFAULT_CHI, svd_min: float = DEFAULT_SVD_MIN) -> MpsState:
    """
    Product state with one local spin per chain site.

    Args:
        geom: Lattice geometry
        local: "up"/"down" (or 0/1) for all sites, or one entry per site
            (each a label, an index or a 2-vector of amplitudes)

    Returns:
        Bond-dimension-1 MPS
    """
    n = geom.num_sites
    if isinstance(local, (str, int, np.integer)):
        specs = [local] * n
    else:
        specs = list(local)
        if len(specs) != n:
            raise DomainError(f"expected {n} local spins, got {len(specs)}")
    tensors = [_local_vector(spec).reshape(1, 2, 1) for spec in specs]
    return MpsState(tensors, 0, chi_max, svd_min, geom)


def random_mps(geom: LatticeGeometry, chi: int, rng: np.random.Generator) -> MpsState:
    """Normalized random MPS with Gaussian tensors at the largest allowed bonds."""
    if chi < 1:
        raise DomainError(f"chi must be >= 1, got {chi}")
    n = geom.num_sites
    dims = [min(chi, 2 ** min(k, n - k, 30)) for k in range(n + 1)]
    tensors = []
    for k in range(n):
        shape = (dims[k], 2, dims[k + 1])
        tensors.append(rng.normal(size=shape) + 1j * rng.normal(size=shape))
    return canonicalize(MpsState(tensors, None, chi, 0.0, geom), 0)


# ---------------------------------------------------------------------------
# Gauge

def canonicalize(psi: MpsState, center: int, normalize: bool = True) -> MpsState:
    """
    Mixed canonical form around a center site.

    Sites left of the center become left-isometries and sites right of it
    right-isometries (QR sweeps, no truncation).
    """
    n = psi.num_sites
    if not 0 <= center < n:
        raise DomainError(f"center {center} outside [0, {n})")
    tensors = [t.copy() for t in psi.tensors]
    for k in range(center):
        dl, d, dr = tensors[k].shape
        q, r = np.linalg.qr(tensors[k].reshape(dl * d, dr))
        tensors[k] = q.reshape(dl, d, q.shape[1])
        tensors[k + 1] = np.tensordot(r, tensors[k + 1], axes=(1, 0))
    for k in range(n - 1, center, -1):
        dl, d, dr = tensors[k].shape
        q, r = np.linalg.qr(tensors[k].reshape(dl, d * dr).conj().T)
        tensors[k] = q.conj().T.reshape(q.shape[1], d, dr)
        tensors[k - 1] = np.tensordot(tensors[k - 1], r.conj().T, axes=(2, 0))
    if normalize:
        nrm = np.linalg.norm(tensors[center])
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NumericalFault(f"cannot normalize state (norm {nrm})")
        tensors[center] = tensors[center] / nrm
    return psi.with_tensors(tensors, center)


def is_canonical(psi: MpsState, tol: float = 1e-10) -> bool:
    """Check the isometry conditions implied by canonical_center."""
    center = psi.canonical_center
    if center is None:
        return False
    for k, t in enumerate(psi.tensors):
        dl, d, dr = t.shape
        if k < center:
            m = t.reshape(dl * d, dr)
            if not np.allclose(m.conj().T @ m, np.eye(dr), atol=tol):
                return False
        elif k > center:
            m = t.reshape(dl, d * dr)
            if not np.allclose(m @ m.conj().T, np.eye(dl), atol=tol):
                return False
    return True


def pad_bonds(psi: MpsState, chi: int) -> MpsState:
    """
    Enlarge bonds with zero-weight directions up to min(chi, exact rank).

    The state is unchanged; only the variational manifold around it grows.
    The result is right-canonical with center 0.
    """
    n = psi.num_sites
    tensors = canonicalize(psi, 0).tensors
    for k in range(n - 1):
        dl, d, dr = tensors[k].shape
        q, r = np.linalg.qr(tensors[k].reshape(dl * d, dr))
        target = min(int(chi), dl * d, 2 ** min(k + 1, n - k - 1, 30))
        if q.shape[1] < target:
            extra = null_space(q.conj().T)[:, :target - q.shape[1]]
            q = np.hstack([q, extra])
            r = np.vstack([r, np.zeros((extra.shape[1], r.shape[1]), dtype=r.dtype)])
        tensors[k] = q.reshape(dl, d, q.shape[1])
        tensors[k + 1] = np.tensordot(r, tensors[k + 1], axes=(1, 0))
    return canonicalize(psi.with_tensors(tensors, n - 1), 0)


def truncate(psi: MpsState, chi_max: Optional[int] = None,
             svd_min: Optional[float] = None) -> Tuple[MpsState, TruncationReport]:
    """
    Compress every bond to chi_max, dropping singular values below svd_min.

    Args:
        psi: Any MPS
        chi_max: Bond cap (defaults to psi.chi_max)
        svd_min: Singular-value floor (defaults to psi.svd_min)

    Returns:
        (renormalized state with center 0, per-bond discarded weights)
    """
    chi_max = psi.chi_max if chi_max is None else int(chi_max)
    svd_min = psi.svd_min if svd_min is None else float(svd_min)
    n = psi.num_sites
    tensors = canonicalize(psi, n - 1).tensors
    discarded = [0.0] * (n - 1)
    for k in range(n - 1, 0, -1):
        dl, d, dr = tensors[k].shape
        U, S, Vh, weight = split_matrix(tensors[k].reshape(dl, d * dr), chi_max, svd_min)
        discarded[k - 1] = weight
        tensors[k] = Vh.reshape(len(S), d, dr)
        tensors[k - 1] = np.tensordot(tensors[k - 1], U * S, axes=(2, 0))
    tensors[0] = tensors[0] / np.linalg.norm(tensors[0])
    result = MpsState(tensors, 0, chi_max, svd_min, psi.geometry)
    report = TruncationReport(discarded)
    if report.total > 0:
        logger.debug("truncation to chi=%d discarded %.3e", chi_max, report.total)
    return result, report


# ---------------------------------------------------------------------------
# Measurements

def overlap(a: MpsState, b: MpsState) -> complex:
    """<a|b> by a left-to-right transfer contraction."""
    if a.num_sites != b.num_sites:
        raise DomainError(f"length mismatch: {a.num_sites} vs {b.num_sites}")
    env = np.ones((1, 1), dtype=complex)
    for A, B in zip(a.tensors, b.tensors):
        env = np.tensordot(env, B, axes=(1, 0))
        env = np.tensordot(A.conj(), env, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


def norm(psi: MpsState) -> float:
    return math.sqrt(max(overlap(psi, psi).real, 0.0))


def expect_mpo(psi: MpsState, mpo: Mpo) -> float:
    """<psi|H|psi> / <psi|psi> for a Hermitian MPO."""
    env = boundary()
    for A, W in zip(psi.tensors, mpo.tensors):
        env = extend_left(env, A, W)
    return float(env[0, 0, 0].real) / overlap(psi, psi).real


def expect_mpo_squared(psi: MpsState, mpo: Mpo) -> float:
    """<psi|H H|psi> / <psi|psi>, contracted with two MPO layers."""
    env = np.ones((1, 1, 1, 1), dtype=complex)
    for A, W in zip(psi.tensors, mpo.tensors):
        y = np.tensordot(env, A, axes=(3, 0))                  # (a, w, x, t, d)
        y = np.tensordot(y, W, axes=([2, 3], [0, 3]))           # (a, w, d, x', u)
        y = np.tensordot(y, W, axes=([1, 4], [0, 3]))           # (a, d, x', w', s)
        y = np.tensordot(A.conj(), y, axes=([0, 1], [0, 4]))    # (c, d, x', w')
        env = y.transpose(0, 3, 2, 1)
    return float(env[0, 0, 0, 0].real) / overlap(psi, psi).real


def _operator(op: Union[str, np.ndarray]) -> np.ndarray:
    if isinstance(op, str):
        try:
            return PAULI[op.upper()]
        except KeyError:
            raise DomainError(f"unknown operator label {op!r}") from None
    matrix = np.asarray(op, dtype=complex)
    if matrix.shape != (2, 2):
        raise DomainError(f"one-site operator must be 2x2, got {matrix.shape}")
    return matrix


def expect_local(psi: MpsState, op: Union[str, np.ndarray], site: int) -> float:
    """
    Expectation of a one-site operator.

    Args:
        psi: State (normalized on the fly)
        op: Pauli label ("X", "Y", "Z", "I") or a 2x2 matrix
        site: Chain index

    Returns:
        Real part of <op_site>
    """
    if not 0 <= site < psi.num_sites:
        raise DomainError(f"site {site} outside [0, {psi.num_sites})")
    matrix = _operator(op)
    env = np.ones((1, 1), dtype=complex)
    for k, A in enumerate(psi.tensors):
        B = A
        if k == site:
            B = np.tensordot(matrix, A, axes=(1, 1)).transpose(1, 0, 2)
        env = np.tensordot(env, B, axes=(1, 0))
        env = np.tensordot(A.conj(), env, axes=([0, 1], [0, 1]))
    return float(env[0, 0].real) / overlap(psi, psi).real


def expect_local_all(psi: MpsState, op: Union[str, np.ndarray]) -> np.ndarray:
    """One-site expectation on every site with a single pair of sweeps."""
    matrix = _operator(op)
    n = psi.num_sites
    right = [None] * (n + 1)
    right[n] = np.ones((1, 1), dtype=complex)
    for k in range(n - 1, -1, -1):
        A = psi.tensors[k]
        x = np.tensordot(A, right[k + 1], axes=(2, 1))          # (b, s, a')
        right[k] = np.tensordot(A.conj(), x, axes=([1, 2], [1, 2]))
    norm2 = right[0][0, 0].real
    values = np.zeros(n)
    left = np.ones((1, 1), dtype=complex)
    for k, A in enumerate(psi.tensors):
        B = np.tensordot(matrix, A, axes=(1, 1)).transpose(1, 0, 2)
        x = np.tensordot(left, B, axes=(1, 0))                   # (a', s, d)
        x = np.tensordot(A.conj(), x, axes=([0, 1], [0, 1]))     # (c', d)
        values[k] = float(np.tensordot(x, right[k + 1], axes=([0, 1], [0, 1])).real) / norm2
        x = np.tensordot(left, A, axes=(1, 0))
        left = np.tensordot(A.conj(), x, axes=([0, 1], [0, 1]))
    return values


def expect_ztot_moments(psi: MpsState) -> Tuple[float, float]:
    """(<S^z_tot>, <(S^z_tot)^2>) in Pauli units, exact via small MPOs."""
    n = psi.num_sites
    first = expect_mpo(psi, ztot_mpo(n, 1))
    second = expect_mpo(psi, ztot_mpo(n, 2))
    return first, second


def schmidt_values(psi: MpsState, cut: int) -> np.ndarray:
    """
    Normalized Schmidt coefficients across a cut.

    Args:
        cut: Number of sites on the left, in [1, N-1]
    """
    n = psi.num_sites
    if not 1 <= cut <= n - 1:
        raise DomainError(f"cut {cut} outside [1, {n - 1}]")
    center = canonicalize(psi, cut).tensors[cut]
    dl = center.shape[0]
    S = np.linalg.svd(center.reshape(dl, -1), compute_uv=False)
    return S / np.linalg.norm(S)


def entropy_from_schmidt(S: np.ndarray) -> float:
    p = np.asarray(S, dtype=float) ** 2
    p = p / p.sum()
    p = p[p > 1e-300]
    return float(max(0.0, -np.sum(p * np.log(p))))


def half_chain_entropy(psi: MpsState, cut: Optional[int] = None) -> float:
    """Von Neumann entropy (natural log) across a cut; central cut by default."""
    if cut is None:
        cut = psi.num_sites // 2
    return entropy_from_schmidt(schmidt_values(psi, cut))


# ---------------------------------------------------------------------------
# Sampling

def sample_snapshots(psi: MpsState, rngs: Sequence[np.random.Generator]) -> List[Snapshot]:
    """
    Projective S^z measurements, one per generator.

    The state is brought to right-canonical form once; each shot is drawn by
    sequential conditional sampling from site 0 to site N-1, which reproduces
    the Born distribution exactly. psi itself is left untouched.
    """
    tensors = canonicalize(psi, 0).tensors
    geometry = psi.geometry
    shots = []
    for rng in rngs:
        bits = np.zeros(psi.num_sites, dtype=bool)
        vec = np.ones(1, dtype=complex)
        for k, A in enumerate(tensors):
            m = np.tensordot(vec, A, axes=(0, 0))               # (s, right)
            probs = np.sum(np.abs(m) ** 2, axis=1)
            total = probs.sum()
            if not np.isfinite(total) or total <= 0.0:
                raise NumericalFault(f"invalid conditional probabilities at site {k}")
            up = rng.random() < probs[1] / total
            bits[k] = up
            chosen = m[1 if up else 0]
            vec = chosen / np.linalg.norm(chosen)
        shots.append(Snapshot(geometry, bits))
    return shots


def sample_snapshot(psi: MpsState, rng: np.random.Generator) -> Snapshot:
    """One projective S^z measurement of psi."""
    return sample_snapshots(psi, [rng])[0]


# ---------------------------------------------------------------------------
# Random states at a target entanglement

def random_mps_with_entropy(geom: LatticeGeometry, chi: int, target_entropy: float,
                            tol: float = 0.1, rng: Optional[np.random.Generator] = None,
                            max_iter: int = 200) -> MpsState:
    """
    Random MPS whose central-cut entropy lies within tol of a target.

    A Gaussian random MPS is drawn at bond dimension chi, and its Schmidt
    spectrum at the central cut is tilted, lambda_i^2 -> lambda_i^(2 beta)
    (renormalized), with beta found by bisection. beta = 0 gives the flat
    spectrum (entropy ln D); large beta approaches a product across the cut.

    Raises:
        DomainError: target above ln(chi) or above what the cut can hold
        ConvergenceError: bisection budget exhausted
    """
    if chi < 1:
        raise DomainError(f"chi must be >= 1, got {chi}")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    if target_entropy < 0:
        raise DomainError(f"target entropy must be non-negative, got {target_entropy}")
    if target_entropy > math.log(chi) + 1e-12:
        raise DomainError(f"target entropy {target_entropy} exceeds ln(chi) = {math.log(chi):.4f}")
    rng = rng if rng is not None else np.random.default_rng()
    n = geom.num_sites

    if target_entropy <= tol:
        local = []
        for _ in range(n):
            vec = rng.normal(size=2) + 1j * rng.normal(size=2)
            local.append(vec / np.linalg.norm(vec))
        return product_state(geom, local, chi_max=chi)
    if n == 1:
        raise DomainError("a single site carries no entanglement")

    cut = n // 2
    psi = canonicalize(random_mps(geom, chi, rng), cut)
    center = psi.tensors[cut]
    dl, d, dr = center.shape
    U, S, Vh = svd(center.reshape(dl, d * dr))
    nonzero = S > 1e-300
    U, S, Vh = U[:, nonzero], S[nonzero], Vh[nonzero]
    log_weights = 2.0 * np.log(S / np.linalg.norm(S))
    rank = len(S)
    if target_entropy - math.log(rank) > tol:
        raise DomainError(f"target entropy {target_entropy} unreachable with bond {rank} at the central cut")

    def tilted(beta: float) -> np.ndarray:
        x = beta * log_weights
        w = np.exp(x - x.max())
        return w / w.sum()

    def entropy(beta: float) -> float:
        w = tilted(beta)
        w = w[w > 1e-300]
        return float(-np.sum(w * np.log(w)))

    trace = []
    lo, hi = 0.0, 1.0
    while entropy(hi) > target_entropy:
        hi *= 2.0
        if hi > 1e8:
            raise ConvergenceError("could not bracket the target entropy", trace)
    beta = 0.0
    for _ in range(max_iter):
        value = entropy(beta)
        trace.append(value)
        if abs(value - target_entropy) <= tol:
            break
        beta = 0.5 * (lo + hi)
        if entropy(beta) > target_entropy:
            lo = beta
        else:
            hi = beta
    else:
        raise ConvergenceError(f"entropy bisection did not reach {target_entropy} +- {tol}", trace)

    weights = np.sqrt(tilted(beta))
    tensors = list(psi.tensors)
    tensors[cut] = ((U * weights) @ Vh).reshape(dl, d, dr)
    logger.debug("random MPS: beta=%.4f, central entropy %.4f (target %.4f)",
                  beta, trace[-1], target_entropy)
    return MpsState(tensors, cut, chi, DEFAULT_SVD_MIN, geom)
