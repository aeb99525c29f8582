"""Two-site DMRG for ground states and penalty-orthogonalized excited states."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh

from physics.lattice import LatticeGeometry
from physics.model import ModelParams, Mpo, hamiltonian_mpo
from tensornet.environments import MpoEnvironment, OverlapEnvironment, apply_two_site
from tensornet.krylov import lowest_eigenpair
from tensornet.mps import (DEFAULT_SVD_MIN, MpsState, canonicalize, expect_mpo, expect_mpo_squared,
                           overlap, product_state, random_mps, split_matrix)
from utils.errors import ConvergenceError, DomainError
from utils.rng import named_stream


logger = logging.getLogger(__name__)

ORTHOGONALITY_LIMIT = 1e-3
ORTHOGONALITY_TARGET = 1e-6


@dataclass
class DmrgConfig:
    """Sweep controls for the variational eigensolver."""

    chi_dmrg: int = 64
    n_sweeps_max: int = 50
    energy_tol: float = 1e-10
    penalty_weight: Optional[float] = None
    svd_min: float = DEFAULT_SVD_MIN
    min_sweeps: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.chi_dmrg < 1:
            raise DomainError(f"chi_dmrg must be >= 1, got {self.chi_dmrg}")
        if self.n_sweeps_max < 1:
            raise DomainError(f"n_sweeps_max must be >= 1, got {self.n_sweeps_max}")
        if not self.energy_tol > 0:
            raise DomainError(f"energy_tol must be positive, got {self.energy_tol}")
        if self.penalty_weight is not None and not self.penalty_weight > 0:
            raise DomainError(f"penalty_weight must be positive, got {self.penalty_weight}")


@dataclass
class DmrgResult:
    """Converged eigenstate with its diagnostics."""

    state: MpsState
    energy: float
    variance: float
    trace: List[float] = field(default_factory=list)
    sweeps: int = 0

    def __iter__(self) -> Iterator:
        # unpacks as (state, energy)
        return iter((self.state, self.energy))


class DmrgEngine:
    """
    Two-site sweeping eigensolver on a fixed MPO.

    Lower states passed as penalties add weight * |ref><ref| to the
    Hamiltonian, so the sweep converges to the lowest state orthogonal to
    them once the weight exceeds the relevant gap.
    """

    def __init__(self, psi: MpsState, mpo: Mpo, cfg: DmrgConfig,
                 penalties: Sequence[Tuple[MpsState, float]] = ()):
        if psi.num_sites != mpo.num_sites:
            raise DomainError(f"state has {psi.num_sites} sites, MPO has {mpo.num_sites}")
        self.psi = canonicalize(psi, 0)
        self.mpo = mpo
        self.cfg = cfg
        self.weights = [weight for _, weight in penalties]
        self.penalty_states = [ref for ref, _ in penalties]
        self.env = MpoEnvironment(self.psi.tensors, mpo.tensors)
        self.overlaps = [OverlapEnvironment(ref.tensors, self.psi.tensors)
                         for ref in self.penalty_states]

    def _matvec(self, i: int, shape: Tuple[int, ...]) -> Callable[[np.ndarray], np.ndarray]:
        L, R = self.env.left[i], self.env.right[i + 1]
        W1, W2 = self.mpo.tensors[i], self.mpo.tensors[i + 1]
        projected = [(w, o.window(i).reshape(-1)) for w, o in zip(self.weights, self.overlaps)]

        def matvec(x: np.ndarray) -> np.ndarray:
            y = apply_two_site(L, W1, W2, R, x.reshape(shape)).reshape(-1)
            for weight, phi in projected:
                y = y + weight * np.vdot(phi, x) * phi
            return y

        return matvec

    def _optimize(self, i: int, move_right: bool) -> float:
        tensors = self.psi.tensors
        A, B = tensors[i], tensors[i + 1]
        theta = np.tensordot(A, B, axes=(2, 0))
        dl, _, _, dr = theta.shape
        value, theta = lowest_eigenpair(self._matvec(i, theta.shape), theta)
        U, S, Vh, _ = split_matrix(theta.reshape(dl * 2, 2 * dr), self.cfg.chi_dmrg, self.cfg.svd_min)
        keep = len(S)
        if move_right:
            tensors[i] = U.reshape(dl, 2, keep)
            tensors[i + 1] = (S[:, None] * Vh).reshape(keep, 2, dr)
            self.env.update_left(i, tensors[i])
            for o in self.overlaps:
                o.update_left(i, tensors[i])
            self.psi.canonical_center = i + 1
        else:
            tensors[i] = (U * S).reshape(dl, 2, keep)
            tensors[i + 1] = Vh.reshape(keep, 2, dr)
            self.env.update_right(i + 1, tensors[i + 1])
            for o in self.overlaps:
                o.update_right(i + 1, tensors[i + 1])
            self.psi.canonical_center = i
        return value

    def half_sweep(self, move_right: bool) -> float:
        """Optimize every bond once in one direction; returns the last local eigenvalue."""
        n = self.psi.num_sites
        bonds = range(n - 1) if move_right else range(n - 2, -1, -1)
        value = 0.0
        for i in bonds:
            value = self._optimize(i, move_right)
        return value

    def sweep(self) -> float:
        """One left-to-right plus right-to-left sweep; returns the last local eigenvalue."""
        self.half_sweep(move_right=True)
        return self.half_sweep(move_right=False)

    def objective(self) -> float:
        penalty = sum(w * abs(overlap(ref, self.psi)) ** 2
                      for ref, w in zip(self.penalty_states, self.weights))
        return expect_mpo(self.psi, self.mpo) + penalty

    def run(self) -> Tuple[List[float], int]:
        """
        Sweep until the objective changes by less than energy_tol.

        Returns:
            (objective after each sweep, number of sweeps)

        Raises:
            ConvergenceError: sweep budget exhausted
        """
        trace = [self.objective()]
        for sweep in range(1, self.cfg.n_sweeps_max + 1):
            self.sweep()
            trace.append(self.objective())
            logger.info("DMRG sweep %d: E = %.12f, max bond %d", sweep, trace[-1], self.psi.max_bond)
            if sweep >= self.cfg.min_sweeps and abs(trace[-1] - trace[-2]) < self.cfg.energy_tol:
                return trace, sweep
        raise ConvergenceError(
            f"DMRG did not converge to {self.cfg.energy_tol:.1e} in {self.cfg.n_sweeps_max} sweeps",
            trace)


def _single_site(psi: MpsState, mpo: Mpo, penalties: Sequence[Tuple[MpsState, float]]) -> MpsState:
    matrix = mpo.tensors[0][0, 0].copy()
    for ref, weight in penalties:
        vec = ref.tensors[0].reshape(2)
        matrix = matrix + weight * np.outer(vec, vec.conj())
    _, vecs = eigh(0.5 * (matrix + matrix.conj().T))
    return psi.with_tensors([vecs[:, 0].reshape(1, 2, 1)], 0)


def _solve(psi: MpsState, mpo: Mpo, cfg: DmrgConfig,
           penalties: Sequence[Tuple[MpsState, float]]) -> DmrgResult:
    if psi.num_sites == 1:
        state = _single_site(psi, mpo, penalties)
        trace, sweeps = [], 0
    else:
        engine = DmrgEngine(psi, mpo, cfg, penalties)
        trace, sweeps = engine.run()
        state = canonicalize(engine.psi, 0)
    energy = expect_mpo(state, mpo)
    variance = max(expect_mpo_squared(state, mpo) - energy ** 2, 0.0)
    return DmrgResult(state, energy, variance, trace, sweeps)


def initial_polarization(p: ModelParams) -> str:
    """Product-state seed on the branch the longitudinal field favours."""
    return "up" if p.h > 0 else "down"


def ground_state(geom: LatticeGeometry, p: ModelParams, cfg: Optional[DmrgConfig] = None,
                 initial: Optional[MpsState] = None) -> DmrgResult:
    """
    Ground state of the Hamiltonian by two-site DMRG.

    Args:
        geom: Lattice geometry
        p: Couplings
        cfg: Sweep controls
        initial: Start state (defaults to the polarized product state picked
            by the sign of h)

    Returns:
        DmrgResult; unpacks as (state, energy)
    """
    cfg = cfg if cfg is not None else DmrgConfig()
    mpo = hamiltonian_mpo(geom, p)
    if initial is None:
        initial = product_state(geom, initial_polarization(p), cfg.chi_dmrg, cfg.svd_min)
    result = _solve(initial, mpo, cfg, ())
    logger.info("ground state %s: E0 = %.12f, variance %.2e after %d sweeps",
                geom.label, result.energy, result.variance, result.sweeps)
    return result


def excited_states(geom: LatticeGeometry, p: ModelParams, cfg: Optional[DmrgConfig] = None,
                   k: int = 1, ground: Optional[DmrgResult] = None) -> List[DmrgResult]:
    """
    Ground state plus the k lowest excited states.

    Each new state is optimized against weight * sum |<psi_i|psi>|^2 over
    the states already found, starting from a seeded random MPS.

    Args:
        geom: Lattice geometry
        p: Couplings
        cfg: Sweep controls; penalty_weight defaults to 10 * max(|E0|, 1)
        k: Number of excited states
        ground: Precomputed ground state to reuse

    Returns:
        k + 1 results in order of increasing energy, index 0 the ground state

    Raises:
        DomainError: k < 1 or more states than the Hilbert space holds
        ConvergenceError: a sweep fails or a state overlaps a lower one
    """
    cfg = cfg if cfg is not None else DmrgConfig()
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k + 1 > 2 ** min(geom.num_sites, 30):
        raise DomainError(f"{k + 1} states requested on a {2 ** geom.num_sites}-dimensional space")
    mpo = hamiltonian_mpo(geom, p)
    ground = ground if ground is not None else ground_state(geom, p, cfg)
    weight = cfg.penalty_weight if cfg.penalty_weight is not None else 10.0 * max(abs(ground.energy), 1.0)
    rng = named_stream(cfg.seed, "excited")

    results = [ground]
    for level in range(1, k + 1):
        seed_state = random_mps(geom, min(cfg.chi_dmrg, 8), rng)
        seed_state = MpsState(seed_state.tensors, 0, cfg.chi_dmrg, cfg.svd_min, geom)
        penalties = [(r.state, weight) for r in results]
        result = _solve(seed_state, mpo, cfg, penalties)
        worst = max(abs(overlap(r.state, result.state)) for r in results)
        if worst > ORTHOGONALITY_LIMIT:
            raise ConvergenceError(
                f"excited state {level} overlaps a lower state by {worst:.2e}; "
                f"penalty weight {weight:g} is too small", result.trace)
        logger.info("excited state %d: E = %.12f (max overlap %.1e)", level, result.energy, worst)
        results.append(result)
    return check_ladder(results)


def check_ladder(results: Sequence[DmrgResult]) -> List[DmrgResult]:
    """
    Warn about a ladder that misses its orthogonality target or energy order.

    Returns:
        The results sorted by energy (stable, so an ordered ladder is unchanged)
    """
    for a in range(len(results)):
        for b in range(a + 1, len(results)):
            value = abs(overlap(results[a].state, results[b].state))
            if value > ORTHOGONALITY_TARGET:
                logger.warning("states %d and %d overlap by %.2e (target %.0e)",
                               a, b, value, ORTHOGONALITY_TARGET)
    energies = [r.energy for r in results]
    if any(later < earlier for earlier, later in zip(energies, energies[1:])):
        logger.warning("ladder energies out of order %s; sorting", ["%.10f" % e for e in energies])
        return sorted(results, key=lambda r: r.energy)
    return list(results)
