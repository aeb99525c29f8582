"""Real-time quench dynamics with the two-site time-dependent variational principle.

One step of dt is a left-to-right and a right-to-left half sweep of dt/2
each (second order). Two-site blocks go forward with exp(-i tau H_eff) and
the shared one-site centers go backward with exp(+i tau H_eff).
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from analysis.clusters import Snapshot
from physics.lattice import LatticeGeometry
from physics.model import Mpo, QuenchProtocol, hamiltonian_mpo
from tensornet.environments import MpoEnvironment, apply_one_site, apply_two_site
from tensornet.krylov import expm_krylov
from tensornet.mps import (DEFAULT_SVD_MIN, MpsState, canonicalize, expect_local_all, expect_mpo,
                           expect_ztot_moments, norm, overlap, pad_bonds, sample_snapshots,
                           split_matrix)
from utils.errors import DomainError, NumericalFault
from utils.rng import shot_streams


logger = logging.getLogger(__name__)

Sampler = Callable[[MpsState, int, int], List[Snapshot]]
ProgressCallback = Callable[[int, int], None]


@dataclass
class EvolutionConfig:
    """
    Truncation and stepping controls for TDVP.

    With pad_bonds the initial state is enlarged with zero-weight directions
    to min(pad_chi, chi_q, exact rank) per bond, and no bond is truncated
    below that size afterwards. svd_min therefore only prunes above the
    padded size. pad_chi = None pads to chi_q, which keeps small systems
    exact but holds every bond of a large lattice at chi_q from the first
    step; a smaller pad_chi lets svd_min work above that floor.
    """

    chi_q: int = 256
    svd_min: float = DEFAULT_SVD_MIN
    dt: float = 0.05
    observable_stride: int = 1
    pad_bonds: bool = True
    pad_chi: Optional[int] = None
    krylov_tol: float = 1e-12

    def __post_init__(self):
        if self.chi_q < 1:
            raise DomainError(f"chi_q must be >= 1, got {self.chi_q}")
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if self.observable_stride < 1:
            raise DomainError(f"observable_stride must be >= 1, got {self.observable_stride}")
        if self.svd_min < 0:
            raise DomainError(f"svd_min must be non-negative, got {self.svd_min}")
        if self.pad_chi is not None and self.pad_chi < 1:
            raise DomainError(f"pad_chi must be >= 1, got {self.pad_chi}")

    @property
    def pad_target(self) -> int:
        return self.chi_q if self.pad_chi is None else min(self.pad_chi, self.chi_q)


@dataclass
class ShotSchedule:
    """Times at which n_shots projective measurements are drawn."""

    times: Sequence[float]
    n_shots: int
    seed: int = 0

    def __post_init__(self):
        if self.n_shots < 1:
            raise DomainError(f"n_shots must be >= 1, got {self.n_shots}")


@dataclass
class TrajectoryRecord:
    """Observable series on a common time grid."""

    times: List[float] = field(default_factory=list)
    mz: List[float] = field(default_factory=list)
    ztot_var: List[float] = field(default_factory=list)
    p_ret: List[float] = field(default_factory=list)
    energy: List[float] = field(default_factory=list)
    max_bond: List[int] = field(default_factory=list)
    discarded_weight: List[float] = field(default_factory=list)
    norm: List[float] = field(default_factory=list)
    snapshots: Dict[float, List[Snapshot]] = field(default_factory=dict)
    final_state: Optional[MpsState] = None

    COLUMNS = ("time", "mz", "ztot_var", "p_ret", "energy", "max_bond", "discarded_weight")

    def rows(self) -> List[tuple]:
        return list(zip(self.times, self.mz, self.ztot_var, self.p_ret, self.energy,
                        self.max_bond, self.discarded_weight))

    def series(self, name: str) -> np.ndarray:
        if name not in self.COLUMNS:
            raise DomainError(f"unknown trajectory column {name!r}")
        return np.asarray(self.times if name == "time" else getattr(self, name), dtype=float)


def return_probability(psi0: MpsState, psit: MpsState) -> float:
    """|<psi0|psit>|^2, clipped at 0 from below."""
    return max(abs(overlap(psi0, psit)) ** 2, 0.0)


class TdvpEngine:
    """
    Stateful two-site TDVP integrator.

    The engine owns its copy of the state; read it through `state`.
    """

    def __init__(self, psi: MpsState, mpo: Mpo, cfg: EvolutionConfig):
        if psi.num_sites != mpo.num_sites:
            raise DomainError(f"state has {psi.num_sites} sites, MPO has {mpo.num_sites}")
        self.cfg = cfg
        self.mpo = mpo
        if cfg.pad_bonds and psi.num_sites > 1:
            psi = pad_bonds(psi, cfg.pad_target)
        self.psi = canonicalize(psi, 0)
        self.psi.chi_max, self.psi.svd_min = cfg.chi_q, cfg.svd_min
        self.env = MpoEnvironment(self.psi.tensors, mpo.tensors)
        self.discarded = 0.0
        self.time = 0.0

    @property
    def state(self) -> MpsState:
        return self.psi

    def _split(self, theta: np.ndarray, bond: int):
        dl, _, _, dr = theta.shape
        # padded bonds never shrink below the padding size
        floor = min(bond, self.cfg.pad_target) if self.cfg.pad_bonds else 1
        U, S, Vh, weight = split_matrix(theta.reshape(dl * 2, 2 * dr), self.cfg.chi_q,
                                        self.cfg.svd_min, min_keep=floor)
        self.discarded += weight
        return U, S, Vh

    def _two_site(self, i: int, tau: complex) -> np.ndarray:
        L, R = self.env.left[i], self.env.right[i + 1]
        W1, W2 = self.mpo.tensors[i], self.mpo.tensors[i + 1]
        theta = np.tensordot(self.psi.tensors[i], self.psi.tensors[i + 1], axes=(2, 0))
        shape = theta.shape
        return expm_krylov(lambda x: apply_two_site(L, W1, W2, R, x.reshape(shape)).reshape(-1),
                           theta, tau, self.cfg.krylov_tol)

    def _one_site(self, k: int, tau: complex) -> None:
        L, R, W = self.env.left[k], self.env.right[k], self.mpo.tensors[k]
        A = self.psi.tensors[k]
        shape = A.shape
        self.psi.tensors[k] = expm_krylov(
            lambda x: apply_one_site(L, W, R, x.reshape(shape)).reshape(-1), A, tau,
            self.cfg.krylov_tol)

    def _sweep_right(self, tau: complex) -> None:
        n = self.psi.num_sites
        tensors = self.psi.tensors
        for i in range(n - 1):
            bond = tensors[i].shape[2]
            theta = self._two_site(i, -1j * tau)
            dl, _, _, dr = theta.shape
            U, S, Vh = self._split(theta, bond)
            tensors[i] = U.reshape(dl, 2, len(S))
            tensors[i + 1] = (S[:, None] * Vh).reshape(len(S), 2, dr)
            self.env.update_left(i, tensors[i])
            if i < n - 2:
                self._one_site(i + 1, 1j * tau)
        self.psi.canonical_center = n - 1

    def _sweep_left(self, tau: complex) -> None:
        n = self.psi.num_sites
        tensors = self.psi.tensors
        for i in range(n - 2, -1, -1):
            bond = tensors[i].shape[2]
            theta = self._two_site(i, -1j * tau)
            dl, _, _, dr = theta.shape
            U, S, Vh = self._split(theta, bond)
            tensors[i] = (U * S).reshape(dl, 2, len(S))
            tensors[i + 1] = Vh.reshape(len(S), 2, dr)
            self.env.update_right(i + 1, tensors[i + 1])
            if i > 0:
                self._one_site(i, 1j * tau)
        self.psi.canonical_center = 0

    def step(self, dt: Optional[float] = None) -> None:
        """Advance the state by dt (defaults to the configured step)."""
        dt = self.cfg.dt if dt is None else dt
        if self.psi.num_sites == 1:
            vec = expm(-1j * dt * self.mpo.tensors[0][0, 0]) @ self.psi.tensors[0].reshape(2)
            self.psi.tensors[0] = vec.reshape(1, 2, 1)
        else:
            self._sweep_right(0.5 * dt)
            self._sweep_left(0.5 * dt)
        self.time += dt
        for k, t in enumerate(self.psi.tensors):
            if not np.all(np.isfinite(t)):
                raise NumericalFault(f"non-finite amplitudes at site {k}, t = {self.time:.6g}")


def _default_sampler(seed: int) -> Sampler:
    def sample(psi: MpsState, time_index: int, n_shots: int) -> List[Snapshot]:
        return sample_snapshots(psi, shot_streams(seed, time_index, n_shots))
    return sample


def _record(trajectory: TrajectoryRecord, psi0: MpsState, engine: TdvpEngine) -> None:
    psi = engine.state
    mz = float(np.mean(expect_local_all(psi, "Z")))
    first, second = expect_ztot_moments(psi)
    trajectory.times.append(engine.time)
    trajectory.mz.append(mz)
    trajectory.ztot_var.append(max(second - first ** 2, 0.0))
    trajectory.p_ret.append(return_probability(psi0, psi))
    trajectory.energy.append(expect_mpo(psi, engine.mpo))
    trajectory.max_bond.append(psi.max_bond)
    trajectory.discarded_weight.append(engine.discarded)
    trajectory.norm.append(norm(psi))


def evolve_quench(psi0: MpsState, geom: LatticeGeometry, protocol: QuenchProtocol,
                  cfg: Optional[EvolutionConfig] = None,
                  shot_schedule: Optional[ShotSchedule] = None,
                  sampler: Optional[Sampler] = None,
                  on_progress: Optional[ProgressCallback] = None) -> TrajectoryRecord:
    """
    Evolve psi0 under the post-quench Hamiltonian and record observables.

    Args:
        psi0: Normalized initial state
        geom: Lattice geometry
        protocol: Quench parameters; protocol.post drives the evolution
        cfg: TDVP controls (dt and stride default to the protocol's)
        shot_schedule: Optional measurement times and shot count
        sampler: Replacement for the sequential in-process sampler, called as
            sampler(state, time_index, n_shots)
        on_progress: Called with (step, n_steps) after every step

    Returns:
        TrajectoryRecord with observables every observable_stride steps,
        always including t = 0 and the final time
    """
    if psi0.num_sites != geom.num_sites:
        raise DomainError(f"state has {psi0.num_sites} sites, geometry {geom.label} has {geom.num_sites}")
    cfg = cfg if cfg is not None else EvolutionConfig(dt=protocol.dt,
                                                      observable_stride=protocol.observable_stride)
    n_steps = int(round(protocol.t_max / cfg.dt))
    shot_steps: Dict[int, float] = {}
    if shot_schedule is not None:
        sampler = sampler if sampler is not None else _default_sampler(shot_schedule.seed)
        for t in shot_schedule.times:
            step = int(round(t / cfg.dt))
            if not 0 <= step <= n_steps:
                raise DomainError(f"shot time {t} outside [0, {protocol.t_max}]")
            shot_steps[step] = step * cfg.dt

    psi0 = canonicalize(psi0, 0)
    engine = TdvpEngine(psi0, hamiltonian_mpo(geom, protocol.post), cfg)
    trajectory = TrajectoryRecord()
    logger.info("TDVP %s: hq=%g, %d steps of dt=%g, chi_q=%d", geom.label, protocol.post.h,
                n_steps, cfg.dt, cfg.chi_q)

    for step in range(n_steps + 1):
        if step > 0:
            engine.step()
            engine.time = step * cfg.dt
            if on_progress:
                on_progress(step, n_steps)
        if step % cfg.observable_stride == 0 or step == n_steps:
            _record(trajectory, psi0, engine)
            logger.debug("t=%.4f mz=%.6f p_ret=%.6e bond=%d discarded=%.2e",
                         engine.time, trajectory.mz[-1], trajectory.p_ret[-1],
                         trajectory.max_bond[-1], engine.discarded)
        if step in shot_steps:
            trajectory.snapshots[shot_steps[step]] = sampler(engine.state, step, shot_schedule.n_shots)

    trajectory.final_state = engine.state.copy()
    return trajectory
