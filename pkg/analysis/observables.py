"""Scalar observables of quench trajectories and first-passage times."""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from physics.exact import DenseState, dense_magnetization, dense_ztot_moments
from tensornet.mps import MpsState, expect_local_all, expect_ztot_moments
from utils.errors import DomainError


DEFAULT_THRESHOLD = math.exp(-4.0)

State = Union[MpsState, DenseState]


def magnetization(psi: State) -> float:
    """Site-averaged <Z>, normalized by the total site count."""
    if isinstance(psi, DenseState):
        return dense_magnetization(psi)
    return float(np.mean(expect_local_all(psi, "Z")))


def ztot_fluctuation(psi: State) -> float:
    """<(S^z_tot)^2> - <S^z_tot>^2 in Pauli units, clipped at zero."""
    first, second = dense_ztot_moments(psi) if isinstance(psi, DenseState) else expect_ztot_moments(psi)
    return max(second - first ** 2, 0.0)


def qfi_proxy(psi: State) -> float:
    """Pure-state quantum Fisher information for the generator S^z_tot: 4 * variance."""
    return 4.0 * ztot_fluctuation(psi)


def mean_field_return_probability(n_sites: int, g: float, t: Union[float, np.ndarray]):
    """
    Short-time return probability of the fully polarized product state.

    With Pauli operators the initial energy variance is N g^2, so
    P_ret(t) ~ exp(-N g^2 t^2); with spin-1/2 operators the same law reads
    exp(-N g^2 t^2 / 4).
    """
    t = np.asarray(t, dtype=float)
    value = np.exp(-n_sites * g * g * t * t)
    return float(value) if value.ndim == 0 else value


@dataclass(frozen=True)
class FptResult:
    """First time the return probability falls to the threshold."""

    h_q: Optional[float]
    t_fpt: Optional[float]
    threshold: float
    geometry: str = ""

    @property
    def reached(self) -> bool:
        return self.t_fpt is not None

    def sort_key(self) -> float:
        return self.t_fpt if self.t_fpt is not None else math.inf


def first_passage_time(series: Sequence[Tuple[float, float]], threshold: float = DEFAULT_THRESHOLD,
                       h_q: Optional[float] = None, geometry: str = "") -> FptResult:
    """
    First passage of p_ret below a threshold.

    The crossing between the bracketing grid points is found by linear
    interpolation in (t, ln p_ret), which is exact for exponential decay.

    Args:
        series: (t, p_ret) pairs in increasing t
        threshold: Level in (0, 1]
        h_q: Post-quench field, carried into the result
        geometry: Geometry label, carried into the result

    Returns:
        FptResult with t_fpt None when the series never reaches the threshold

    Raises:
        DomainError: empty or unsorted series, or a threshold outside (0, 1]
    """
    if not 0 < threshold <= 1:
        raise DomainError(f"threshold must lie in (0, 1], got {threshold}")
    data = np.asarray(series, dtype=float)
    if data.size == 0:
        raise DomainError("empty return-probability series")
    if data.ndim != 2 or data.shape[1] != 2:
        raise DomainError(f"series must be (t, p_ret) pairs, got shape {data.shape}")
    times, probs = data[:, 0], data[:, 1]
    if np.any(np.diff(times) <= 0):
        raise DomainError("series times must be strictly increasing")

    below = np.flatnonzero(probs <= threshold)
    if below.size == 0:
        return FptResult(h_q, None, threshold, geometry)
    k = int(below[0])
    if k == 0:
        return FptResult(h_q, float(times[0]), threshold, geometry)
    t0, t1 = times[k - 1], times[k]
    p0, p1 = probs[k - 1], probs[k]
    if p1 <= 0.0:
        # log interpolation undefined; fall back to linear
        t_fpt = t0 + (p0 - threshold) / (p0 - p1) * (t1 - t0)
    else:
        l0, l1, lt = math.log(p0), math.log(p1), math.log(threshold)
        t_fpt = t0 if l0 == l1 else t0 + (l0 - lt) / (l0 - l1) * (t1 - t0)
    return FptResult(h_q, float(t_fpt), threshold, geometry)
