"""MPO environment contractions shared by the DMRG and TDVP sweeps.

Index conventions:
    MPS tensor   A[left, phys, right]
    MPO tensor   W[left, right, out, in]
    left env     L[bra, mpo, ket]   (sites left of the active window)
    right env    R[bra, mpo, ket]   (sites right of the active window)
    overlap env  O[ref, ket]        (reference state <ref| against |ket>)
"""

from typing import List, Optional, Sequence

import numpy as np


def boundary() -> np.ndarray:
    return np.ones((1, 1, 1), dtype=complex)


def extend_left(L: np.ndarray, A: np.ndarray, W: np.ndarray) -> np.ndarray:
    x = np.tensordot(L, A, axes=(2, 0))                    # (a, w, t, d)
    x = np.tensordot(x, W, axes=([1, 2], [0, 3]))           # (a, d, x, s)
    x = np.tensordot(A.conj(), x, axes=([0, 1], [0, 3]))    # (c, d, x)
    return x.transpose(0, 2, 1)


def extend_right(R: np.ndarray, B: np.ndarray, W: np.ndarray) -> np.ndarray:
    x = np.tensordot(B, R, axes=(2, 2))                     # (b, t, c, x)
    x = np.tensordot(x, W, axes=([3, 1], [1, 3]))           # (b, c, w, s)
    x = np.tensordot(B.conj(), x, axes=([1, 2], [3, 1]))    # (a, b, w)
    return x.transpose(0, 2, 1)


def apply_one_site(L: np.ndarray, W: np.ndarray, R: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Effective one-site Hamiltonian acting on A[b, t, d]."""
    x = np.tensordot(L, A, axes=(2, 0))                     # (a, w, t, d)
    x = np.tensordot(x, W, axes=([1, 2], [0, 3]))           # (a, d, x, s)
    x = np.tensordot(x, R, axes=([2, 1], [1, 2]))           # (a, s, c)
    return x


def apply_two_site(L: np.ndarray, W1: np.ndarray, W2: np.ndarray, R: np.ndarray,
                   theta: np.ndarray) -> np.ndarray:
    """Effective two-site Hamiltonian acting on theta[b, t, v, d]."""
    x = np.tensordot(L, theta, axes=(2, 0))                 # (a, w, t, v, d)
    x = np.tensordot(x, W1, axes=([1, 2], [0, 3]))          # (a, v, d, x, s)
    x = np.tensordot(x, W2, axes=([3, 1], [0, 3]))          # (a, d, s, y, u)
    x = np.tensordot(x, R, axes=([3, 1], [1, 2]))           # (a, s, u, c)
    return x


def extend_overlap_left(O: np.ndarray, ref: np.ndarray, A: np.ndarray) -> np.ndarray:
    x = np.tensordot(O, A, axes=(1, 0))                     # (p, s, c)
    return np.tensordot(ref.conj(), x, axes=([0, 1], [0, 1]))


def extend_overlap_right(O: np.ndarray, ref: np.ndarray, B: np.ndarray) -> np.ndarray:
    x = np.tensordot(B, O, axes=(2, 1))                     # (b, s, q)
    return np.tensordot(ref.conj(), x, axes=([1, 2], [1, 2]))


def projected_reference(OL: np.ndarray, ref1: np.ndarray, ref2: np.ndarray,
                        OR: np.ndarray) -> np.ndarray:
    """
    Reference state seen through the two-site window.

    Returns phi with <ref|psi> = vdot(phi, theta) for the current window.
    """
    x = np.tensordot(OL.conj(), ref1, axes=(0, 0))          # (b, t, r)
    x = np.tensordot(x, ref2, axes=(2, 0))                  # (b, t, v, q)
    return np.tensordot(x, OR.conj(), axes=(3, 0))          # (b, t, v, d)


class MpoEnvironment:
    """
    Cached left and right environments of <psi|H|psi>.

    left[k] covers sites 0..k-1 and right[k] covers sites k+1..N-1, so a
    window (i, i+1) uses left[i] and right[i+1].
    """

    def __init__(self, tensors: Sequence[np.ndarray], mpo: Sequence[np.ndarray]):
        self.mpo = list(mpo)
        n = len(self.mpo)
        self.left: List[Optional[np.ndarray]] = [None] * n
        self.right: List[Optional[np.ndarray]] = [None] * n
        self.left[0] = boundary()
        self.right[n - 1] = boundary()
        for k in range(n - 1, 0, -1):
            self.right[k - 1] = extend_right(self.right[k], tensors[k], self.mpo[k])

    def update_left(self, k: int, A: np.ndarray) -> None:
        """Absorb the left-isometry at site k into left[k + 1]."""
        self.left[k + 1] = extend_left(self.left[k], A, self.mpo[k])

    def update_right(self, k: int, B: np.ndarray) -> None:
        """Absorb the right-isometry at site k into right[k - 1]."""
        self.right[k - 1] = extend_right(self.right[k], B, self.mpo[k])


class OverlapEnvironment:
    """Cached overlap environments of <ref|psi> for orthogonality penalties."""

    def __init__(self, reference: Sequence[np.ndarray], tensors: Sequence[np.ndarray]):
        self.reference = list(reference)
        n = len(self.reference)
        self.left: List[Optional[np.ndarray]] = [None] * n
        self.right: List[Optional[np.ndarray]] = [None] * n
        self.left[0] = np.ones((1, 1), dtype=complex)
        self.right[n - 1] = np.ones((1, 1), dtype=complex)
        for k in range(n - 1, 0, -1):
            self.right[k - 1] = extend_overlap_right(self.right[k], self.reference[k], tensors[k])

    def update_left(self, k: int, A: np.ndarray) -> None:
        self.left[k + 1] = extend_overlap_left(self.left[k], self.reference[k], A)

    def update_right(self, k: int, B: np.ndarray) -> None:
        self.right[k - 1] = extend_overlap_right(self.right[k], self.reference[k], B)

    def window(self, i: int) -> np.ndarray:
        return projected_reference(self.left[i], self.reference[i], self.reference[i + 1],
                                   self.right[i + 1])
