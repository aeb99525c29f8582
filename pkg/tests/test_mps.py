import math

import numpy as np
import pytest

from physics.exact import (dense_entropy, dense_from_mps, dense_hamiltonian, dense_magnetization,
                           dense_product_state, dense_ztot_moments)
from physics.lattice import LatticeGeometry
from physics.model import ModelParams, hamiltonian_mpo
from tensornet.mps import (MpsState, canonicalize, expect_local, expect_local_all, expect_mpo,
                           expect_mpo_squared, expect_ztot_moments, half_chain_entropy,
                           is_canonical, norm, overlap, pad_bonds, product_state, random_mps,
                           random_mps_with_entropy, schmidt_values, split_matrix, truncate,
                           truncation_rank)
from utils.errors import DomainError


def test_product_state_matches_dense():
    geom = LatticeGeometry(2, 2)
    psi = product_state(geom, ["up", "down", 1, 0])
    dense = dense_from_mps(psi)
    assert np.allclose(dense.amplitudes, dense_product_state(geom, ["up", "down", "up", "down"]).amplitudes)
    assert psi.bond_dims == [1, 1, 1]


def test_product_state_length_checked():
    with pytest.raises(DomainError):
        product_state(LatticeGeometry(2, 2), ["up", "down"])


def test_mps_shape_validation():
    with pytest.raises(DomainError):
        MpsState([np.ones((1, 2, 2)), np.ones((3, 2, 1))])
    with pytest.raises(DomainError):
        MpsState([np.ones((1, 3, 1))])
    with pytest.raises(DomainError):
        MpsState([np.ones((1, 2, 1))] * 3, geometry=LatticeGeometry(2, 2))


def test_canonicalize_keeps_state(rng):
    psi = random_mps(LatticeGeometry(1, 7), 6, rng)
    before = dense_from_mps(psi).amplitudes
    for center in (0, 3, 6):
        moved = canonicalize(psi, center)
        assert is_canonical(moved)
        assert moved.canonical_center == center
        assert np.allclose(dense_from_mps(moved).amplitudes, before)
    assert norm(psi) == pytest.approx(1.0)


def test_truncation_rank():
    S = np.array([0.8, 0.5, 0.3, 1e-12])
    keep, discarded = truncation_rank(S, chi_max=10, svd_min=1e-10)
    assert keep == 3
    assert discarded == pytest.approx(1e-24 / np.sum(S ** 2))
    keep, discarded = truncation_rank(S, chi_max=2, svd_min=0.0)
    assert keep == 2
    assert discarded == pytest.approx(0.09 / np.sum(S ** 2))
    keep, _ = truncation_rank(S, chi_max=10, svd_min=1e-10, min_keep=4)
    assert keep == 4


def test_split_matrix_preserves_norm(rng):
    matrix = rng.normal(size=(8, 8))
    U, S, Vh, discarded = split_matrix(matrix, chi_max=3, svd_min=0.0)
    assert len(S) == 3
    assert np.linalg.norm(S) == pytest.approx(np.linalg.norm(matrix))
    assert 0.0 < discarded < 1.0


def test_truncate_reports_discarded_weight(rng):
    psi = random_mps(LatticeGeometry(1, 8), 8, rng)
    small, report = truncate(psi, chi_max=2)
    assert small.max_bond <= 2
    assert len(report.discarded) == 7
    assert report.total > 0.0
    assert norm(small) == pytest.approx(1.0)
    exact, report = truncate(psi, chi_max=64, svd_min=0.0)
    assert report.total == pytest.approx(0.0, abs=1e-20)
    assert abs(overlap(exact, psi)) == pytest.approx(1.0)


def test_pad_bonds_keeps_state():
    geom = LatticeGeometry(2, 3)
    psi = product_state(geom, "up")
    padded = pad_bonds(psi, 4)
    assert padded.bond_dims == [2, 4, 4, 4, 2]
    assert is_canonical(padded)
    assert abs(overlap(psi, padded)) == pytest.approx(1.0)


def test_energy_and_variance_of_product_state():
    geom = LatticeGeometry(2, 2)
    mpo = hamiltonian_mpo(geom, ModelParams(1.0, 1.0, 0.1))
    psi = product_state(geom, "down")
    assert expect_mpo(psi, mpo) == pytest.approx(-3.6)
    # only the transverse field fluctuates: variance N g^2
    assert expect_mpo_squared(psi, mpo) - (-3.6) ** 2 == pytest.approx(4.0)


def test_local_expectations_match_dense(rng):
    geom = LatticeGeometry(2, 3)
    psi = random_mps(geom, 4, rng)
    dense = dense_from_mps(psi)
    values = expect_local_all(psi, "Z")
    assert np.mean(values) == pytest.approx(dense_magnetization(dense))
    assert values[2] == pytest.approx(expect_local(psi, "Z", 2))
    assert expect_ztot_moments(psi) == pytest.approx(dense_ztot_moments(dense))
    H = dense_hamiltonian(geom, ModelParams(1.0, 0.5, 0.2))
    energy = np.vdot(dense.amplitudes, H @ dense.amplitudes).real
    assert expect_mpo(psi, hamiltonian_mpo(geom, ModelParams(1.0, 0.5, 0.2))) == pytest.approx(energy)


def test_expect_local_rejects_bad_input():
    psi = product_state(LatticeGeometry(1, 3), "up")
    with pytest.raises(DomainError):
        expect_local(psi, "Q", 0)
    with pytest.raises(DomainError):
        expect_local(psi, "Z", 3)


def test_entropy_matches_dense(rng):
    psi = random_mps(LatticeGeometry(1, 8), 8, rng)
    for cut in (1, 4, 7):
        assert half_chain_entropy(psi, cut) == pytest.approx(dense_entropy(dense_from_mps(psi), cut))
    S = schmidt_values(psi, 4)
    assert np.sum(S ** 2) == pytest.approx(1.0)
    with pytest.raises(DomainError):
        schmidt_values(psi, 0)


@pytest.mark.parametrize("target", [0.0, 0.7, 1.5])
def test_random_mps_with_entropy(target):
    geom = LatticeGeometry(2, 4)
    psi = random_mps_with_entropy(geom, 16, target, tol=0.05, rng=np.random.default_rng(11))
    assert half_chain_entropy(psi) == pytest.approx(target, abs=0.05)
    assert norm(psi) == pytest.approx(1.0)


def test_random_mps_with_entropy_limits():
    geom = LatticeGeometry(2, 4)
    with pytest.raises(DomainError):
        random_mps_with_entropy(geom, 4, math.log(4) + 0.5)
    with pytest.raises(DomainError):
        random_mps_with_entropy(geom, 4, -0.1)


def test_truncate_is_idempotent(rng):
    psi = random_mps(LatticeGeometry(1, 8), 8, rng)
    once, _ = truncate(psi, chi_max=3, svd_min=0.0)
    twice, report = truncate(once, chi_max=3, svd_min=0.0)
    assert twice.bond_dims == once.bond_dims
    assert abs(overlap(once, twice)) == pytest.approx(1.0)
    assert report.total == pytest.approx(0.0, abs=1e-12)


def test_bell_pair_truncation():
    A = np.zeros((1, 2, 2))
    A[0, 0, 0] = A[0, 1, 1] = 1.0
    B = np.zeros((2, 2, 1))
    B[0, 0, 0] = B[1, 1, 0] = 1.0 / math.sqrt(2.0)
    bell = MpsState([A, B])
    assert half_chain_entropy(bell) == pytest.approx(math.log(2.0))
    product, report = truncate(bell, chi_max=1, svd_min=0.0)
    assert report.discarded == pytest.approx([0.5])
    assert product.bond_dims == [1]
    assert half_chain_entropy(product) == pytest.approx(0.0, abs=1e-12)


def test_infidelity_follows_discarded_weights(rng):
    psi = random_mps(LatticeGeometry(1, 10), 16, rng)
    small, report = truncate(psi, chi_max=8, svd_min=0.0)
    infidelity = 1.0 - abs(overlap(small, psi)) ** 2
    assert infidelity == pytest.approx(1.0 - np.prod([1.0 - e for e in report.discarded]), abs=1e-10)
    assert infidelity <= report.total + 1e-12
    assert infidelity >= max(report.discarded) - 1e-12


def test_entropy_is_gauge_invariant(rng):
    psi = random_mps(LatticeGeometry(1, 6), 4, rng)
    k = 2
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)) + 4.0 * np.eye(4)
    tensors = [t.copy() for t in psi.tensors]
    tensors[k] = np.tensordot(tensors[k], G, axes=(2, 0))
    tensors[k + 1] = np.tensordot(np.linalg.inv(G), tensors[k + 1], axes=(1, 0))
    gauged = MpsState(tensors, geometry=psi.geometry)
    for cut in range(1, 6):
        assert half_chain_entropy(gauged, cut) == pytest.approx(half_chain_entropy(psi, cut))


def test_overlap_is_hermitian(rng):
    geom = LatticeGeometry(2, 3)
    a = random_mps(geom, 4, rng)
    b = random_mps(geom, 4, rng)
    assert overlap(a, b) == pytest.approx(np.conj(overlap(b, a)))
