import math

import numpy as np
import pytest

from analysis.observables import first_passage_time, mean_field_return_probability
from physics.exact import (dense_evolve, dense_from_mps, dense_hamiltonian,
                           dense_magnetization, dense_product_state, dense_return_probability)
from physics.lattice import LatticeGeometry
from physics.model import ModelParams, QuenchProtocol, hamiltonian_mpo
from tensornet.evolve import EvolutionConfig, ShotSchedule, TdvpEngine, evolve_quench
from tensornet.groundstate import DmrgConfig, ground_state
from tensornet.mps import product_state
from utils.errors import DomainError


def _dense_series(psi0, geom, post, times):
    H = dense_hamiltonian(geom, post)
    states = dense_evolve(psi0, H, times)
    return (np.array([dense_magnetization(s) for s in states]),
            np.array([dense_return_probability(psi0, s) for s in states]))


def test_free_spins_follow_analytic_law():
    geom = LatticeGeometry(2, 2)
    protocol = QuenchProtocol.from_fields(0.0, 1.0, 0.0, 0.0, 2.0, 0.02)
    record = evolve_quench(product_state(geom, "down"), geom, protocol,
                           EvolutionConfig(chi_q=16, dt=0.02, observable_stride=10))
    t = np.array(record.times)
    assert np.allclose(record.p_ret, np.cos(t) ** 8, atol=1e-8)
    assert np.allclose(record.mz, -np.cos(2 * t), atol=1e-8)


def test_grid_always_contains_endpoints():
    geom = LatticeGeometry(1, 3)
    protocol = QuenchProtocol.from_fields(1.0, 1.0, 0.1, -0.2, 0.35, 0.05)
    record = evolve_quench(product_state(geom, "up"), geom, protocol,
                           EvolutionConfig(chi_q=8, dt=0.05, observable_stride=3))
    assert record.times[0] == 0.0
    assert record.times[-1] == pytest.approx(0.35)
    assert record.times == pytest.approx([0.0, 0.15, 0.30, 0.35])
    assert len(record.rows()) == 4
    assert record.p_ret[0] == pytest.approx(1.0)


def test_single_site_evolution():
    geom = LatticeGeometry(1, 1)
    protocol = QuenchProtocol.from_fields(1.0, 1.0, 0.0, 0.0, 1.0, 0.1)
    record = evolve_quench(product_state(geom, "down"), geom, protocol)
    assert record.p_ret[-1] == pytest.approx(math.cos(1.0) ** 2)


def test_short_quench_matches_dense(square3, quench_params):
    pre, post = quench_params
    psi0 = ground_state(square3, pre, DmrgConfig(chi_dmrg=64, svd_min=0.0)).state
    protocol = QuenchProtocol(pre, post, 2.0, 0.02)
    record = evolve_quench(psi0, square3, protocol,
                           EvolutionConfig(chi_q=64, dt=0.02, observable_stride=5))
    mz, p_ret = _dense_series(dense_from_mps(psi0), square3, post, record.times)
    assert np.max(np.abs(np.array(record.mz) - mz)) <= 1e-3
    assert np.max(np.abs(np.array(record.p_ret) - p_ret)) <= 1e-3


@pytest.mark.slow
def test_full_quench_matches_dense_and_conserves(square3, quench_params):
    pre, post = quench_params
    psi0 = ground_state(square3, pre, DmrgConfig(chi_dmrg=64, svd_min=0.0)).state
    protocol = QuenchProtocol(pre, post, 10.0, 0.02)
    record = evolve_quench(psi0, square3, protocol,
                           EvolutionConfig(chi_q=64, dt=0.02, observable_stride=5))
    mz, p_ret = _dense_series(dense_from_mps(psi0), square3, post, record.times)
    assert np.max(np.abs(np.array(record.mz) - mz)) <= 1e-3
    assert np.max(np.abs(np.array(record.p_ret) - p_ret)) <= 1e-3

    clean = np.array(record.discarded_weight) < 1e-10
    energy = np.array(record.energy)
    assert np.max(np.abs(np.array(record.norm)[clean] - 1.0)) <= 1e-9
    assert np.max(np.abs(energy[clean] - energy[0]) / abs(energy[0])) <= 1e-6


def test_energy_and_norm_conserved_without_truncation(quench_params):
    geom = LatticeGeometry(2, 3)
    pre, post = quench_params
    protocol = QuenchProtocol(pre, post, 1.0, 0.05)
    record = evolve_quench(product_state(geom, "up"), geom, protocol, EvolutionConfig(chi_q=64))
    assert record.discarded_weight[-1] < 1e-10
    assert np.allclose(record.norm, 1.0, atol=1e-9)
    assert np.allclose(record.energy, record.energy[0], rtol=1e-6)


def test_mean_field_short_time_law():
    """Polarized 4x4 state: P_ret follows exp(-N g^2 t^2) at short times."""
    geom = LatticeGeometry(4, 4)
    post = ModelParams(1.0, 1.0, -0.2)
    psi0 = dense_product_state(geom, "up")
    times = np.linspace(0.01, 0.15, 15)
    states = dense_evolve(psi0, dense_hamiltonian(geom, post), times)
    p_ret = np.array([dense_return_probability(psi0, s) for s in states])
    law = mean_field_return_probability(16, 1.0, times)
    assert np.max(np.abs(p_ret / law - 1.0)) <= 0.05
    # the quadratic coefficient is exactly N g^2
    assert -math.log(p_ret[4]) / times[4] ** 2 == pytest.approx(16.0, rel=0.01)


@pytest.mark.slow
def test_mean_field_law_on_mps():
    geom = LatticeGeometry(4, 4)
    protocol = QuenchProtocol.from_fields(1.0, 1.0, 0.1, -0.2, 0.15, 0.01)
    record = evolve_quench(product_state(geom, "up"), geom, protocol,
                           EvolutionConfig(chi_q=32, dt=0.01))
    law = mean_field_return_probability(16, 1.0, np.array(record.times))
    assert np.max(np.abs(np.array(record.p_ret) / law - 1.0)) <= 0.05


@pytest.mark.slow
def test_dressed_vacuum_survives_longer():
    geom = LatticeGeometry(4, 4)
    pre, post = ModelParams(1.0, 1.0, 0.1), ModelParams(1.0, 1.0, -0.2)
    protocol = QuenchProtocol(pre, post, 3.0, 0.05)
    cfg = EvolutionConfig(chi_q=64, dt=0.05)
    fv = ground_state(geom, pre, DmrgConfig(chi_dmrg=64)).state

    def fpt(psi):
        record = evolve_quench(psi, geom, protocol, cfg)
        return first_passage_time(list(zip(record.times, record.p_ret))).sort_key()

    assert fpt(fv) > fpt(product_state(geom, "up"))


def test_snapshots_are_taken_on_schedule():
    geom = LatticeGeometry(2, 2)
    protocol = QuenchProtocol.from_fields(1.0, 1.0, 0.1, -0.2, 0.5, 0.05)
    schedule = ShotSchedule([0.0, 0.25], 20, seed=3)
    record = evolve_quench(product_state(geom, "up"), geom, protocol,
                           EvolutionConfig(chi_q=4), schedule)
    assert sorted(record.snapshots) == pytest.approx([0.0, 0.25])
    assert all(s.up_count == 4 for s in record.snapshots[0.0])
    assert len(record.snapshots[min(record.snapshots, key=lambda t: abs(t - 0.25))]) == 20
    with pytest.raises(DomainError):
        evolve_quench(product_state(geom, "up"), geom, protocol, EvolutionConfig(chi_q=4),
                      ShotSchedule([0.7], 5))


def test_engine_does_not_touch_input(quench_params):
    geom = LatticeGeometry(1, 4)
    _, post = quench_params
    psi = product_state(geom, "up")
    before = [t.copy() for t in psi.tensors]
    engine = TdvpEngine(psi, hamiltonian_mpo(geom, post), EvolutionConfig(chi_q=8))
    engine.step()
    assert all(np.array_equal(a, b) for a, b in zip(before, psi.tensors))
    assert engine.time == pytest.approx(0.05)


def test_halving_dt_converges_to_dense(square3, quench_params):
    pre, post = quench_params
    psi0 = product_state(square3, "up")
    coarse = evolve_quench(psi0, square3, QuenchProtocol(pre, post, 1.0, 0.05),
                           EvolutionConfig(chi_q=32, dt=0.05, observable_stride=2))
    fine = evolve_quench(psi0, square3, QuenchProtocol(pre, post, 1.0, 0.025),
                         EvolutionConfig(chi_q=32, dt=0.025, observable_stride=4))
    assert fine.times == pytest.approx(coarse.times)
    mz, _ = _dense_series(dense_from_mps(psi0), square3, post, coarse.times)
    coarse_error = np.max(np.abs(np.array(coarse.mz) - mz))
    fine_error = np.max(np.abs(np.array(fine.mz) - mz))
    assert fine_error <= coarse_error + 1e-8
    assert np.max(np.abs(np.array(fine.mz) - np.array(coarse.mz))) <= 1e-4


def test_pad_chi_sets_the_bond_floor(quench_params):
    geom = LatticeGeometry(2, 3)
    _, post = quench_params
    mpo = hamiltonian_mpo(geom, post)
    psi = product_state(geom, "up")
    full = TdvpEngine(psi, mpo, EvolutionConfig(chi_q=16, dt=0.01, svd_min=0.3))
    capped = TdvpEngine(psi, mpo, EvolutionConfig(chi_q=16, dt=0.01, svd_min=0.3, pad_chi=2))
    assert full.state.bond_dims == [2, 4, 8, 4, 2]
    assert capped.state.bond_dims == [2] * 5
    for _ in range(5):
        full.step()
        capped.step()
    assert full.state.bond_dims == [2, 4, 8, 4, 2]
    assert capped.state.max_bond == 2
    with pytest.raises(DomainError):
        EvolutionConfig(pad_chi=0)
