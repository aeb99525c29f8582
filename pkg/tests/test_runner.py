import json
from pathlib import Path

import pytest

from experiment import storage
from experiment.runner import RunState, Runner, artifact_hashes, prepare_state, run_experiment
from physics.lattice import LatticeGeometry
from tensornet.mps import half_chain_entropy, norm
from utils.config import Config, InitialStateSpec
from utils.errors import DomainError, StageError, exit_code_for


def test_run_writes_every_artifact(tiny_config):
    states = []
    runner = Runner(tiny_config)
    runner.on_state_changed = states.append
    manifest = runner.run()
    out = runner.output_dir
    assert states == [RunState.PREPARING, RunState.EVOLVING, RunState.ANALYZING, RunState.DONE]
    assert (out / "config.json").exists() and (out / "manifest.json").exists()
    assert "trajectory.csv" in manifest.artifacts
    assert "initial_state.fvq" in manifest.artifacts
    assert "snapshots/t0000.2000.txt" in manifest.artifacts
    assert "clusters/t0000.4000/p_smax.csv" in manifest.artifacts
    assert "clusters/pmax_heatmap.csv" in manifest.artifacts
    assert manifest.seed == 7
    assert manifest.diagnostics["max_norm_drift"] < 1e-9
    written = json.loads((out / "manifest.json").read_text())
    assert written["config_hash"] == tiny_config.config_hash()
    assert storage.table_seed(str(out / "trajectory.csv")) == 7
    assert storage.table_seed(str(out / "clusters" / "t0000.4000" / "p_smax.csv")) == 7
    assert storage.table_seed(str(out / "clusters" / "pmax_heatmap.csv")) == 7


def test_identical_runs_are_byte_identical(tiny_config, tmp_path):
    first = run_experiment(tiny_config, str(tmp_path / "a"))
    second = run_experiment(tiny_config, str(tmp_path / "b"))
    assert artifact_hashes(first) == artifact_hashes(second)
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() == (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_snapshot_worker_count_does_not_change_outputs(tiny_config, tmp_path):
    first = run_experiment(tiny_config, str(tmp_path / "a"))
    tiny_config.set("sampling.workers", 1)
    second = run_experiment(tiny_config, str(tmp_path / "b"))
    assert first.artifacts["snapshots/t0000.4000.txt"] == second.artifacts["snapshots/t0000.4000.txt"]


def test_images_are_rendered(tiny_config, tmp_path):
    tiny_config.set("sampling.render_images", 2)
    manifest = run_experiment(tiny_config, str(tmp_path / "img"))
    pngs = [name for name in manifest.artifacts if name.endswith(".png")]
    assert len(pngs) == 4


def test_failed_stage_keeps_manifest(tiny_config, tmp_path):
    tiny_config.set("initial_state.state_file", str(tmp_path / "missing.fvq"))
    runner = Runner(tiny_config, str(tmp_path / "fail"))
    with pytest.raises(StageError) as info:
        runner.run()
    assert info.value.stage == "prepare"
    assert runner.state == RunState.FAILED
    manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
    assert manifest["diagnostics"]["failed_stage"] == "prepare"
    assert exit_code_for(info.value) == 1


def test_run_from_a_prepared_state(tiny_config, tmp_path):
    psi, _ = prepare_state(LatticeGeometry(2, 2), tiny_config)
    states = []
    runner = Runner(tiny_config, str(tmp_path / "evolved"))
    runner.on_state_changed = states.append
    manifest = runner.run(psi, {"source": "memory"}, analyze=False)
    assert states == [RunState.EVOLVING, RunState.DONE]
    assert manifest.initial_state == {"source": "memory"}
    assert "snapshots/t0000.4000.txt" in manifest.artifacts
    assert not (tmp_path / "evolved" / "clusters").exists()
    with pytest.raises(DomainError):
        Runner(tiny_config, str(tmp_path / "other")).run(prepare_state(LatticeGeometry(1, 3), tiny_config)[0])


def test_state_file_is_reused(tiny_config, tmp_path):
    geom = LatticeGeometry(2, 2)
    psi, info = prepare_state(geom, tiny_config, InitialStateSpec(kind="fv_ground"))
    path = storage.save_state(str(tmp_path / "fv.fvq"), psi, info)
    reused, reused_info = prepare_state(geom, tiny_config, InitialStateSpec(state_file=path))
    assert reused_info["meta"]["energy"] == pytest.approx(info["energy"])
    with pytest.raises(DomainError):
        prepare_state(LatticeGeometry(1, 4), tiny_config, InitialStateSpec(state_file=path))


def test_initial_state_families():
    config = Config.from_dict({"dmrg": {"chi_dmrg": 16}})
    geom = LatticeGeometry(2, 3)
    product, info = prepare_state(geom, config, InitialStateSpec(kind="product_fv"))
    assert info["polarization"] == "up" and product.max_bond == 1
    excited, info = prepare_state(geom, config, InitialStateSpec(kind="excited", k=1))
    assert info["energy"] > info["ladder"][0]
    matched, info = prepare_state(geom, config, InitialStateSpec(kind="random_entropy", chi=8))
    assert info["entropy"] == pytest.approx(info["target_entropy"], abs=0.1)
    assert half_chain_entropy(matched) == pytest.approx(info["entropy"])
    assert norm(matched) == pytest.approx(1.0)
