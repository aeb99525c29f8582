"""Experiment orchestration: prepare, evolve, measure, analyze, record."""

import json
import logging
import platform
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy

from analysis.clusters import accumulate_stats, pmax_heatmap
from experiment import storage
from experiment.render import render_snapshots
from experiment.sampler import ShotSampler
from physics.lattice import LatticeGeometry
from tensornet.evolve import ShotSchedule, TrajectoryRecord, evolve_quench
from tensornet.groundstate import DmrgConfig, excited_states, ground_state, initial_polarization
from tensornet.mps import (MpsState, half_chain_entropy, product_state, random_mps_with_entropy)
from utils.config import Config, InitialStateSpec
from utils.errors import DomainError, StageError
from utils.rng import named_stream


logger = logging.getLogger(__name__)


class RunState(Enum):
    """Runner stage."""
    IDLE = "idle"
    PREPARING = "preparing"
    EVOLVING = "evolving"
    ANALYZING = "analyzing"
    DONE = "done"
    FAILED = "failed"


@dataclass
class RunManifest:
    """What a run produced and how to reproduce it."""

    config_hash: str
    seed: int
    versions: Dict[str, str]
    initial_state: Dict[str, Any] = field(default_factory=dict)
    wall_time: Dict[str, float] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, path: str) -> str:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
        return str(path)


def package_versions() -> Dict[str, str]:
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def time_label(t: float) -> str:
    return f"t{t:09.4f}"


def prepare_state(geom: LatticeGeometry, config: Config,
                  spec: Optional[InitialStateSpec] = None) -> Tuple[MpsState, Dict[str, Any]]:
    """
    Build the initial state named by the configuration.

    Returns:
        (state, info) where info records energies and entropies for the manifest
    """
    spec = spec if spec is not None else config.get_initial_state()
    pre = config.get_model_params(pre_quench=True)
    dmrg_cfg: DmrgConfig = config.get_dmrg_config()
    chi = dmrg_cfg.chi_dmrg
    info: Dict[str, Any] = {"kind": spec.label, "geometry": geom.label}

    if spec.state_file:
        psi, header = storage.load_state(spec.state_file)
        if psi.geometry != geom:
            raise DomainError(f"state file {spec.state_file} holds {psi.geometry.label}, need {geom.label}")
        info.update(source=spec.state_file, meta=header.get("meta", {}))
        return psi, info
    if spec.kind in ("product_down", "product_up", "product_fv"):
        local = initial_polarization(pre) if spec.kind == "product_fv" else spec.kind.split("_")[1]
        info["polarization"] = local
        return product_state(geom, local, chi, dmrg_cfg.svd_min), info
    if spec.kind == "fv_ground":
        result = ground_state(geom, pre, dmrg_cfg)
        info.update(energy=result.energy, variance=result.variance, sweeps=result.sweeps)
        return result.state, info
    if spec.kind == "excited":
        results = excited_states(geom, pre, dmrg_cfg, spec.k)
        chosen = results[spec.k]
        info.update(energy=chosen.energy, variance=chosen.variance,
                    ladder=[r.energy for r in results])
        return chosen.state, info

    # random_entropy
    target = spec.target
    if target is None:
        target = half_chain_entropy(ground_state(geom, pre, dmrg_cfg).state) if geom.num_sites > 1 else 0.0
    rng = named_stream(config.get_sampling().seed, "random_entropy")
    psi = random_mps_with_entropy(geom, spec.chi, target, spec.tol, rng)
    entropy = half_chain_entropy(psi) if geom.num_sites > 1 else 0.0
    info.update(target_entropy=target, entropy=entropy)
    return psi, info


class Runner:
    """Runs one configured experiment stage by stage."""

    def __init__(self, config: Config, output_dir: Optional[str] = None):
        """
        Initialize runner.

        Args:
            config: Validated run configuration
            output_dir: Overrides config's output_directory
        """
        self.config = config
        self.output_dir = Path(output_dir if output_dir is not None else config.get_output_directory())
        self.state = RunState.IDLE
        self.geometry = config.get_geometry()
        self.sampling = config.get_sampling()
        self.manifest = RunManifest(config.config_hash(), self.sampling.seed, package_versions())

        # Callbacks
        self.on_state_changed: Optional[Callable[[RunState], None]] = None
        self.on_progress: Optional[Callable[[int, int], None]] = None

    def _set_state(self, state: RunState) -> None:
        self.state = state
        logger.info("run %s: %s", self.manifest.config_hash[:12], state.value)
        if self.on_state_changed:
            self.on_state_changed(state)

    def _artifact(self, name: str, path: str) -> None:
        rel = str(Path(path).relative_to(self.output_dir))
        self.manifest.artifacts[rel] = storage.file_sha256(path)
        logger.debug("wrote %s (%s)", rel, name)

    def _stage(self, name: str, state: RunState, fn: Callable[[], Any]) -> Any:
        self._set_state(state)
        start = time.perf_counter()
        try:
            return fn()
        except Exception as e:
            self._set_state(RunState.FAILED)
            self.manifest.diagnostics["failed_stage"] = name
            self.manifest.write(str(self.output_dir / "manifest.json"))
            raise StageError(name, e) from e
        finally:
            self.manifest.wall_time[name] = round(time.perf_counter() - start, 6)

    def prepare(self) -> MpsState:
        psi, info = prepare_state(self.geometry, self.config)
        self.manifest.initial_state = info
        path = storage.save_state(str(self.output_dir / "initial_state.fvq"), psi, info)
        self._artifact("initial state", path)
        return psi

    def evolve(self, psi0: MpsState) -> TrajectoryRecord:
        protocol = self.config.get_protocol()
        schedule = None
        sampler = None
        if self.sampling.times:
            schedule = ShotSchedule(self.sampling.times, self.sampling.n_shots, self.sampling.seed)
            sampler = ShotSampler(self.sampling.seed, self.sampling.workers)
        record = evolve_quench(psi0, self.geometry, protocol, self.config.get_evolution_config(),
                               schedule, sampler, self.on_progress)
        path = storage.write_trajectory(str(self.output_dir / "trajectory.csv"), record,
                                        self.sampling.seed)
        self._artifact("trajectory", path)
        for t, shots in sorted(record.snapshots.items()):
            snap_path = storage.write_snapshots(
                str(self.output_dir / "snapshots" / f"{time_label(t)}.txt"), shots, t, self.sampling.seed)
            self._artifact("snapshots", snap_path)
            if self.sampling.render_images > 0:
                for png in render_snapshots(shots, str(self.output_dir / "images"), time_label(t),
                                            self.sampling.render_images):
                    self._artifact("image", png)
        self.manifest.diagnostics.update(
            max_bond=max(record.max_bond),
            discarded_weight=record.discarded_weight[-1],
            max_norm_drift=float(np.max(np.abs(np.asarray(record.norm) - 1.0))),
            energy_drift=float(abs(record.energy[-1] - record.energy[0])),
        )
        return record

    def analyze(self, record: TrajectoryRecord) -> None:
        if not record.snapshots:
            logger.info("no snapshots scheduled; skipping cluster analysis")
            return
        reference = self.sampling.reference
        clusters_dir = self.output_dir / "clusters"
        for t, shots in sorted(record.snapshots.items()):
            stats = accumulate_stats(shots, self.geometry, reference, time=t)
            for name, path in storage.write_cluster_tables(
                    str(clusters_dir / time_label(t)), stats, seed=self.sampling.seed).items():
                self._artifact(name, path)
        times = sorted(record.snapshots)
        table = pmax_heatmap(record.snapshots, self.geometry, reference)
        rows = [(t, s, table[k, s]) for k, t in enumerate(times) for s in range(table.shape[1])]
        path = storage.write_table(str(clusters_dir / "pmax_heatmap.csv"), ("t", "s_max", "p"), rows,
                                   self.sampling.seed)
        self._artifact("pmax heatmap", path)

    def run(self, psi0: Optional[MpsState] = None, initial_info: Optional[Dict[str, Any]] = None,
            analyze: bool = True) -> RunManifest:
        """
        Execute prepare -> evolve (with measurements) -> analyze.

        Args:
            psi0: Prepared initial state; skips the prepare stage when given
            initial_info: Manifest record for psi0
            analyze: Run the cluster analysis stage

        Returns:
            Manifest, also written to manifest.json in the output directory

        Raises:
            DomainError: psi0 lives on another geometry
            StageError: wrapping the first failure; files written so far stay
        """
        if psi0 is not None and psi0.geometry != self.geometry:
            raise DomainError(f"initial state is on {psi0.geometry.label}, run is on {self.geometry.label}")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.config.save(str(self.output_dir / "config.json"))
        if psi0 is None:
            psi0 = self._stage("prepare", RunState.PREPARING, self.prepare)
        else:
            self.manifest.initial_state = dict(initial_info or {})
        record = self._stage("evolve", RunState.EVOLVING, lambda: self.evolve(psi0))
        if analyze:
            self._stage("analyze", RunState.ANALYZING, lambda: self.analyze(record))
        self._set_state(RunState.DONE)
        self.manifest.write(str(self.output_dir / "manifest.json"))
        return self.manifest


def run_experiment(config: Config, output_dir: Optional[str] = None,
                   on_progress: Optional[Callable[[int, int], None]] = None) -> RunManifest:
    """Run a full experiment and return its manifest."""
    runner = Runner(config, output_dir)
    runner.on_progress = on_progress
    return runner.run()


def artifact_hashes(manifest: RunManifest) -> List[Tuple[str, str]]:
    """Sorted (artifact, sha256) pairs, the reproducible part of a manifest."""
    return sorted(manifest.artifacts.items())
