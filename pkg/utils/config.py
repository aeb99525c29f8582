"""Run configuration: JSON files overlaid on defaults, with typed accessors."""

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional

from physics.lattice import LatticeGeometry
from physics.model import ModelParams, QuenchProtocol
from tensornet.evolve import EvolutionConfig
from tensornet.groundstate import DmrgConfig
from utils.errors import ConfigError, SimulationError


INITIAL_STATE_KINDS = ("product_down", "product_up", "product_fv", "fv_ground", "excited", "random_entropy")
REFERENCES = ("down", "up", "auto")


@dataclass(frozen=True)
class InitialStateSpec:
    """Which state the quench starts from."""

    kind: str = "fv_ground"
    k: int = 1
    target: Optional[float] = None
    chi: int = 16
    tol: float = 0.1
    state_file: Optional[str] = None

    def __post_init__(self):
        if self.kind not in INITIAL_STATE_KINDS:
            raise ConfigError(f"initial_state.kind must be one of {INITIAL_STATE_KINDS}, got {self.kind!r}")
        if self.kind == "excited" and self.k < 1:
            raise ConfigError(f"initial_state.k must be >= 1, got {self.k}")

    @property
    def label(self) -> str:
        if self.kind == "excited":
            return f"excited{self.k}"
        return self.kind


@dataclass(frozen=True)
class SamplingSettings:
    times: List[float]
    n_shots: int
    seed: int
    workers: int
    reference: str
    render_images: int


class Config:
    """Manages the parameters of one experiment."""

    DEFAULT_CONFIG: Dict[str, Any] = {
        "geometry": {"rows": 3, "cols": 3},
        "model": {
            "J": 1.0,
            "g": 1.0,
            "h0": 0.1,
            "hq": -0.2,
            "hq_grid": [-2.5, -2.0, -1.5, -1.0, -0.5],
        },
        "initial_state": {
            "kind": "fv_ground",  # product_down, product_up, product_fv, fv_ground, excited, random_entropy
            "k": 1,
            "target": None,  # random_entropy: None matches the FV ground state
            "chi": 16,
            "tol": 0.1,
            "state_file": None,  # reuse a prepared state
        },
        "dmrg": {
            "chi_dmrg": 64,
            "n_sweeps_max": 50,
            "energy_tol": 1e-10,
            "penalty_weight": None,  # 10 * max(|E0|, 1) if None
        },
        "evolution": {
            "dt": 0.05,
            "t_max": 10.0,
            "chi_q": 256,
            "svd_min": 1e-10,
            "observable_stride": 1,
            "pad_bonds": True,
            "pad_chi": None,  # padding size and bond floor; None pads to chi_q
        },
        "sampling": {
            "times": [],
            "n_shots": 800,
            "seed": 1234,
            "workers": 4,
            "reference": "auto",  # down, up, or the polarization h0 favours
            "render_images": 0,
        },
        "sweep": {
            "geometries": ["3x3", "9x1"],
            "initial_states": ["product_fv", "fv_ground"],
            "threshold": math.exp(-4.0),
            "workers": 2,
        },
        "output_directory": "runs/default",
    }

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize configuration.

        Args:
            config_file: JSON file overlaid on the defaults; defaults only if None
        """
        self.config_file = Path(config_file) if config_file is not None else None
        self.config: Dict[str, Any] = {}
        self.load()

    @classmethod
    def from_dict(cls, overrides: Dict[str, Any]) -> "Config":
        config = cls()
        config.config = _merge(config.config, overrides)
        config.validate()
        return config

    def load(self) -> None:
        """Load the file over the defaults; a missing or broken file is an error."""
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        if self.config_file is None:
            return
        try:
            with open(self.config_file, "r", encoding="utf-8") as f:
                loaded = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {self.config_file}: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {self.config_file} must hold a JSON object")
        self.config = _merge(self.config, loaded)
        self.validate()

    def save(self, path: Optional[str] = None) -> None:
        """Write the current configuration as JSON."""
        target = Path(path) if path is not None else self.config_file
        if target is None:
            raise ConfigError("no file to save the configuration to")
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8") as f:
            json.dump(self.config, f, indent=2, sort_keys=True)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a value by dotted key, e.g. "evolution.dt"."""
        node: Any = self.config
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def set(self, key: str, value: Any) -> None:
        """Set a value by dotted key, creating intermediate sections."""
        parts = key.split(".")
        node = self.config
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form."""
        canonical = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def validate(self) -> None:
        """Build every typed view once so bad values surface as ConfigError."""
        try:
            self.get_geometry()
            self.get_model_params()
            self.get_protocol()
            self.get_initial_state()
            self.get_dmrg_config()
            self.get_evolution_config()
            self.get_sampling()
            if not self.get_hq_grid():
                raise ConfigError("model.hq_grid must not be empty")
        except ConfigError:
            raise
        except (SimulationError, TypeError, ValueError, KeyError) as e:
            raise ConfigError(f"invalid configuration: {e}") from e

    # Typed views -----------------------------------------------------------

    def get_geometry(self) -> LatticeGeometry:
        return LatticeGeometry(int(self.get("geometry.rows")), int(self.get("geometry.cols")))

    def get_model_params(self, pre_quench: bool = True) -> ModelParams:
        field = self.get("model.h0") if pre_quench else self.get("model.hq")
        return ModelParams(float(self.get("model.J")), float(self.get("model.g")), float(field))

    def get_protocol(self, hq: Optional[float] = None) -> QuenchProtocol:
        return QuenchProtocol.from_fields(
            float(self.get("model.J")), float(self.get("model.g")), float(self.get("model.h0")),
            float(self.get("model.hq") if hq is None else hq),
            float(self.get("evolution.t_max")), float(self.get("evolution.dt")),
            int(self.get("evolution.observable_stride")))

    def get_hq_grid(self) -> List[float]:
        return [float(h) for h in self.get("model.hq_grid", [])]

    def get_initial_state(self) -> InitialStateSpec:
        section = self.get("initial_state", {})
        target = section.get("target")
        return InitialStateSpec(
            kind=str(section.get("kind", "fv_ground")),
            k=int(section.get("k", 1)),
            target=None if target is None else float(target),
            chi=int(section.get("chi", 16)),
            tol=float(section.get("tol", 0.1)),
            state_file=section.get("state_file"),
        )

    def get_dmrg_config(self) -> DmrgConfig:
        penalty = self.get("dmrg.penalty_weight")
        return DmrgConfig(
            chi_dmrg=int(self.get("dmrg.chi_dmrg")),
            n_sweeps_max=int(self.get("dmrg.n_sweeps_max")),
            energy_tol=float(self.get("dmrg.energy_tol")),
            penalty_weight=None if penalty is None else float(penalty),
            svd_min=float(self.get("evolution.svd_min")),
            seed=int(self.get("sampling.seed")),
        )

    def get_evolution_config(self) -> EvolutionConfig:
        pad_chi = self.get("evolution.pad_chi")
        return EvolutionConfig(
            chi_q=int(self.get("evolution.chi_q")),
            svd_min=float(self.get("evolution.svd_min")),
            dt=float(self.get("evolution.dt")),
            observable_stride=int(self.get("evolution.observable_stride")),
            pad_bonds=bool(self.get("evolution.pad_bonds", True)),
            pad_chi=None if pad_chi is None else int(pad_chi),
        )

    def get_sampling(self) -> SamplingSettings:
        reference = str(self.get("sampling.reference", "auto"))
        if reference not in REFERENCES:
            raise ConfigError(f"sampling.reference must be one of {REFERENCES}, got {reference!r}")
        if reference == "auto":
            reference = "up" if float(self.get("model.h0")) > 0 else "down"
        n_shots = int(self.get("sampling.n_shots"))
        if n_shots < 1:
            raise ConfigError(f"sampling.n_shots must be >= 1, got {n_shots}")
        return SamplingSettings(
            times=[float(t) for t in self.get("sampling.times", [])],
            n_shots=n_shots,
            seed=int(self.get("sampling.seed")),
            workers=max(1, int(self.get("sampling.workers", 1))),
            reference=reference,
            render_images=int(self.get("sampling.render_images", 0)),
        )

    def get_output_directory(self) -> str:
        """Get output directory, creating it if it doesn't exist."""
        output_dir = Path(self.get("output_directory", self.DEFAULT_CONFIG["output_directory"]))
        output_dir.mkdir(parents=True, exist_ok=True)
        return str(output_dir)


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged
