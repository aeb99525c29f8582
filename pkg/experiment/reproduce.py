"""Canned experiment presets: each builds configs and runs them into one directory."""

import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional

from experiment.runner import RunManifest, run_experiment
from experiment.sweep import sweep_fpt
from utils.config import Config
from utils.errors import ConfigError


logger = logging.getLogger(__name__)

ProgressFn = Optional[Callable[[int, int], None]]


def _base(scale: int, **overrides) -> Config:
    config = Config.from_dict({
        "geometry": {"rows": scale, "cols": scale},
        "model": {"J": 1.0, "g": 1.0, "h0": 0.1, "hq": -0.2},
        "evolution": {"t_max": 10.0, "dt": 0.05, "chi_q": 64 if scale <= 3 else 128},
        "dmrg": {"chi_dmrg": 32 if scale <= 3 else 64},
    })
    for key, value in overrides.items():
        config.set(key, value)
    config.validate()
    return config


def quench_comparison(scale: int, out: Path, on_progress: ProgressFn = None) -> Dict[str, RunManifest]:
    """Return probability of the polarized product state against the dressed vacuum."""
    manifests = {}
    for kind in ("product_fv", "fv_ground"):
        config = _base(scale, **{"initial_state.kind": kind})
        manifests[kind] = run_experiment(config, str(out / kind), on_progress)
    return manifests


def fpt_scan(scale: int, out: Path, on_progress: ProgressFn = None) -> Dict[str, RunManifest]:
    """First-passage times on a square lattice and on the chain with the same site count."""
    config = _base(scale, **{
        "sweep.geometries": [f"{scale}x{scale}", f"{scale * scale}x1"],
        "sweep.initial_states": ["product_fv", "fv_ground"],
        "evolution.t_max": 20.0,
    })
    sweep_fpt(config, str(out), on_progress=on_progress)
    return {}


def bubble_statistics(scale: int, out: Path, on_progress: ProgressFn = None) -> Dict[str, RunManifest]:
    """Cluster statistics for four initial-state families at a weak and a strong post-quench field."""
    manifests = {}
    times = [round(0.5 * k, 4) for k in range(1, 21)]
    for hq in (-0.2, -1.6):
        for kind, extra in (("product_fv", {}), ("fv_ground", {}),
                            ("excited", {"initial_state.k": 1}), ("random_entropy", {})):
            config = _base(scale, **{
                "model.hq": hq,
                "initial_state.kind": kind,
                "sampling.times": times,
                "sampling.n_shots": 800,
                **extra,
            })
            name = f"hq{hq:+.1f}_{config.get_initial_state().label}"
            manifests[name] = run_experiment(config, str(out / name), on_progress)
    return manifests


def excited_ladder(scale: int, out: Path, on_progress: ProgressFn = None) -> Dict[str, RunManifest]:
    """Quenches from the vacuum and its first two excitations."""
    manifests = {}
    for kind, k in (("fv_ground", 1), ("excited", 1), ("excited", 2)):
        config = _base(scale, **{"initial_state.kind": kind, "initial_state.k": k})
        label = config.get_initial_state().label
        manifests[label] = run_experiment(config, str(out / label), on_progress)
    return manifests


PRESETS: Dict[str, Callable[[int, Path, ProgressFn], Dict[str, RunManifest]]] = {
    "quench": quench_comparison,
    "fpt": fpt_scan,
    "bubbles": bubble_statistics,
    "excited": excited_ladder,
}

# figure-style names for the presets
PRESET_ALIASES: Dict[str, str] = {
    "fig2": "quench",
    "fig3": "fpt",
    "fig4": "bubbles",
    "fig7": "excited",
}


def resolve_preset(name: str) -> str:
    """Preset key for a preset name or alias."""
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + sorted(PRESET_ALIASES)}")
    return name


def reproduce(name: str, output_dir: str, scale: int = 3,
              on_progress: ProgressFn = None) -> Dict[str, RunManifest]:
    """
    Run one preset.

    Args:
        name: Key of PRESETS or PRESET_ALIASES
        output_dir: Directory receiving one subdirectory per run
        scale: Linear lattice size
        on_progress: Forwarded to every run

    Returns:
        Manifests keyed by run name (empty for sweeps, which write fpt.csv)
    """
    name = resolve_preset(name)
    if scale < 1:
        raise ConfigError(f"scale must be >= 1, got {scale}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    logger.info("preset %s at scale %d -> %s", name, scale, out)
    return PRESETS[name](scale, out, on_progress)


def preset_names() -> List[str]:
    return sorted(PRESETS)
