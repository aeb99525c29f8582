"""Command-line entry point for the false-vacuum quench simulator."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from tqdm import tqdm

from analysis.clusters import accumulate_stats
from experiment import storage
from experiment.reproduce import PRESET_ALIASES, preset_names, reproduce
from experiment.runner import Runner, prepare_state
from experiment.sampler import ShotSampler
from experiment.sweep import sweep_fpt
from utils.config import Config
from utils.errors import ConfigError, SimulationError, exit_code_for


logger = logging.getLogger("fvquench")


def _progress_bar(desc: str, quiet: bool):
    """tqdm bar plus a (done, total) callback that drives it."""
    if quiet:
        return None, None
    bar = tqdm(desc=desc, unit="step", leave=False)

    def update(done: int, total: int) -> None:
        if bar.total != total:
            bar.reset(total=total)
        bar.n = done
        bar.refresh()

    return bar, update


def _load_config(args) -> Config:
    config = Config(args.config)
    for item in args.set or []:
        key, _, value = item.partition("=")
        config.set(key, _parse_scalar(value))
    config.validate()
    return config


def _parse_scalar(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def cmd_run(args) -> int:
    config = _load_config(args)
    runner = Runner(config, args.output)
    bar, runner.on_progress = _progress_bar("evolve", args.quiet)
    try:
        manifest = runner.run()
    finally:
        if bar is not None:
            bar.close()
    logger.info("run finished in %s, %d artifacts", runner.output_dir, len(manifest.artifacts))
    return 0


def cmd_evolve(args) -> int:
    config = _load_config(args)
    path = args.state or config.get("initial_state.state_file")
    if not path:
        raise ConfigError("evolve needs a state file: pass one or set initial_state.state_file")
    psi0, header = storage.load_state(path)
    if psi0.geometry != config.get_geometry():
        logger.info("using the %s geometry of %s", psi0.geometry.label, path)
    config.set("geometry.rows", psi0.geometry.rows)
    config.set("geometry.cols", psi0.geometry.cols)
    config.set("initial_state.state_file", str(path))
    config.validate()
    runner = Runner(config, args.output)
    bar, runner.on_progress = _progress_bar("evolve", args.quiet)
    try:
        manifest = runner.run(psi0, {"source": str(path), "meta": header.get("meta", {})}, analyze=False)
    finally:
        if bar is not None:
            bar.close()
    logger.info("evolved %s into %s, %d artifacts", path, runner.output_dir, len(manifest.artifacts))
    return 0


def cmd_prepare(args) -> int:
    config = _load_config(args)
    psi, info = prepare_state(config.get_geometry(), config)
    path = storage.save_state(args.output, psi, info)
    logger.info("saved %s state (bond %d) to %s", info["kind"], psi.max_bond, path)
    return 0


def cmd_sample(args) -> int:
    psi, header = storage.load_state(args.state)
    sampler = ShotSampler(args.seed, args.workers)
    shots = sampler.sample(psi, args.time_index, args.shots)
    time = float(header.get("meta", {}).get("time", 0.0))
    path = storage.write_snapshots(args.output, shots, time, args.seed)
    logger.info("wrote %d shots to %s", len(shots), path)
    return 0


def cmd_analyze(args) -> int:
    for snapshot_file in args.snapshots:
        geometry, time, seed, shots = storage.read_snapshots(snapshot_file)
        stats = accumulate_stats(shots, geometry, args.reference, time=time)
        out = Path(args.output) / Path(snapshot_file).stem
        storage.write_cluster_tables(str(out), stats, seed=seed)
        logger.info("%s: %d shots, <flipped> %.3f -> %s", snapshot_file, stats.shots,
                    stats.flipped_total / stats.shots, out)
    return 0


def cmd_sweep(args) -> int:
    config = _load_config(args)
    bar, update = _progress_bar("sweep", args.quiet)
    try:
        rows = sweep_fpt(config, args.output, workers=args.workers, on_progress=update)
    finally:
        if bar is not None:
            bar.close()
    failed = sum(row.status != "ok" for row in rows)
    if failed:
        logger.warning("%d of %d sweep points failed", failed, len(rows))
    return 0


def cmd_reproduce(args) -> int:
    bar, update = _progress_bar(args.preset, args.quiet)
    try:
        reproduce(args.preset, args.output, args.scale, update)
    finally:
        if bar is not None:
            bar.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvquench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings only, no progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument("-c", "--config", help="JSON config overlaid on the defaults")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a dotted config key, e.g. evolution.dt=0.02")
        return p

    p = with_config(sub.add_parser("run", help="prepare, evolve, sample and analyze one quench"))
    p.add_argument("-o", "--output", help="output directory (default: config output_directory)")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("evolve", help="evolve a prepared state file and sample it"))
    p.add_argument("state", nargs="?", help="state file (default: initial_state.state_file)")
    p.add_argument("-o", "--output", help="output directory (default: config output_directory)")
    p.set_defaults(func=cmd_evolve)

    p = with_config(sub.add_parser("prepare", help="build the configured initial state"))
    p.add_argument("-o", "--output", required=True, help="state file to write")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("sample", help="draw projective snapshots from a state file")
    p.add_argument("state", help="state file")
    p.add_argument("-n", "--shots", type=int, default=800)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--time-index", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", required=True, help="snapshot file to write")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("analyze", help="cluster statistics of snapshot files")
    p.add_argument("snapshots", nargs="+")
    p.add_argument("--reference", choices=("down", "up"), default="down",
                   help="polarization flips are counted against (default: all-down)")
    p.add_argument("-o", "--output", required=True, help="directory for the tables")
    p.set_defaults(func=cmd_analyze)

    p = with_config(sub.add_parser("sweep-fpt", help="first-passage times over the hq grid"))
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("reproduce", help="run a canned preset")
    p.add_argument("preset", choices=preset_names() + sorted(PRESET_ALIASES))
    p.add_argument("--scale", type=int, default=3, help="linear lattice size")
    p.add_argument("-o", "--output", default="runs/reproduce")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point."""
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SimulationError as e:
        logger.error("%s", e)
        return exit_code_for(e)
    except Exception as e:
        logger.exception("unexpected failure: %s", e)
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
