"""First-passage-time sweeps over post-quench fields, geometries and initial states."""

import itertools
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from analysis.observables import FptResult, first_passage_time
from experiment.runner import prepare_state
from experiment.storage import CsvWriter, write_table
from physics.lattice import parse_label
from tensornet.evolve import evolve_quench
from tensornet.mps import MpsState
from utils.config import Config, InitialStateSpec
from utils.errors import ConfigError


logger = logging.getLogger(__name__)

FPT_COLUMNS = ("hq", "geometry", "initial_state", "t_fpt", "threshold", "reached", "status")


@dataclass(frozen=True)
class SweepRow:
    """One (hq, geometry, initial state) point of a sweep."""

    hq: float
    geometry: str
    initial_state: str
    result: Optional[FptResult]
    status: str = "ok"

    def cells(self) -> Tuple:
        if self.result is None:
            return (self.hq, self.geometry, self.initial_state, None, None, None, self.status)
        return (self.hq, self.geometry, self.initial_state, self.result.t_fpt,
                self.result.threshold, self.result.reached, self.status)


def parse_initial_state(label: str, base: Optional[InitialStateSpec] = None) -> InitialStateSpec:
    """
    Initial-state settings for a sweep label such as "fv_ground", "product_fv" or "excited2".

    Settings the label does not name (entropy target, chi, tolerance) come
    from base.
    """
    base = base if base is not None else InitialStateSpec()
    match = re.fullmatch(r"excited(\d+)", label)
    if match:
        return replace(base, kind="excited", k=int(match.group(1)), state_file=None)
    return replace(base, kind=label, state_file=None)


def sweep_fpt(config: Config, output_dir: str, hq_grid: Optional[Sequence[float]] = None,
              geometries: Optional[Sequence[str]] = None,
              initial_states: Optional[Sequence[str]] = None,
              workers: Optional[int] = None,
              on_progress: Optional[Callable[[int, int], None]] = None) -> List[SweepRow]:
    """
    First-passage times for every (hq, geometry, initial state) combination.

    Initial states are prepared once per (geometry, initial state) since they
    depend only on the pre-quench field; quenches then run on a thread pool.
    fpt_partial.csv receives rows as points finish, fpt.csv the final table
    sorted by hq. A failing point is recorded with status "failed".

    Returns:
        Rows in the order of fpt.csv
    """
    hq_grid = list(hq_grid) if hq_grid is not None else config.get_hq_grid()
    geometries = list(geometries) if geometries is not None else list(config.get("sweep.geometries"))
    initial_states = list(initial_states) if initial_states is not None else list(config.get("sweep.initial_states"))
    workers = workers if workers is not None else int(config.get("sweep.workers", 1))
    threshold = float(config.get("sweep.threshold"))
    seed = config.get_sampling().seed
    if not hq_grid or not geometries or not initial_states:
        raise ConfigError("sweep needs non-empty hq grid, geometries and initial states")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    base = config.get_initial_state()
    prepared: Dict[Tuple[str, str], Optional[MpsState]] = {}
    for label, state_label in itertools.product(geometries, initial_states):
        try:
            psi, _ = prepare_state(parse_label(label), config, parse_initial_state(state_label, base))
            prepared[(label, state_label)] = psi
        except Exception as e:
            logger.warning("preparing %s on %s failed: %s", state_label, label, e)
            prepared[(label, state_label)] = None

    evolution = config.get_evolution_config()
    points = list(itertools.product(hq_grid, geometries, initial_states))
    lock = threading.Lock()
    done = [0]

    def run_point(hq: float, label: str, state_label: str) -> SweepRow:
        psi = prepared[(label, state_label)]
        if psi is None:
            return SweepRow(hq, label, state_label, None, "failed")
        try:
            record = evolve_quench(psi, parse_label(label), config.get_protocol(hq), evolution)
        except Exception as e:
            logger.warning("quench hq=%g on %s from %s failed: %s", hq, label, state_label, e)
            return SweepRow(hq, label, state_label, None, "failed")
        series = list(zip(record.times, record.p_ret))
        return SweepRow(hq, label, state_label, first_passage_time(series, threshold, hq, label))

    rows: List[SweepRow] = []
    with CsvWriter(str(out / "fpt_partial.csv"), FPT_COLUMNS, seed) as partial:
        def finish(row: SweepRow) -> None:
            with lock:
                partial.write_row(row.cells())
                rows.append(row)
                done[0] += 1
                if on_progress:
                    on_progress(done[0], len(points))

        if workers <= 1:
            for point in points:
                finish(run_point(*point))
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_point, *point) for point in points]
                for future in as_completed(futures):
                    finish(future.result())

    rows.sort(key=lambda r: (r.hq, r.geometry, r.initial_state))
    write_table(str(out / "fpt.csv"), FPT_COLUMNS, [r.cells() for r in rows], seed)
    logger.info("sweep finished: %d points, %d failed", len(rows), sum(r.status != "ok" for r in rows))
    return rows
