"""Parameter sweeps over partitions and degrees with a resumable CSV.

Instances are solved in a process pool; only the parent process writes to
the results file, one row per finished instance, so an interrupted sweep
picks up where it stopped.
"""

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import pandas as pd

from src.config import SWEEP_RESULT_COLUMNS
from src.conic import structure_report
from src.pipeline import build_program, run_bound
from src.spec_loader import ProblemSpec, SweepSpec

logger = logging.getLogger(__name__)


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def solve_instance(spec: ProblemSpec, key: Dict[str, int], backend: Optional[str], tolerance: Optional[float]) -> Dict:
    """One sweep row; failures are recorded, never raised."""
    row = dict(key)
    started = time.perf_counter()
    try:
        run = run_bound(spec, backend=backend, tolerance=tolerance)
    except Exception as exc:  # a failed instance must not abort the sweep
        logger.warning("Instance %s failed: %s", key, exc)
        row.update(
            LB=None,
            solve_time=None,
            assembly_time=time.perf_counter() - started,
            num_blocks=None,
            max_block_dim=None,
            status="error",
            message=f"{type(exc).__name__}: {exc}",
        )
        return row
    structure = run.structure
    row.update(
        LB=run.bound.lower_bound,
        solve_time=run.timings["solve_time"],
        assembly_time=run.timings["assembly_time"],
        num_blocks=structure["num_blocks"],
        max_block_dim=structure["max_block_dim"],
        status=run.bound.status,
        message=run.bound.message,
    )
    return row


def structure_row(spec: ProblemSpec, key: Dict[str, int]) -> Dict:
    """Sweep row with structure counts only, without solving."""
    _, _, problem, assembly_time = build_program(spec)
    row = dict(key)
    row.update(assembly_time=assembly_time, **structure_report(problem))
    return row


def _completed(path: Path, keys: List[str]) -> Set[Tuple]:
    if not path.exists() or path.stat().st_size == 0:
        return set()
    done = pd.read_csv(path)
    missing = [k for k in keys if k not in done.columns]
    if missing:
        raise ValueError(f"Existing sweep file {path} lacks key columns {missing}")
    return {tuple(int(v) for v in row) for row in done[keys].itertuples(index=False)}


def _append(path: Path, row: Dict, columns: List[str]):
    frame = pd.DataFrame([row], columns=columns)
    frame.to_csv(path, mode="a", header=not path.exists() or path.stat().st_size == 0, index=False)


def run_sweep(
    sweep: SweepSpec,
    out_path: Union[str, Path],
    workers: int = 1,
    backend: Optional[str] = None,
    tolerance: Optional[float] = None,
) -> pd.DataFrame:
    """Solve every pending instance of ``sweep`` and append its row to ``out_path``.

    Args:
        sweep: Parsed sweep spec
        out_path: CSV file; rows whose keys are already present are skipped
        workers: Process count; 1 solves inline
        backend: Backend override
        tolerance: Tolerance override

    Returns:
        All rows of the results file, sorted by instance key
    """
    out_path = Path(out_path)
    keys = sweep.keys
    columns = keys + SWEEP_RESULT_COLUMNS
    done = _completed(out_path, keys)
    pending = [row for row in sweep.instances() if tuple(row[k] for k in keys) not in done]
    logger.info("Sweep: %d instances, %d already done, %d to run", len(done) + len(pending), len(done), len(pending))
    if pending and workers <= 1:
        for n, key in enumerate(pending, 1):
            _append(out_path, solve_instance(sweep.instance_spec(key), key, backend, tolerance), columns)
            logger.info("Finished %d/%d: %s", n, len(pending), key)
    elif pending:
        with ProcessPoolExecutor(max_workers=min(workers, len(pending))) as pool:
            futures = {
                pool.submit(solve_instance, sweep.instance_spec(key), key, backend, tolerance): key for key in pending
            }
            for n, future in enumerate(as_completed(futures), 1):
                _append(out_path, future.result(), columns)
                logger.info("Finished %d/%d: %s", n, len(pending), futures[future])
    if not out_path.exists():
        return pd.DataFrame(columns=columns)
    return pd.read_csv(out_path).sort_values(keys).reset_index(drop=True)
