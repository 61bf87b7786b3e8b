"""Parameter sweeps over V0, screening depth and base filling.

Points sharing (V0, d) are evaluated by one job so that band, Wannier and
Coulomb stages are built once per device. Jobs run in a process pool and
are collected back into grid order, so results do not depend on the
worker count.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .cache import StageCache
from .device import DeviceConfig, NumericsConfig, TaskConfig
from .effective import effective_params, hopping_row
from .output import TABLE_COLUMNS, table_row
from .stages import Runner

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SweepPoint:
    v0_mev: float
    depth_nm: float
    nb: int


def sweep_grid(cfg: DeviceConfig, task: TaskConfig) -> list[SweepPoint]:
    """Cartesian grid; an empty V0 or depth list means the device value, an empty N_b list means no points."""
    v0s = task.sweep_v0 or (cfg.v0_mev,)
    depths = task.sweep_depth or (cfg.depth_nm,)
    return [SweepPoint(float(v), float(d), int(n)) for v, d, n in itertools.product(v0s, depths, task.sweep_nb)]


@dataclass
class JobResult:
    rows: list  # one dict per point, SWEEP_COLUMNS keys
    solves: int
    log: list


def _row(point: SweepPoint, params=None, error: str = "") -> dict:
    row = {"sweep_v0_mev": point.v0_mev, "sweep_depth_nm": point.depth_nm, "sweep_nb": point.nb, "error": error}
    row.update({c: None for c in TABLE_COLUMNS})
    if params is not None:
        row.update(table_row(params))
    return row


def _run_device(cfg: DeviceConfig, num: NumericsConfig, points: list[SweepPoint], cache_dir) -> JobResult:
    cache = StageCache(cache_dir) if cache_dir is not None else None
    runner = Runner(cfg, num, cache)
    rows = []
    for p in points:
        try:
            rows.append(_row(p, effective_params(nb=p.nb, runner=runner)))
        except Exception as exc:  # recorded per point, the sweep carries on
            logger.debug("sweep point %s failed:\n%s", p, traceback.format_exc())
            rows.append(_row(p, error=f"{type(exc).__name__}: {exc}".replace("\n", " ")))
    return JobResult(rows, runner.solves, runner.log)


def _jobs(cfg: DeviceConfig, points: list[SweepPoint]):
    groups: dict = {}
    for p in points:
        groups.setdefault((p.v0_mev, p.depth_nm), []).append(p)
    for (v0, d), pts in groups.items():
        yield dataclasses.replace(cfg, v0_mev=v0, depth_nm=d), pts


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


@dataclass
class SweepResult:
    rows: list
    solves: int
    log: list


def sweep(cfg: DeviceConfig, num: NumericsConfig, task: TaskConfig, workers: int = 1, cache_dir=None) -> SweepResult:
    """Evaluate every grid point; failures land in the row's ``error`` field."""
    points = sweep_grid(cfg, task)
    jobs = [(c, num, pts, cache_dir) for c, pts in _jobs(cfg, points)]
    results = _map(_run_device, jobs, workers)
    order = {p: i for i, p in enumerate(points)}
    rows = sorted((r for res in results for r in res.rows),
                  key=lambda r: order[SweepPoint(r["sweep_v0_mev"], r["sweep_depth_nm"], r["sweep_nb"])])
    return SweepResult(rows, sum(r.solves for r in results), [line for r in results for line in r.log])


FIG3_NB = (0, 2, 6)
FIG3_COLUMNS = ["v0_mev", "U_mev"] + [f"t_nb{n}_mev" for n in FIG3_NB]


def _fig3_point(cfg: DeviceConfig, num: NumericsConfig, with_u: bool, cache_dir):
    cache = StageCache(cache_dir) if cache_dir is not None else None
    runner = Runner(cfg, num, cache)
    row = {"v0_mev": cfg.v0_mev, "U_mev": float("nan")}
    for nb in FIG3_NB:
        try:
            row[f"t_nb{nb}_mev"] = hopping_row(runner, nb)[1]
        except ValueError:
            row[f"t_nb{nb}_mev"] = float("nan")
    if with_u:
        row["U_mev"] = effective_params(nb=0, runner=runner).U
    return row, runner.solves, runner.log


def fig3_data(cfg: DeviceConfig, num: NumericsConfig, v0_values, with_u: bool = True, workers: int = 1,
              cache_dir=None) -> SweepResult:
    """U(N_b = 0) and t for N_b = 0, 2, 6 against V0."""
    jobs = [(dataclasses.replace(cfg, v0_mev=float(v)), num, with_u, cache_dir) for v in v0_values]
    out = _map(_fig3_point, jobs, workers)
    return SweepResult([r for r, _, _ in out], sum(s for _, s, _ in out), [line for _, _, log in out for line in log])
