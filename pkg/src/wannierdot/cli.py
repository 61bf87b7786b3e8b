"""Command-line front end: ``python -m wannierdot <command> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import time
from pathlib import Path

from . import ed
from .bands import axial_next_hopping, diagonal_hopping, nearest_hopping
from .cache import StageCache
from .device import ConfigError, ConvergenceError, format_config, load_config
from .effective import effective_params, feasibility_report, hopping_row, shells_of, table_report, validity_check
from .output import (EFFECTIVE_COLUMNS, FEASIBILITY_COLUMNS, SWEEP_COLUMNS, TABLE_COLUMNS, effective_row,
                     feasibility_row, table_row, write_csv)
from .stages import Runner
from .sweep import FIG3_COLUMNS, FIG3_NB, sweep
from .wannier import WannierError

logger = logging.getLogger("wannierdot")

COMMANDS = ("bands", "wannier", "coulomb", "ed", "addition", "effective", "table", "sweep", "feasibility")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration file (section.key = value lines)")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration value; repeatable, last one wins")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    common.add_argument("--no-cache", action="store_true", help="disable the on-disk stage cache")
    common.add_argument("--cache-dir", help="stage cache location (default: <out>/cache)")

    parser = _Parser(prog="wannierdot", description="Hubbard parameters of a gated quantum-dot array.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    helps = {
        "bands": "1D and 2D band structure, hoppings and band isolation",
        "wannier": "1D Wannier orbitals on the real-space grid",
        "coulomb": "on-site Coulomb tensor and neighbour interaction",
        "ed": "lowest energies of every (N, Sz) sector for N = 0..task.n_max",
        "addition": "addition spectrum and single-particle levels",
        "effective": "full effective parameters for task.nb",
        "table": "Table-style rows (U, V, t, t') for task.nb",
        "sweep": "grid over task.sweep_v0, task.sweep_depth and task.sweep_nb",
        "feasibility": "temperature verdicts for task.nb at task.temperature_k",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


# -- commands ----------------------------------------------------------------

def cmd_bands(runner: Runner, task, args, out: Path) -> None:
    bs = runner.bands()
    rows = [(float(k), n + 1, float(bs.energies[i, n])) for i, k in enumerate(bs.k) for n in range(bs.nbands)]
    write_csv(out / "band_1d.csv", ["k_nm_inv", "band", "energy_mev"], rows)
    report = runner.isolation()
    shell_of = {b: i for i, s in enumerate(shells_of(runner)) for b in s.bands}
    write_csv(out / "bands_2d.csv", ["nx", "ny", "shell", "onsite_mev", "min_mev", "max_mev", "isolated"],
              [(b.nx, b.ny, shell_of[b.index], b.onsite, b.band_min, b.band_max, report.isolated[b.index])
               for b in runner.bands2d()])
    write_csv(out / "hoppings.csv", ["nx", "ny", "t_mev", "tprime_mev", "tdiag_mev"],
              [(b.nx, b.ny, nearest_hopping(bs, b.index), axial_next_hopping(bs, b.index),
                diagonal_hopping(bs, b.index)) for b in runner.bands2d()])
    validity = validity_check(runner=runner)
    logger.info("admissible N_b: %s", ",".join(map(str, validity.admissible_nb)) or "none")


def cmd_wannier(runner: Runner, task, args, out: Path) -> None:
    summary = []
    for w in runner.wannier():
        write_csv(out / f"wannier_{w.band}.csv", ["x_nm", "amplitude_per_sqrt_nm"], zip(w.x.tolist(), w.amplitude.tolist()))
        summary.append((w.band, w.norm(), w.parity(), w.tail_ratio))
    write_csv(out / "wannier_summary.csv", ["band", "norm", "parity", "tail_ratio"], summary)


def cmd_coulomb(runner: Runner, task, args, out: Path) -> None:
    data = runner.coulomb()
    t = data.tensor
    rows = []
    m = len(t.orbitals)
    for i in range(m):
        for j in range(m):
            for k in range(m):
                for l in range(m):
                    if t.values[i, j, k, l] != 0.0:
                        rows.append((*t.orbitals[i], *t.orbitals[j], *t.orbitals[k], *t.orbitals[l],
                                     float(t.values[i, j, k, l]), float(t.errors[i, j, k, l])))
    write_csv(out / "coulomb_tensor.csv",
              ["n1x", "n1y", "n2x", "n2y", "n3x", "n3y", "n4x", "n4y", "U_mev", "err_mev"], rows)
    write_csv(out / "neighbor_v.csv", ["nx", "ny", "V_mev", "V_err_mev", "V_bare_mev"],
              [(*o, *data.neighbor[o]) for o in t.orbitals])
    flagged = int(t.flagged.sum())
    if flagged:
        logger.info("%d tensor elements change by more than 2%% on the coarse grid", flagged)


def _ed_rows(res: ed.EDResult):
    return [(n, s, r.energies[0], r.dimension, r.iterations, r.residual) for (n, s), r in sorted(res.sectors.items())]


ED_COLUMNS = ["N", "two_sz", "energy_mev", "dim", "iters", "residual"]


def cmd_ed(runner: Runner, task, args, out: Path) -> None:
    res = runner.ed_result(runner.all_orbitals(), range(task.n_max + 1))
    write_csv(out / "ed_energies.csv", ED_COLUMNS, _ed_rows(res))


def cmd_addition(runner: Runner, task, args, out: Path) -> None:
    orbitals = runner.all_orbitals()
    if task.n_max + 1 > 2 * len(orbitals):
        raise ConfigError([f"task.n_max: N = {task.n_max + 1} exceeds 2M = {2 * len(orbitals)}"])
    res = runner.ed_result(orbitals, range(task.n_max + 2))
    write_csv(out / "ed_energies.csv", ED_COLUMNS, _ed_rows(res))
    add = res.addition()
    write_csv(out / "addition.csv", ["N", "E_mev", "ground_two_sz", "A_mev"],
              [(n, res.ground(n), res.ground_two_sz(n), add[n]) for n in sorted(add)])
    write_csv(out / "fig2_addition.csv", ["N", "A_mev"], [(n, add[n]) for n in sorted(add)])
    write_csv(out / "fig2_spectrum.csv", ["level", "nx", "ny", "energy_mev"],
              [(i + 1, b.nx, b.ny, b.onsite) for i, b in enumerate(runner.bands2d())])


def cmd_effective(runner: Runner, task, args, out: Path) -> None:
    rows = [effective_row(p) for p in table_report(nb_list=task.nb, runner=runner)]
    write_csv(out / "effective.csv", EFFECTIVE_COLUMNS, rows)


def cmd_table(runner: Runner, task, args, out: Path) -> None:
    rows = [table_row(p) for p in table_report(nb_list=task.nb, runner=runner)]
    write_csv(out / "table.csv", TABLE_COLUMNS, rows)


def cmd_feasibility(runner: Runner, task, args, out: Path) -> None:
    rows = [feasibility_row(feasibility_report(effective_params(nb=nb, runner=runner), task.temperature_k))
            for nb in task.nb]
    write_csv(out / "feasibility.csv", FEASIBILITY_COLUMNS, rows)


def cmd_sweep(runner: Runner, task, args, out: Path) -> None:
    cache_dir = runner.cache.root if runner.cache else None
    res = sweep(runner.cfg, runner.num, task, workers=max(1, args.workers), cache_dir=cache_dir)
    runner.solves += res.solves
    runner.log.extend(res.log)
    write_csv(out / "sweep.csv", SWEEP_COLUMNS, res.rows)
    # U(N_b = 0) from the sweep, t columns from the band structure alone
    fig3 = []
    depth0 = res.rows[0]["sweep_depth_nm"] if res.rows else None
    for row in res.rows:
        if row["sweep_nb"] != 0 or row["sweep_depth_nm"] != depth0:
            continue
        point = Runner(dataclasses.replace(runner.cfg, v0_mev=row["sweep_v0_mev"]), runner.num)
        entry = {"v0_mev": row["sweep_v0_mev"], "U_mev": row["U_mev"] if row["U_mev"] is not None else float("nan")}
        for nb in FIG3_NB:
            try:
                entry[f"t_nb{nb}_mev"] = hopping_row(point, nb)[1]
            except ValueError:
                entry[f"t_nb{nb}_mev"] = float("nan")
        fig3.append(entry)
    write_csv(out / "fig3.csv", FIG3_COLUMNS, fig3)
    failed = sum(1 for r in res.rows if r["error"])
    if failed:
        logger.warning("%d of %d sweep points failed; see the error column", failed, len(res.rows))


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


# -- entry point ---------------------------------------------------------------

def _setup_logging(out: Path) -> logging.Handler:
    handler = logging.FileHandler(out / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    if root.level > logging.INFO or root.level == logging.NOTSET:
        root.setLevel(logging.INFO)
    return handler


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1

    try:
        cfg, num, task = load_config(args.config, args.overrides)
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.txt").write_text(format_config(cfg, num, task), encoding="utf-8")
    handler = _setup_logging(out)
    cache = None if args.no_cache else StageCache(args.cache_dir or out / "cache")
    runner = Runner(cfg, num, cache)
    start = time.perf_counter()
    code = 0
    try:
        HANDLERS[args.command](runner, task, args, out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        code = 1
    except (ConvergenceError, WannierError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        code = 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = 1
    finally:
        for line in runner.log:
            logger.info(line)
        if cache is not None:
            logger.info("cache hits=%d misses=%d", cache.hits, cache.misses)
        logger.info("command=%s eigensolves=%d seconds=%.3f exit=%d", args.command, runner.solves,
                    time.perf_counter() - start, code)
        logging.getLogger().removeHandler(handler)
        handler.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
