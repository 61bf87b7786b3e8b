"""Hubbard parameter tables at the two reference potentials.

Writes table_<V0>.csv into the output directory. The ED basis for each row is
the largest shell prefix whose (N_b + 2)-electron sector fits ed_max_dim.
"""
import argparse
from pathlib import Path

from wannierdot import DeviceConfig, NumericsConfig, table_report, validity_check
from wannierdot.cache import StageCache
from wannierdot.output import TABLE_COLUMNS, table_row, write_csv
from wannierdot.stages import Runner


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/table")
    ap.add_argument("--depth", type=float, default=30.0)
    ap.add_argument("--v0", type=float, nargs="+", default=[0.56, 5.4])
    ap.add_argument("--max-nb", type=int, default=6, help="skip closures above this base filling")
    args = ap.parse_args()
    out = Path(args.out)
    cache = StageCache(out / "cache")
    for v0 in args.v0:
        runner = Runner(DeviceConfig(v0_mev=v0, depth_nm=args.depth), NumericsConfig(), cache)
        admissible = validity_check(runner=runner).admissible_nb
        nb_list = [nb for nb in admissible if nb <= args.max_nb]
        rows = [table_row(p) for p in table_report(nb_list=nb_list, runner=runner)]
        path = write_csv(out / f"table_{v0:g}.csv", TABLE_COLUMNS, rows)
        print(f"V0 = {v0:g} meV, admissible N_b {admissible}")
        for r in rows:
            print(f"  N_b={r['nb']:>2} ({r['nx']},{r['ny']})  U={r['U_mev']:.3f}({r['U_err_mev']:.3f})  "
                  f"V={r['V_mev']:.3f}  t={r['t_mev']:.4f}  t'={r['tprime_mev']:.4f}")
        print(f"  -> {path}")


if __name__ == "__main__":
    main()
