"""U(N_b = 0) and t for N_b = 0, 2, 6 over a V0 sweep at fixed depth."""
import argparse
import os
from pathlib import Path

import numpy as np

from wannierdot import DeviceConfig, NumericsConfig
from wannierdot.sweep import FIG3_COLUMNS, fig3_data
from wannierdot.output import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig3")
    ap.add_argument("--v0", type=float, nargs=3, default=[0.5, 6.0, 20], metavar=("START", "STOP", "N"))
    ap.add_argument("--depth", type=float, default=30.0)
    ap.add_argument("--bands-only", action="store_true", help="skip the ED column")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    start, stop, n = args.v0
    v0 = np.linspace(start, stop, int(n))
    out = Path(args.out)
    res = fig3_data(DeviceConfig(depth_nm=args.depth), NumericsConfig(), v0, with_u=not args.bands_only,
                    workers=args.workers, cache_dir=out / "cache")
    path = write_csv(out / "fig3.csv", FIG3_COLUMNS, res.rows)
    for r in res.rows:
        print(f"V0={r['v0_mev']:.3f}  U={r['U_mev']:>6.3f}  t0={r['t_nb0_mev']:.5f}  t2={r['t_nb2_mev']:.5f}  "
              f"t6={r['t_nb6_mev']:.5f}")
    print(f"-> {path}")


if __name__ == "__main__":
    main()
