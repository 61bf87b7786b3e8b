"""Single-particle spectrum and addition energies of one Wannier quantum dot (V0 = 1.1 meV, d = 10 nm)."""
import argparse
from pathlib import Path

from wannierdot import DeviceConfig, NumericsConfig
from wannierdot.cache import StageCache
from wannierdot.output import write_csv
from wannierdot.stages import Runner


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig2")
    ap.add_argument("--orbital-cutoff", type=int, default=3)
    ap.add_argument("--n-max", type=int, default=8)
    args = ap.parse_args()
    out = Path(args.out)
    runner = Runner(DeviceConfig(v0_mev=1.1, depth_nm=10.0), NumericsConfig(orbital_cutoff=args.orbital_cutoff),
                    StageCache(out / "cache"))
    bands = runner.bands2d()
    write_csv(out / "fig2_spectrum.csv", ["level", "nx", "ny", "energy_mev"],
              [(i + 1, b.nx, b.ny, b.onsite) for i, b in enumerate(bands)])
    res = runner.ed_result(runner.all_orbitals(), range(args.n_max + 2))
    add = res.addition()
    write_csv(out / "fig2_addition.csv", ["N", "A_mev"], [(n, add[n]) for n in sorted(add)])
    for n in sorted(add):
        bar = "#" * int(round(20 * add[n] / max(add.values())))
        print(f"N={n:>2}  A={add[n]:.3f} meV  2Sz={res.ground_two_sz(n)}  {bar}")
    print(f"-> {out}")


if __name__ == "__main__":
    main()
